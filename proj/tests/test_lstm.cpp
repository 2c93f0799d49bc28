#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace passloc;
using rnn::LstmConfig;
using rnn::Matrix;

namespace {

LstmConfig tiny(std::size_t layers, std::size_t hidden = 4, std::size_t T = 3, std::size_t N = 2)
{
  LstmConfig c;
  c.memory_length = T;
  c.input_size = N;
  c.hidden_layers = layers;
  c.hidden_size = hidden;
  c.dropout = 0.0;
  return c;
}

Matrix random_matrix(std::mt19937_64& rng, std::size_t r, std::size_t c, double lo, double hi)
{
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(r, c);
  for (auto& x : m.data)
    x = u(rng);
  return m;
}

double sig(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Per-gate recurrence written from the textbook equations, reading weights
// by tensor name. Gate blocks are stacked i, f, g, o.
Matrix oracle_forward(const rnn::Lstm& m, const Matrix& x)
{
  const auto& p = m.parameters();
  const auto& c = m.config();
  const std::size_t H = c.hidden_size;
  std::vector<std::vector<double>> seq(x.rows);
  for (std::size_t t = 0; t < x.rows; ++t)
    for (std::size_t j = 0; j < x.cols; ++j)
      seq[t].push_back(x(t, j));
  for (std::size_t l = 0; l < c.hidden_layers; ++l) {
    const auto& W = m.tensor("lstm" + std::to_string(l) + ".W");
    const auto& b = m.tensor("lstm" + std::to_string(l) + ".b");
    const std::size_t in = seq[0].size();
    auto w = [&](std::size_t r, std::size_t col) { return p[W.offset + r * W.cols + col]; };
    std::vector<double> h(H, 0.0), cell(H, 0.0);
    for (std::size_t t = 0; t < x.rows; ++t) {
      std::vector<double> nh(H);
      for (std::size_t j = 0; j < H; ++j) {
        double zi = p[b.offset + j], zf = p[b.offset + H + j], zg = p[b.offset + 2 * H + j],
               zo = p[b.offset + 3 * H + j];
        for (std::size_t k = 0; k < in; ++k) {
          zi += w(j, k) * seq[t][k];
          zf += w(H + j, k) * seq[t][k];
          zg += w(2 * H + j, k) * seq[t][k];
          zo += w(3 * H + j, k) * seq[t][k];
        }
        for (std::size_t k = 0; k < H; ++k) {
          zi += w(j, in + k) * h[k];
          zf += w(H + j, in + k) * h[k];
          zg += w(2 * H + j, in + k) * h[k];
          zo += w(3 * H + j, in + k) * h[k];
        }
        cell[j] = sig(zf) * cell[j] + sig(zi) * std::tanh(zg);
        nh[j] = sig(zo) * std::tanh(cell[j]);
      }
      h = nh;
      seq[t] = h;
    }
  }
  const auto& Wo = m.tensor("out.W");
  const auto& bo = m.tensor("out.b");
  Matrix out(x.rows, 2);
  for (std::size_t t = 0; t < x.rows; ++t)
    for (std::size_t r = 0; r < 2; ++r) {
      double s = p[bo.offset + r];
      for (std::size_t k = 0; k < Wo.cols; ++k)
        s += p[Wo.offset + r * Wo.cols + k] * seq[t][k];
      out(t, r) = s;
    }
  return out;
}

// y = A x + b per step, plus noise.
rnn::TrainingSet linear_task(std::mt19937_64& rng, std::size_t count, std::size_t T, std::size_t N, double noise)
{
  std::normal_distribution<double> z(0, noise);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> A(2 * N);
  for (auto& a : A)
    a = 8.0 * (u(rng) - 0.5);
  rnn::TrainingSet set;
  for (std::size_t s = 0; s < count; ++s) {
    rnn::Sequence seq{random_matrix(rng, T, N, 0, 1), Matrix(T, 2)};
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t r = 0; r < 2; ++r) {
        double y = r == 0 ? 5.0 : 3.0;
        for (std::size_t k = 0; k < N; ++k)
          y += A[r * N + k] * seq.input(t, k);
        seq.target(t, r) = y + z(rng);
      }
    set.sequences.push_back(std::move(seq));
  }
  return set;
}

// Least-squares fit of each output on [x, 1] via normal equations; returns
// the mean per-sequence RMSE of the fit.
double least_squares_rmse(const rnn::TrainingSet& set)
{
  const std::size_t N = set.sequences[0].input.cols;
  const std::size_t d = N + 1;
  std::vector<std::vector<double>> coef;
  for (std::size_t r = 0; r < 2; ++r) {
    std::vector<std::vector<double>> a(d, std::vector<double>(d + 1, 0.0));
    for (const auto& s : set.sequences)
      for (std::size_t t = 0; t < s.input.rows; ++t) {
        std::vector<double> f(d, 1.0);
        for (std::size_t k = 0; k < N; ++k)
          f[k] = s.input(t, k);
        for (std::size_t i = 0; i < d; ++i) {
          for (std::size_t j = 0; j < d; ++j)
            a[i][j] += f[i] * f[j];
          a[i][d] += f[i] * s.target(t, r);
        }
      }
    for (std::size_t i = 0; i < d; ++i) {
      std::size_t piv = i;
      for (std::size_t k = i + 1; k < d; ++k)
        if (std::abs(a[k][i]) > std::abs(a[piv][i]))
          piv = k;
      std::swap(a[i], a[piv]);
      for (std::size_t k = 0; k < d; ++k)
        if (k != i) {
          const double f = a[k][i] / a[i][i];
          for (std::size_t j = i; j <= d; ++j)
            a[k][j] -= f * a[i][j];
        }
    }
    std::vector<double> c(d);
    for (std::size_t i = 0; i < d; ++i)
      c[i] = a[i][d] / a[i][i];
    coef.push_back(c);
  }
  double total = 0;
  for (const auto& s : set.sequences) {
    Matrix pred(s.input.rows, 2);
    for (std::size_t t = 0; t < s.input.rows; ++t)
      for (std::size_t r = 0; r < 2; ++r) {
        double y = coef[r][N];
        for (std::size_t k = 0; k < N; ++k)
          y += coef[r][k] * s.input(t, k);
        pred(t, r) = y;
      }
    total += rnn::loss(pred, s.target);
  }
  return total / static_cast<double>(set.sequences.size());
}

} // namespace

TEST(Lstm, ForwardMatchesGateOracle)
{
  std::mt19937_64 rng(1);
  for (std::size_t layers : {1u, 2u}) {
    rnn::Lstm m(tiny(layers));
    m.initialize(layers * 17);
    for (auto& p : m.parameters()) // exercise every bias too
      p += std::uniform_real_distribution<double>(-0.5, 0.5)(rng);
    for (int t = 0; t < 10; ++t) {
      const auto x = random_matrix(rng, 3, 2, -1, 1);
      const auto y = m.forward(x);
      const auto o = oracle_forward(m, x);
      for (std::size_t i = 0; i < y.data.size(); ++i)
        EXPECT_NEAR(y.data[i], o.data[i], 1e-10);
    }
  }
}

TEST(Lstm, ZeroWeightsGiveHeadBias)
{
  rnn::Lstm m(tiny(2));
  const auto& bo = m.tensor("out.b");
  m.parameters()[bo.offset] = 1.5;
  m.parameters()[bo.offset + 1] = -2.25;
  std::mt19937_64 rng(2);
  const auto y = m.forward(random_matrix(rng, 3, 2, 0, 1));
  for (std::size_t t = 0; t < 3; ++t) {
    EXPECT_EQ(y(t, 0), 1.5);
    EXPECT_EQ(y(t, 1), -2.25);
  }
}

TEST(Lstm, InferenceIsDeterministic)
{
  auto c = tiny(2, 6);
  c.dropout = 0.5;
  rnn::Lstm m(c);
  m.initialize(3);
  Matrix x(3, 2, 0.4); // duplicate rows
  const auto a = m.forward(x);
  const auto b = m.forward(x);
  EXPECT_EQ(a, b);
  for (double v : a.data)
    EXPECT_TRUE(std::isfinite(v));
}

TEST(Lstm, ShapeAndConfigErrors)
{
  rnn::Lstm m(tiny(1));
  try {
    m.forward(Matrix(4, 2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::shape_mismatch);
  }
  EXPECT_THROW(m.forward(Matrix(3, 3)), Error);
  auto c = tiny(1);
  c.dropout = 1.0;
  EXPECT_THROW(rnn::Lstm{c}, Error);
  c = tiny(1);
  c.memory_length = 0;
  EXPECT_THROW(rnn::Lstm{c}, Error);
}

TEST(Loss, Examples)
{
  std::mt19937_64 rng(4);
  const auto a = random_matrix(rng, 10, 2, -5, 5);
  EXPECT_EQ(rnn::loss(a, a), 0.0);
  Matrix shifted = a;
  for (std::size_t t = 0; t < 10; ++t)
    shifted(t, 0) += 1.0;
  EXPECT_NEAR(rnn::loss(shifted, a), std::sqrt(0.5), 1e-14);
  for (int i = 0; i < 20; ++i) {
    const auto p = random_matrix(rng, 7, 2, -5, 5);
    const auto q = random_matrix(rng, 7, 2, -5, 5);
    double s = 0;
    for (std::size_t t = 0; t < 7; ++t)
      for (std::size_t r = 0; r < 2; ++r)
        s += (p(t, r) - q(t, r)) * (p(t, r) - q(t, r));
    EXPECT_NEAR(rnn::loss(p, q), std::sqrt(s / 14), 1e-12);
  }
  EXPECT_THROW(rnn::loss(Matrix(3, 2), Matrix(2, 2)), Error);
}

TEST(Lstm, ParameterCountClosedForm)
{
  for (std::size_t N : {1u, 5u, 12u})
    for (std::size_t H : {1u, 4u, 32u})
      for (std::size_t L : {0u, 1u, 2u, 3u}) {
        auto c = tiny(L, H, 4, N);
        const rnn::Lstm m(c);
        std::size_t expect = 0, in = N;
        for (std::size_t l = 0; l < L; ++l) {
          expect += 4 * H * in + 4 * H * H + 4 * H;
          in = H;
        }
        expect += 2 * in + 2;
        EXPECT_EQ(m.parameter_count(), expect);
        EXPECT_EQ(rnn::parameter_count(N, H, L), expect);
      }
  EXPECT_EQ(rnn::parameter_count(12, 100, 2), 4u * 100 * 113 + 4u * 100 * 201 + 202);
}

TEST(GradCheck, LinearHeadOnly)
{
  std::mt19937_64 rng(5);
  rnn::Lstm m(tiny(0, 1, 3, 4));
  m.initialize(5);
  const auto x = random_matrix(rng, 3, 4, 0, 1);
  const auto y = random_matrix(rng, 3, 2, -10, 10);
  const auto r = rnn::grad_check(m, x, y);
  EXPECT_LT(r.max_relative_error, 1e-8) << r.worst_tensor << "[" << r.worst_index << "]";
}

TEST(GradCheck, OneAndTwoLayers)
{
  for (std::size_t layers : {1u, 2u}) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      std::mt19937_64 rng(seed);
      rnn::Lstm m(tiny(layers, 4, 3, 4));
      m.initialize(seed);
      const auto x = random_matrix(rng, 3, 4, 0, 1);
      const auto y = random_matrix(rng, 3, 2, -10, 10);
      const auto r = rnn::grad_check(m, x, y, 1e-5, 1e-4);
      EXPECT_TRUE(r.passed) << layers << " layers, seed " << seed << ": " << r.max_relative_error << " at "
                            << r.worst_tensor << "[" << r.worst_index << "] analytic " << r.worst_analytic
                            << " numeric " << r.worst_numeric;
    }
  }
}

TEST(Train, MemorizesOneSequence)
{
  std::mt19937_64 rng(7);
  rnn::TrainingSet set;
  set.sequences.push_back({random_matrix(rng, 5, 3, 0, 1), random_matrix(rng, 5, 2, 0, 8)});
  auto c = tiny(1, 16, 5, 3);
  c.learning_rate = 0.01;
  c.batch_size = 1;
  const auto r = rnn::train(c, set, 600);
  EXPECT_LT(r.loss_trace.back(), 0.1);
  EXPECT_LT(r.loss_trace.back(), r.initial_loss);
}

TEST(Train, LinearTaskNearLeastSquares)
{
  std::mt19937_64 rng(8);
  const auto set = linear_task(rng, 200, 4, 3, 0.5);
  const double optimum = least_squares_rmse(set);
  auto c = tiny(1, 8, 4, 3);
  c.learning_rate = 0.01;
  c.batch_size = 16;
  const auto r = rnn::train(c, set, 150);
  EXPECT_LT(r.loss_trace.back(), 2.0 * optimum) << "optimum " << optimum;
  EXPECT_LE(r.loss_trace.back(), r.initial_loss);

  // moving average (window 5) of the trace never rises while still above the
  // noise floor; at the floor minibatch jitter dominates
  std::vector<double> ma;
  for (std::size_t i = 4; i < r.loss_trace.size(); ++i)
    ma.push_back((r.loss_trace[i] + r.loss_trace[i - 1] + r.loss_trace[i - 2] + r.loss_trace[i - 3] +
                  r.loss_trace[i - 4]) / 5);
  for (std::size_t i = 1; i < ma.size() && ma[i - 1] > 1.1 * optimum; ++i)
    EXPECT_LE(ma[i], ma[i - 1]) << "epoch " << i + 4;
}

TEST(Train, SeededTraceReproducible)
{
  std::mt19937_64 rng(9);
  const auto set = linear_task(rng, 40, 3, 2, 0.2);
  auto c = tiny(2, 6, 3, 2);
  c.dropout = 0.2;
  c.batch_size = 8;
  const auto a = rnn::train(c, set, 5);
  const auto b = rnn::train(c, set, 5);
  ASSERT_EQ(a.loss_trace.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i)
    EXPECT_NEAR(a.loss_trace[i], b.loss_trace[i], 1e-12);
  EXPECT_EQ(a.model.parameters(), b.model.parameters());
  c.seed = 2;
  const auto other = rnn::train(c, set, 5);
  EXPECT_NE(other.loss_trace, a.loss_trace);
}

TEST(Train, NanLossAbortsWithGuidance)
{
  rnn::TrainingSet set;
  Matrix x(3, 2, 0.5);
  x(1, 1) = std::nan("");
  set.sequences.push_back({x, Matrix(3, 2, 1.0)});
  try {
    rnn::train(tiny(1), set, 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::numeric_failure);
    EXPECT_NE(std::string(e.what()).find("learning rate"), std::string::npos);
  }
  EXPECT_THROW(rnn::train(tiny(1), rnn::TrainingSet{}, 1), Error);
}

TEST(Checkpoint, RoundTripIsExact)
{
  std::mt19937_64 rng(10);
  const auto set = linear_task(rng, 10, 3, 2, 0.1);
  const auto trained = rnn::train(tiny(2, 5, 3, 2), set, 3).model;
  std::stringstream ss;
  rnn::save_checkpoint(ss, trained);
  const auto back = rnn::load_checkpoint(ss);
  EXPECT_EQ(back.parameters(), trained.parameters());
  EXPECT_EQ(back.output_offset(), trained.output_offset());
  EXPECT_EQ(back.output_scale(), trained.output_scale());
  const auto x = random_matrix(rng, 3, 2, 0, 1);
  EXPECT_EQ(back.forward(x), trained.forward(x));

  std::stringstream again;
  rnn::save_checkpoint(again, back);
  std::stringstream first;
  rnn::save_checkpoint(first, trained);
  EXPECT_EQ(again.str(), first.str());

  std::istringstream junk("not-a-model 1\n");
  EXPECT_THROW(rnn::load_checkpoint(junk), Error);
  std::string text = first.str();
  std::istringstream cut(text.substr(0, text.size() / 2));
  EXPECT_THROW(rnn::load_checkpoint(cut), Error);
}

TEST(Normalize, RangeAndMissing)
{
  FingerprintVector f;
  f.features = {-100.0, -50.0, 0.0, std::nullopt, -120.0, 5.0};
  const auto v = rnn::normalize_fingerprint(f);
  EXPECT_EQ(v, (std::vector<double>{0.0, 0.5, 1.0, 0.0, 0.0, 1.0}));
}
