#pragma once

// Parallel many-in many-out LSTM trajectory localizer. A window of T
// fingerprints runs through a stack of LSTM layers and a dense head that
// emits one (x, y) per step. Gradients are computed by hand (BPTT) so the
// trainer has no dependencies; grad_check() verifies them against central
// differences.

#include "passloc/core.hpp"
#include "passloc/detail/text.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace passloc::rnn {

//! Dense row-major matrix.
struct Matrix
{
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
    : rows(r)
    , cols(c)
    , data(r * c, fill)
  {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  bool operator==(const Matrix&) const = default;
};

struct LstmConfig
{
  std::size_t memory_length = 10; // T
  std::size_t input_size = 0;     // N
  std::size_t hidden_layers = 2;
  std::size_t hidden_size = 100;
  double dropout = 0.2;
  double learning_rate = 0.001;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;

  //! Smaller network used by the tests and the evaluation harness.
  static LstmConfig desk_scale(std::size_t input_size)
  {
    LstmConfig c;
    c.input_size = input_size;
    c.hidden_size = 32;
    return c;
  }

  void validate() const
  {
    if (memory_length < 1 || input_size < 1)
      throw Error(Errc::invalid_argument, "memory length and input size must be >= 1");
    if (hidden_layers > 0 && hidden_size < 1)
      throw Error(Errc::invalid_argument, "hidden size must be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0))
      throw Error(Errc::invalid_argument, "dropout must lie in [0, 1)");
    if (!(learning_rate > 0.0))
      throw Error(Errc::invalid_argument, "learning rate must be > 0");
    if (batch_size < 1)
      throw Error(Errc::invalid_argument, "batch size must be >= 1");
  }
};

//! Closed-form trainable parameter count.
inline std::size_t parameter_count(std::size_t input_size, std::size_t hidden_size, std::size_t layers)
{
  std::size_t total = 0;
  std::size_t in = input_size;
  for (std::size_t l = 0; l < layers; ++l) {
    total += 4 * hidden_size * (in + hidden_size + 1);
    in = hidden_size;
  }
  return total + 2 * (in + 1);
}

//! RMSE over all 2T coordinates.
inline double loss(const Matrix& pred, const Matrix& target)
{
  if (pred.rows != target.rows || pred.cols != target.cols)
    throw Error(Errc::shape_mismatch, "prediction and target shapes differ");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const double d = pred.data[i] - target.data[i];
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(pred.data.size()));
}

//! RSSI in [-100, 0] dBm to [0, 1]; missing to 0.
inline std::vector<double> normalize_fingerprint(const FingerprintVector& fp)
{
  std::vector<double> out(fp.size(), 0.0);
  for (std::size_t k = 0; k < fp.size(); ++k)
    if (fp.features[k])
      out[k] = std::clamp((*fp.features[k] + 100.0) / 100.0, 0.0, 1.0);
  return out;
}

struct TensorView
{
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t offset = 0;
};

class Lstm
{
public:
  Lstm() = default;

  explicit Lstm(const LstmConfig& config)
    : config_(config)
  {
    config_.validate();
    std::size_t offset = 0;
    std::size_t in = config_.input_size;
    auto add = [&](std::string name, std::size_t r, std::size_t c) {
      layout_.push_back({std::move(name), r, c, offset});
      offset += r * c;
    };
    for (std::size_t l = 0; l < config_.hidden_layers; ++l) {
      const std::size_t h = config_.hidden_size;
      add("lstm" + std::to_string(l) + ".W", 4 * h, in + h);
      add("lstm" + std::to_string(l) + ".b", 4 * h, 1);
      in = h;
    }
    add("out.W", 2, in);
    add("out.b", 2, 1);
    params_.assign(offset, 0.0);
  }

  //! Uniform(-1/sqrt(H), 1/sqrt(H)) weights, forget-gate bias 1, zero head bias.
  void initialize(std::uint64_t seed)
  {
    std::mt19937_64 rng(seed);
    for (const auto& t : layout_) {
      const bool bias = t.cols == 1;
      const double fan = static_cast<double>(t.cols == 1 ? t.rows / 4 : t.cols);
      std::uniform_real_distribution<double> u(-1.0 / std::sqrt(std::max(fan, 1.0)),
                                               1.0 / std::sqrt(std::max(fan, 1.0)));
      for (std::size_t i = 0; i < t.rows * t.cols; ++i) {
        double v = bias ? 0.0 : u(rng);
        if (bias && t.name != "out.b") {
          const std::size_t h = t.rows / 4;
          if (i >= h && i < 2 * h)
            v = 1.0;
        }
        params_[t.offset + i] = v;
      }
    }
  }

  const LstmConfig& config() const { return config_; }
  const std::vector<TensorView>& layout() const { return layout_; }
  std::vector<double>& parameters() { return params_; }
  const std::vector<double>& parameters() const { return params_; }
  std::size_t parameter_count() const { return params_.size(); }

  //! Affine map applied to the dense head: location = raw * scale + offset.
  void set_output_transform(Location offset, Location scale)
  {
    out_offset_ = offset;
    out_scale_ = scale;
  }
  Location output_offset() const { return out_offset_; }
  Location output_scale() const { return out_scale_; }

  const TensorView& tensor(const std::string& name) const
  {
    for (const auto& t : layout_)
      if (t.name == name)
        return t;
    throw Error(Errc::invalid_argument, "no tensor named " + name);
  }

  //! Inference: dropout disabled, deterministic.
  Matrix forward(const Matrix& window) const
  {
    Cache cache;
    return run(window, cache, nullptr);
  }

  //! Loss of one sequence plus its gradient (accumulated into `grad`). With a
  //! non-null rng dropout is active.
  double loss_and_gradient(const Matrix& window, const Matrix& target, std::vector<double>& grad,
                           std::mt19937_64* dropout_rng = nullptr) const
  {
    if (grad.size() != params_.size())
      grad.assign(params_.size(), 0.0);
    Cache cache;
    const Matrix pred = run(window, cache, dropout_rng);
    if (target.rows != pred.rows || target.cols != 2)
      throw Error(Errc::shape_mismatch, "target must be T x 2");
    const double l = loss(pred, target);
    if (!std::isfinite(l))
      return l;
    backward(window, cache, pred, target, l, grad);
    return l;
  }

private:
  struct LayerCache
  {
    // Per step, sized [T][H] (or [T][in] for inputs).
    std::vector<std::vector<double>> input, i, f, g, o, c, h, tanh_c, mask;
  };
  struct Cache
  {
    std::vector<LayerCache> layers;
    std::vector<std::vector<double>> head_input;
  };

  static double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

  void check_window(const Matrix& window) const
  {
    if (window.rows != config_.memory_length || window.cols != config_.input_size)
      throw Error(Errc::shape_mismatch, "window must be " + std::to_string(config_.memory_length) + " x " +
                                          std::to_string(config_.input_size) + ", got " +
                                          std::to_string(window.rows) + " x " + std::to_string(window.cols));
  }

  Matrix run(const Matrix& window, Cache& cache, std::mt19937_64* dropout_rng) const
  {
    check_window(window);
    const std::size_t T = window.rows;
    const std::size_t H = config_.hidden_size;
    const std::size_t L = config_.hidden_layers;

    std::vector<std::vector<double>> x(T);
    for (std::size_t t = 0; t < T; ++t)
      x[t].assign(window.data.begin() + static_cast<std::ptrdiff_t>(t * window.cols),
                  window.data.begin() + static_cast<std::ptrdiff_t>((t + 1) * window.cols));

    cache.layers.assign(L, {});
    for (std::size_t l = 0; l < L; ++l) {
      const auto& Wt = layout_[2 * l];
      const auto& bt = layout_[2 * l + 1];
      const double* W = params_.data() + Wt.offset;
      const double* b = params_.data() + bt.offset;
      const std::size_t in = Wt.cols - H;
      auto& lc = cache.layers[l];
      for (auto* v : {&lc.input, &lc.i, &lc.f, &lc.g, &lc.o, &lc.c, &lc.h, &lc.tanh_c, &lc.mask})
        v->assign(T, {});
      std::vector<double> h_prev(H, 0.0);
      std::vector<double> c_prev(H, 0.0);
      std::vector<double> z(4 * H);
      for (std::size_t t = 0; t < T; ++t) {
        lc.input[t] = x[t];
        for (std::size_t r = 0; r < 4 * H; ++r) {
          const double* row = W + r * Wt.cols;
          double s = b[r];
          for (std::size_t j = 0; j < in; ++j)
            s += row[j] * x[t][j];
          for (std::size_t j = 0; j < H; ++j)
            s += row[in + j] * h_prev[j];
          z[r] = s;
        }
        auto& iv = lc.i[t];
        auto& fv = lc.f[t];
        auto& gv = lc.g[t];
        auto& ov = lc.o[t];
        auto& cv = lc.c[t];
        auto& hv = lc.h[t];
        auto& tc = lc.tanh_c[t];
        iv.resize(H);
        fv.resize(H);
        gv.resize(H);
        ov.resize(H);
        cv.resize(H);
        hv.resize(H);
        tc.resize(H);
        for (std::size_t j = 0; j < H; ++j) {
          iv[j] = sigmoid(z[j]);
          fv[j] = sigmoid(z[H + j]);
          gv[j] = std::tanh(z[2 * H + j]);
          ov[j] = sigmoid(z[3 * H + j]);
          cv[j] = fv[j] * c_prev[j] + iv[j] * gv[j];
          tc[j] = std::tanh(cv[j]);
          hv[j] = ov[j] * tc[j];
        }
        h_prev = hv;
        c_prev = cv;
      }
      // Dropout on hidden outputs feeding the next LSTM layer.
      const bool drop = dropout_rng != nullptr && config_.dropout > 0.0 && l + 1 < L;
      std::bernoulli_distribution keep(1.0 - config_.dropout);
      const double scale = 1.0 / (1.0 - config_.dropout);
      for (std::size_t t = 0; t < T; ++t) {
        lc.mask[t].assign(H, 1.0);
        if (drop)
          for (std::size_t j = 0; j < H; ++j)
            lc.mask[t][j] = keep(*dropout_rng) ? scale : 0.0;
        x[t].resize(H);
        for (std::size_t j = 0; j < H; ++j)
          x[t][j] = lc.h[t][j] * lc.mask[t][j];
      }
    }

    const auto& Wo_t = layout_[2 * L];
    const double* Wo = params_.data() + Wo_t.offset;
    const double* bo = params_.data() + layout_[2 * L + 1].offset;
    cache.head_input = x;
    Matrix out(T, 2);
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t r = 0; r < 2; ++r) {
        double s = bo[r];
        for (std::size_t j = 0; j < Wo_t.cols; ++j)
          s += Wo[r * Wo_t.cols + j] * x[t][j];
        out(t, r) = s;
      }
      out(t, 0) = out(t, 0) * out_scale_.x + out_offset_.x;
      out(t, 1) = out(t, 1) * out_scale_.y + out_offset_.y;
    }
    return out;
  }

  void backward(const Matrix& window, const Cache& cache, const Matrix& pred, const Matrix& target,
                double l, std::vector<double>& grad) const
  {
    (void)window;
    const std::size_t T = pred.rows;
    const std::size_t H = config_.hidden_size;
    const std::size_t L = config_.hidden_layers;
    const double denom = l > 0.0 ? static_cast<double>(pred.data.size()) * l : 0.0;

    const auto& Wo_t = layout_[2 * L];
    const double* Wo = params_.data() + Wo_t.offset;
    double* gWo = grad.data() + Wo_t.offset;
    double* gbo = grad.data() + layout_[2 * L + 1].offset;
    const std::size_t head_in = Wo_t.cols;

    std::vector<std::vector<double>> d_above(T, std::vector<double>(head_in, 0.0));
    for (std::size_t t = 0; t < T; ++t) {
      double dy[2];
      dy[0] = denom > 0.0 ? (pred(t, 0) - target(t, 0)) / denom * out_scale_.x : 0.0;
      dy[1] = denom > 0.0 ? (pred(t, 1) - target(t, 1)) / denom * out_scale_.y : 0.0;
      const auto& hin = cache.head_input[t];
      for (std::size_t r = 0; r < 2; ++r) {
        gbo[r] += dy[r];
        for (std::size_t j = 0; j < head_in; ++j) {
          gWo[r * head_in + j] += dy[r] * hin[j];
          d_above[t][j] += Wo[r * head_in + j] * dy[r];
        }
      }
    }

    for (std::size_t li = L; li-- > 0;) {
      const auto& lc = cache.layers[li];
      const auto& Wt = layout_[2 * li];
      const double* W = params_.data() + Wt.offset;
      double* gW = grad.data() + Wt.offset;
      double* gb = grad.data() + layout_[2 * li + 1].offset;
      const std::size_t in = Wt.cols - H;

      std::vector<std::vector<double>> d_below(T, std::vector<double>(in, 0.0));
      std::vector<double> dh_next(H, 0.0);
      std::vector<double> dc_next(H, 0.0);
      std::vector<double> dz(4 * H);
      for (std::size_t t = T; t-- > 0;) {
        for (std::size_t j = 0; j < H; ++j) {
          const double dh = d_above[t][j] * lc.mask[t][j] + dh_next[j];
          const double o = lc.o[t][j];
          const double tc = lc.tanh_c[t][j];
          const double dc = dc_next[j] + dh * o * (1.0 - tc * tc);
          const double c_prev = t > 0 ? lc.c[t - 1][j] : 0.0;
          const double i = lc.i[t][j];
          const double f = lc.f[t][j];
          const double g = lc.g[t][j];
          dz[j] = dc * g * i * (1.0 - i);
          dz[H + j] = dc * c_prev * f * (1.0 - f);
          dz[2 * H + j] = dc * i * (1.0 - g * g);
          dz[3 * H + j] = dh * tc * o * (1.0 - o);
          dc_next[j] = dc * f;
        }
        std::fill(dh_next.begin(), dh_next.end(), 0.0);
        const auto& xin = lc.input[t];
        for (std::size_t r = 0; r < 4 * H; ++r) {
          const double d = dz[r];
          if (d == 0.0)
            continue;
          gb[r] += d;
          const double* row = W + r * Wt.cols;
          double* grow = gW + r * Wt.cols;
          for (std::size_t j = 0; j < in; ++j) {
            grow[j] += d * xin[j];
            d_below[t][j] += row[j] * d;
          }
          if (t > 0) {
            const auto& hp = lc.h[t - 1];
            for (std::size_t j = 0; j < H; ++j) {
              grow[in + j] += d * hp[j];
              dh_next[j] += row[in + j] * d;
            }
          }
        }
      }
      d_above = std::move(d_below);
    }
  }

  LstmConfig config_;
  std::vector<TensorView> layout_;
  std::vector<double> params_;
  Location out_offset_{0.0, 0.0};
  Location out_scale_{1.0, 1.0};

  friend void save_checkpoint(std::ostream&, const Lstm&);
  friend Lstm load_checkpoint(std::istream&);
};

struct Sequence
{
  Matrix input;  // T x N
  Matrix target; // T x 2
};

struct TrainingSet
{
  std::vector<Sequence> sequences;
};

//! Mean per-sequence RMSE in inference mode.
inline double mean_loss(const Lstm& model, const TrainingSet& data)
{
  double s = 0.0;
  for (const auto& seq : data.sequences)
    s += loss(model.forward(seq.input), seq.target);
  return s / static_cast<double>(data.sequences.size());
}

struct TrainResult
{
  Lstm model;
  double initial_loss = 0.0;
  std::vector<double> loss_trace; // inference-mode mean loss after each epoch
};

//! Minibatch Adam (beta1 0.9, beta2 0.999, eps 1e-8) on the mean
//! per-sequence RMSE. Batch gradients are summed in sequence-index order so a
//! fixed seed reproduces the trace exactly.
inline TrainResult train(const LstmConfig& config, const TrainingSet& data, std::size_t epochs)
{
  config.validate();
  if (data.sequences.empty())
    throw Error(Errc::invalid_argument, "training set is empty");
  for (const auto& s : data.sequences)
    if (s.input.rows != config.memory_length || s.input.cols != config.input_size || s.target.rows != config.memory_length ||
        s.target.cols != 2)
      throw Error(Errc::shape_mismatch, "training sequence shape does not match config");

  TrainResult result{Lstm(config), 0.0, {}};
  Lstm& model = result.model;
  model.initialize(config.seed);

  // Scale the head to the target spread so the raw outputs stay O(1).
  double mx = 0.0, my = 0.0, n = 0.0;
  for (const auto& s : data.sequences)
    for (std::size_t t = 0; t < s.target.rows; ++t) {
      mx += s.target(t, 0);
      my += s.target(t, 1);
      n += 1.0;
    }
  mx /= n;
  my /= n;
  double vx = 0.0, vy = 0.0;
  for (const auto& s : data.sequences)
    for (std::size_t t = 0; t < s.target.rows; ++t) {
      vx += (s.target(t, 0) - mx) * (s.target(t, 0) - mx);
      vy += (s.target(t, 1) - my) * (s.target(t, 1) - my);
    }
  const double sx = std::sqrt(vx / n);
  const double sy = std::sqrt(vy / n);
  model.set_output_transform({mx, my}, {sx > 1e-9 ? sx : 1.0, sy > 1e-9 ? sy : 1.0});

  result.initial_loss = mean_loss(model, data);

  const double beta1 = 0.9;
  const double beta2 = 0.999;
  const double eps = 1e-8;
  auto& params = model.parameters();
  std::vector<double> m(params.size(), 0.0);
  std::vector<double> v(params.size(), 0.0);
  std::vector<double> grad(params.size(), 0.0);
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(data.sequences.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t step = 0;

  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t b = start; b < end; ++b) {
        const auto& seq = data.sequences[order[b]];
        const double l = model.loss_and_gradient(seq.input, seq.target, grad, &rng);
        if (!std::isfinite(l))
          throw Error(Errc::numeric_failure, "loss became NaN at epoch " + std::to_string(epoch) +
                                               "; lower the learning rate (currently " +
                                               detail::fmt_g(config.learning_rate, 6) + ")");
      }
      const double inv = 1.0 / static_cast<double>(end - start);
      ++step;
      const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
      for (std::size_t p = 0; p < params.size(); ++p) {
        const double g = grad[p] * inv;
        m[p] = beta1 * m[p] + (1.0 - beta1) * g;
        v[p] = beta2 * v[p] + (1.0 - beta2) * g * g;
        params[p] -= config.learning_rate * (m[p] / c1) / (std::sqrt(v[p] / c2) + eps);
      }
    }
    const double l = mean_loss(model, data);
    if (!std::isfinite(l))
      throw Error(Errc::numeric_failure, "loss became NaN after epoch " + std::to_string(epoch) +
                                           "; lower the learning rate");
    result.loss_trace.push_back(l);
  }
  return result;
}

struct GradCheckResult
{
  double max_relative_error = 0.0;
  std::string worst_tensor;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  bool passed = false;
};

//! loss(a, target) - loss(b, target) without forming either loss: the
//! difference of squares is summed as (a - b)(a + b - 2 target), so targets
//! cancel exactly and rounding scales with the outputs, not with the loss.
inline double loss_difference(const Matrix& a, const Matrix& b, const Matrix& target)
{
  const double la = loss(a, target);
  const double lb = loss(b, target);
  if (la + lb == 0.0)
    return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i)
    s += (a.data[i] - b.data[i]) * (a.data[i] + b.data[i] - 2.0 * target.data[i]);
  return s / static_cast<double>(a.data.size()) / (la + lb);
}

//! Compares the analytic gradient of the sequence loss with central finite
//! differences on every parameter. Dropout is disabled.
inline GradCheckResult grad_check(const Lstm& model, const Matrix& window, const Matrix& target,
                                  double step = 1e-5, double threshold = 1e-4)
{
  std::vector<double> analytic(model.parameter_count(), 0.0);
  model.loss_and_gradient(window, target, analytic, nullptr);

  Lstm probe = model;
  auto& p = probe.parameters();
  GradCheckResult res;
  for (const auto& t : model.layout()) {
    for (std::size_t i = 0; i < t.rows * t.cols; ++i) {
      const std::size_t idx = t.offset + i;
      const double saved = p[idx];
      p[idx] = saved + step;
      const Matrix y_up = probe.forward(window);
      p[idx] = saved - step;
      const Matrix y_down = probe.forward(window);
      p[idx] = saved;
      const double numeric = loss_difference(y_up, y_down, target) / (2.0 * step);
      const double rel = std::abs(analytic[idx] - numeric) / (std::abs(analytic[idx]) + std::abs(numeric) + 1e-12);
      if (rel > res.max_relative_error || res.worst_tensor.empty()) {
        res.max_relative_error = rel;
        res.worst_tensor = t.name;
        res.worst_index = i;
        res.worst_analytic = analytic[idx];
        res.worst_numeric = numeric;
      }
    }
  }
  res.passed = res.max_relative_error < threshold;
  return res;
}

inline void save_checkpoint(std::ostream& out, const Lstm& model)
{
  using detail::fmt_g;
  const auto& c = model.config_;
  out << "passloc-lstm 1\n";
  out << "memory_length " << c.memory_length << "\n";
  out << "input_size " << c.input_size << "\n";
  out << "hidden_layers " << c.hidden_layers << "\n";
  out << "hidden_size " << c.hidden_size << "\n";
  out << "dropout " << fmt_g(c.dropout, 17) << "\n";
  out << "learning_rate " << fmt_g(c.learning_rate, 17) << "\n";
  out << "batch_size " << c.batch_size << "\n";
  out << "seed " << c.seed << "\n";
  out << "output_offset " << fmt_g(model.out_offset_.x, 17) << " " << fmt_g(model.out_offset_.y, 17) << "\n";
  out << "output_scale " << fmt_g(model.out_scale_.x, 17) << " " << fmt_g(model.out_scale_.y, 17) << "\n";
  for (const auto& t : model.layout_) {
    out << "tensor " << t.name << " " << t.rows << " " << t.cols << "\n";
    for (std::size_t r = 0; r < t.rows; ++r) {
      for (std::size_t col = 0; col < t.cols; ++col)
        out << (col ? " " : "") << fmt_g(model.params_[t.offset + r * t.cols + col], 17);
      out << "\n";
    }
  }
}

inline Lstm load_checkpoint(std::istream& in)
{
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != "passloc-lstm" || version != 1)
    throw Error(Errc::parse_error, "not a passloc-lstm v1 checkpoint");
  LstmConfig c;
  Location offset, scale;
  auto expect = [&](const char* key) {
    std::string k;
    if (!(in >> k) || k != key)
      throw Error(Errc::parse_error, std::string("checkpoint: expected ") + key);
  };
  expect("memory_length");
  in >> c.memory_length;
  expect("input_size");
  in >> c.input_size;
  expect("hidden_layers");
  in >> c.hidden_layers;
  expect("hidden_size");
  in >> c.hidden_size;
  std::string tok;
  expect("dropout");
  in >> tok;
  c.dropout = detail::parse_double(tok);
  expect("learning_rate");
  in >> tok;
  c.learning_rate = detail::parse_double(tok);
  expect("batch_size");
  in >> c.batch_size;
  expect("seed");
  in >> c.seed;
  expect("output_offset");
  in >> tok;
  offset.x = detail::parse_double(tok);
  in >> tok;
  offset.y = detail::parse_double(tok);
  expect("output_scale");
  in >> tok;
  scale.x = detail::parse_double(tok);
  in >> tok;
  scale.y = detail::parse_double(tok);
  if (!in)
    throw Error(Errc::parse_error, "checkpoint header truncated");

  Lstm model(c);
  model.set_output_transform(offset, scale);
  for (const auto& t : model.layout_) {
    std::string name;
    std::size_t rows = 0, cols = 0;
    expect("tensor");
    if (!(in >> name >> rows >> cols) || name != t.name || rows != t.rows || cols != t.cols)
      throw Error(Errc::parse_error, "checkpoint tensor mismatch at " + t.name);
    for (std::size_t i = 0; i < rows * cols; ++i) {
      if (!(in >> tok))
        throw Error(Errc::parse_error, "checkpoint tensor " + t.name + " truncated");
      model.params_[t.offset + i] = detail::parse_double(tok);
    }
  }
  return model;
}

} // namespace passloc::rnn
