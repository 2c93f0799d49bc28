// passloc command line: database simulation, test runs, comparisons and the
// model/simulator self checks.

#include "passloc.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace passloc;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

Scenario load_scenario(const std::string& path)
{
  if (path.empty())
    return desk_scenario();
  std::ifstream in(path);
  if (!in)
    throw Error(Errc::io_error, "cannot open scenario '" + path + "'");
  return parse_scenario(in);
}

std::string scenario_text(const Scenario& s)
{
  std::ostringstream os;
  write_scenario(os, s);
  return os.str();
}

std::ofstream open_out(const fs::path& p)
{
  std::ofstream out(p);
  if (!out)
    throw Error(Errc::io_error, "cannot write '" + p.string() + "'");
  return out;
}

void write_manifest(const fs::path& dir, const std::string& command, json inputs, const std::vector<std::uint64_t>& seeds,
                    json outputs)
{
  json m;
  m["tool"] = "passloc";
  m["version"] = kVersion;
  m["command"] = command;
  m["inputs"] = std::move(inputs);
  m["seeds"] = seeds;
  m["outputs"] = std::move(outputs);
  m["compiler"] = __VERSION__;
  m["created_unix"] =
    std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch()).count();
  open_out(dir / "manifest.json") << m.dump(2) << "\n";
}

rnn::Lstm train_model(const Scenario& sc, std::size_t trajectories, std::size_t epochs, std::uint64_t seed)
{
  auto cfg = rnn::LstmConfig::desk_scale(sc.env.aps.size());
  cfg.seed = seed;
  const auto data = eval::lstm_training_set(sc, trajectories, cfg.memory_length, seed);
  auto result = rnn::train(cfg, data, epochs);
  std::cerr << "lstm: loss " << result.initial_loss << " -> "
            << (result.loss_trace.empty() ? result.initial_loss : result.loss_trace.back()) << "\n";
  return std::move(result.model);
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{"passive WiFi indoor localization toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  // simulate-db
  std::string scenario_path;
  std::string out_dir = "out";
  std::uint64_t db_seed = 1;
  std::vector<std::string> devices;
  auto* sim = app.add_subcommand("simulate-db", "simulate the fingerprint survey and write the database");
  sim->add_option("-s,--scenario", scenario_path, "scenario file (default: built-in desk scenario)");
  sim->add_option("-o,--out", out_dir, "output directory");
  sim->add_option("--seed", db_seed, "collection seed");
  sim->add_option("--device", devices, "restrict to these device models");

  // run
  std::string db_dir;
  std::string device = "samsung_s6";
  std::string state = "inactive_screen_on";
  std::string algorithm = "ssp";
  std::string seeds_text;
  std::string model_path;
  bool no_rts = false;
  double delta_t = 0.0;
  std::size_t lstm_trajectories = 2000;
  std::size_t lstm_epochs = 30;
  auto* run = app.add_subcommand("run", "localize simulated test trajectories");
  run->add_option("-s,--scenario", scenario_path, "scenario file");
  run->add_option("-d,--db", db_dir, "database directory (default: simulate one)");
  run->add_option("-o,--out", out_dir, "output directory");
  run->add_option("--device", device, "device model");
  run->add_option("--state", state, "inactive_screen_on | inactive_screen_off | active");
  run->add_option("-a,--algorithm", algorithm, "ssp | pmimo_lstm | two_step");
  run->add_option("--seeds", seeds_text, "comma separated seeds or a-b range (default: scenario seeds)");
  run->add_flag("--no-rts", no_rts, "do not send RTS frames");
  run->add_option("--delta-t", delta_t, "localization interval in s (default: scenario)");
  run->add_option("--model", model_path, "LSTM checkpoint for pmimo_lstm");
  run->add_option("--lstm-trajectories", lstm_trajectories, "training sequences when no checkpoint is given");
  run->add_option("--lstm-epochs", lstm_epochs, "training epochs when no checkpoint is given");

  // compare
  std::vector<std::string> report_args;
  auto* cmp = app.add_subcommand("compare", "tabulate reports (label=path)");
  cmp->add_option("reports", report_args, "label=path to an errors.csv")->required()->expected(2, -1);
  cmp->add_option("-o,--out", out_dir, "output directory");

  // grad-check
  std::size_t gc_layers = 2;
  std::size_t gc_hidden = 4;
  std::size_t gc_inputs = 4;
  std::size_t gc_T = 3;
  std::uint64_t gc_seed = 1;
  double gc_step = 1e-5;
  double gc_threshold = 1e-4;
  auto* gc = app.add_subcommand("grad-check", "finite-difference check of the LSTM gradient");
  gc->add_option("--layers", gc_layers, "LSTM layers");
  gc->add_option("--hidden", gc_hidden, "hidden size");
  gc->add_option("--inputs", gc_inputs, "input size");
  gc->add_option("-T,--memory", gc_T, "sequence length");
  gc->add_option("--seed", gc_seed, "initialization seed");
  gc->add_option("--step", gc_step, "finite-difference step");
  gc->add_option("--threshold", gc_threshold, "relative error threshold");

  // calibrate-arrivals
  std::size_t min_gaps = 10000;
  std::uint64_t cal_seed = 1;
  auto* cal = app.add_subcommand("calibrate-arrivals", "inter-frame gap statistics of one device");
  cal->add_option("-s,--scenario", scenario_path, "scenario file (for device profiles)");
  cal->add_option("--device", device, "device model");
  cal->add_option("--state", state, "phone state");
  cal->add_flag("--no-rts", no_rts, "no RTS frames");
  cal->add_option("--gaps", min_gaps, "minimum number of gaps");
  cal->add_option("--seed", cal_seed, "seed");
  cal->add_option("-o,--out", out_dir, "output directory for gaps.csv (optional)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) {
      const auto sc = load_scenario(scenario_path);
      const auto db = eval::collect_training(sc, db_seed, devices);
      const fs::path dir(out_dir);
      write_database(db, dir / "db");
      open_out(dir / "scenario.cfg") << scenario_text(sc);
      write_manifest(dir, "simulate-db", {{"scenario", scenario_path.empty() ? "<desk>" : scenario_path}, {"devices", devices}},
                     {db_seed}, {{"database", "db"}, {"records", db.records().size()}});
      std::cout << "wrote " << db.records().size() << " records to " << (dir / "db").string() << "\n";
      return 0;
    }

    if (*run) {
      auto sc = load_scenario(scenario_path);
      eval::RunSpec spec;
      spec.device_model = device;
      spec.phone_state = airsim::phone_state_from(state);
      spec.algorithm = eval::algorithm_from(algorithm);
      spec.rts = !no_rts;
      spec.seeds = seeds_text.empty() ? sc.seeds : passloc::detail::parse_seed_list(seeds_text);
      spec.delta_t = delta_t > 0.0 ? delta_t : sc.delta_t;
      spec.validate();

      const auto db = db_dir.empty() ? eval::collect_training(sc, 1) : read_database(db_dir);
      const ssp::LikelihoodModel lm(db, sc.kernel);
      std::optional<rnn::Lstm> model;
      const fs::path dir(out_dir);
      fs::create_directories(dir);
      if (spec.algorithm == eval::Algorithm::pmimo_lstm) {
        if (!model_path.empty()) {
          std::ifstream in(model_path);
          if (!in)
            throw Error(Errc::io_error, "cannot open model '" + model_path + "'");
          model = rnn::load_checkpoint(in);
        } else {
          model = train_model(sc, lstm_trajectories, lstm_epochs, spec.seeds.front());
          auto out = open_out(dir / "model.txt");
          rnn::save_checkpoint(out, *model);
        }
      }
      eval::TestContext ctx{&sc, &db, &lm, model ? &*model : nullptr};
      std::vector<eval::ErrorReport> parts;
      json logs = json::array();
      for (auto seed : spec.seeds) {
        std::vector<protocol::LogEntry> log;
        parts.push_back(eval::run_seed(ctx, spec, seed, &log));
        const std::string name = "log_" + std::to_string(seed) + ".csv";
        auto logf = open_out(dir / name);
        protocol::write_log(logf, log);
        logs.push_back(name);
      }
      const auto report = eval::ErrorReport::merge(parts);

      {
        auto errf = open_out(dir / "errors.csv");
        eval::write_report(errf, report);
      }
      json routes(report.routes);
      write_manifest(dir, "run",
                     {{"scenario", scenario_path.empty() ? "<desk>" : scenario_path},
                      {"db", db_dir.empty() ? "<simulated seed 1>" : db_dir},
                      {"device", device},
                      {"state", state},
                      {"algorithm", algorithm},
                      {"rts", spec.rts},
                      {"delta_t", spec.delta_t},
                      {"model", model_path}},
                     spec.seeds,
                     {{"errors", "errors.csv"},
                      {"logs", logs},
                      {"mean", report.mean},
                      {"std", report.std},
                      {"fixes", report.fixes},
                      {"windows", report.windows},
                      {"fix_rate", report.fix_rate},
                      {"routes", routes}});
      std::cout << device << " " << state << " " << algorithm << (spec.rts ? " rts" : " no-rts") << ": "
                << passloc::detail::fmt_g(report.mean, 3) << " +/- " << passloc::detail::fmt_g(report.std, 3)
                << " m over " << report.fixes << " fixes, fix rate " << passloc::detail::fmt_g(report.fix_rate, 3)
                << (report.flagged ? " [no fixes]" : "") << "\n";
      return 0;
    }

    if (*cmp) {
      std::map<std::string, eval::ErrorReport> reports;
      json inputs = json::object();
      for (const auto& arg : report_args) {
        const auto eq = arg.find('=');
        if (eq == std::string::npos)
          throw Error(Errc::invalid_argument, "expected label=path, got '" + arg + "'");
        const std::string label = arg.substr(0, eq);
        const std::string path = arg.substr(eq + 1);
        std::ifstream in(path);
        if (!in)
          throw Error(Errc::io_error, "cannot open report '" + path + "'");
        reports[label] = eval::read_report(in);
        inputs[label] = path;
      }
      const auto table = eval::compare(reports);
      const fs::path dir(out_dir);
      fs::create_directories(dir);
      {
        auto t = open_out(dir / "table.csv");
        eval::write_table(t, table);
      }
      {
        auto c = open_out(dir / "cdf.csv");
        eval::write_cdf(c, table);
      }
      write_manifest(dir, "compare", inputs, {}, {{"table", "table.csv"}, {"cdf", "cdf.csv"}});
      eval::write_table(std::cout, table);
      return 0;
    }

    if (*gc) {
      rnn::LstmConfig cfg;
      cfg.memory_length = gc_T;
      cfg.input_size = gc_inputs;
      cfg.hidden_layers = gc_layers;
      cfg.hidden_size = gc_hidden;
      cfg.seed = gc_seed;
      rnn::Lstm model(cfg);
      model.initialize(gc_seed);
      airsim::Rng rng(gc_seed ^ 0x9c);
      std::uniform_real_distribution<double> u(0.0, 1.0);
      rnn::Matrix window(gc_T, gc_inputs);
      rnn::Matrix target(gc_T, 2);
      for (auto& v : window.data)
        v = u(rng);
      for (auto& v : target.data)
        v = 10.0 * u(rng);
      const auto r = rnn::grad_check(model, window, target, gc_step, gc_threshold);
      std::cout << "max relative error " << passloc::detail::fmt_g(r.max_relative_error, 3) << " at " << r.worst_tensor
                << "[" << r.worst_index << "] (analytic " << r.worst_analytic << ", numeric " << r.worst_numeric
                << "): " << (r.passed ? "PASS" : "FAIL") << "\n";
      return r.passed ? 0 : 1;
    }

    if (*cal) {
      const auto sc = load_scenario(scenario_path);
      const auto& dev = airsim::find_device(sc.devices, device);
      const auto ps = airsim::phone_state_from(state);
      std::optional<double> interval;
      if (!no_rts)
        interval = sc.rts_interval;
      airsim::Rng rng(cal_seed);
      std::vector<double> gaps;
      // long streams: the unfinished last gap of each stream is dropped, and
      // dropping it biases short streams toward short gaps
      double duration = interval ? 600.0 : 200000.0;
      while (gaps.size() < min_gaps) {
        const auto events = airsim::frame_stream(dev, ps, interval, duration, rng);
        const auto g = airsim::inter_frame_gaps(events);
        gaps.insert(gaps.end(), g.begin(), g.end());
        duration = std::min(duration * 2.0, 1e6);
      }
      auto frac = [&](double x) {
        return static_cast<double>(std::count_if(gaps.begin(), gaps.end(), [&](double g) { return g <= x; })) /
               static_cast<double>(gaps.size());
      };
      std::cout << dev.model_name << " " << state << (interval ? " rts" : " no-rts") << ": " << gaps.size() << " gaps\n";
      for (double x : {0.2, 1.0, 2.0, 4.0, 10.0, 30.0, 60.0})
        std::cout << "  P(gap <= " << x << " s) = " << passloc::detail::fmt_g(frac(x), 4) << "\n";
      if (app.get_subcommand("calibrate-arrivals")->count("--out") > 0) {
        const fs::path dir(out_dir);
        fs::create_directories(dir);
        auto out = open_out(dir / "gaps.csv");
        out << "gap\n";
        for (double g : gaps)
          out << passloc::detail::fmt_g(g, 9) << "\n";
        write_manifest(dir, "calibrate-arrivals", {{"device", device}, {"state", state}, {"rts", !no_rts}}, {cal_seed},
                       {{"gaps", "gaps.csv"}, {"count", gaps.size()}});
      }
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.code()) << "): " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
