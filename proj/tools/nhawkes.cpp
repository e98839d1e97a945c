#include "nhawkes/error.hpp"
#include "nhawkes/event_stream.hpp"
#include "nhawkes/first_order.hpp"
#include "nhawkes/ingest.hpp"
#include "nhawkes/io_util.hpp"
#include "nhawkes/metrics.hpp"
#include "nhawkes/presets.hpp"
#include "nhawkes/simulator.hpp"
#include "nhawkes/solver.hpp"
#include "nhawkes/stats.hpp"
#include "nhawkes/wiener_hopf.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

using namespace nhawkes;
using json = nlohmann::json;

namespace {

// ---------------------------------------------------------------- files

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const std::string& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ArgumentError("'" + path + "' is not valid JSON: " + e.what());
  }
}

void write_file(const std::string& path, const std::string& text) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot write '" + path + "'");
  out << text;
}

void write_json(const std::string& path, const json& j) { write_file(path, j.dump(2) + "\n"); }

json provenance_json(const Provenance& p) { return {{"seed", p.seed}, {"config_hash", p.config_hash}}; }

// Provenance of one invocation: options as given, with input files replaced
// by a hash of their contents. Output paths and --jobs do not enter the hash.
const std::set<std::string> kInputOptions = {"--spec",  "--stats",  "--events", "--trades",     "--model",
                                             "--wh",    "--truth",  "--config", "--grid",       "--stat-grids",
                                             "--edges", "--volumes"};
const std::set<std::string> kIgnoredOptions = {"--out",     "--jobs",      "--table",     "--curves",
                                               "--profile", "--nodes-csv", "--loss-out",  "--se-out",
                                               "--out-dir", "--spec-out",  "--volumes-out", "--diagnostics", "--csv"};

Provenance provenance(const CLI::App& cmd, std::uint64_t seed) {
  json cfg = {{"command", cmd.get_name()}};
  for (const CLI::Option* opt : cmd.get_options()) {
    if (opt->count() == 0) continue;
    const std::string name = opt->get_name();
    if (kIgnoredOptions.count(name)) continue;
    json values = json::array();
    for (const auto& r : opt->results()) 
      values.push_back(kInputOptions.count(name) && std::filesystem::is_regular_file(r) ? hash_hex(read_file(r)) : r);
    cfg[name] = values;
  }
  return {seed, hash_hex(cfg.dump())};
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  for (auto part : split(text, ','))
    if (!part.empty()) out.emplace_back(part);
  return out;
}

// ---------------------------------------------------------------- shared loaders

KernelSpec load_spec(const std::string& spec_path, const std::string& preset_name) {
  if (!spec_path.empty() && !preset_name.empty()) throw ArgumentError("give either --spec or --preset, not both");
  if (!preset_name.empty()) return preset(preset_name).spec;
  if (spec_path.empty()) throw ArgumentError("a kernel spec is required (--spec or --preset)");
  return kernel_spec_from_json(read_json(spec_path));
}

EventStream load_events(const std::string& path) {
  std::istringstream in(read_file(path));
  return read_events_csv(in);
}

double simulation_horizon(const KernelSpec& spec, std::size_t events) {
  const auto rates = rates_from_baseline(kernel_l1_norm_exact(spec, INFINITY), spec.baseline());
  double total = 0.0;
  for (double r : rates) total += r;
  if (!(total > 0.0)) throw ArgumentError("the spec has a zero event rate");
  return 20.0 * static_cast<double>(events) / total + 100.0;
}

std::string csv_header(const std::string& format, const Provenance& prov) {
  std::ostringstream out;
  write_comment(out, "format", format);
  write_provenance(out, prov);
  return out.str();
}

// ---------------------------------------------------------------- model files

struct FittedModel {
  std::vector<RowModel> rows;
  SecondOrderStats stats;
};

json stats_to_json(const SecondOrderStats& s) {
  std::ostringstream csv;
  write_stats_csv(csv, s, std::nullopt);
  return {{"sidecar", stats_sidecar(s, std::nullopt)}, {"csv", csv.str()}};
}

SecondOrderStats stats_from_json(const json& j) {
  std::istringstream csv(j.at("csv").get<std::string>());
  return read_stats(csv, j.at("sidecar"));
}

json model_to_json(const std::vector<RowModel>& rows, const SecondOrderStats& stats, const Provenance& prov) {
  const auto quad = solver_quadrature(stats, rows.front().config.quadrature);
  const auto norms = fitted_norms(rows, stats, quad);
  const auto norms_abs = fitted_norms(rows, stats, quad, true);
  json r = json::array();
  for (const auto& m : rows) r.push_back(to_json(m));
  const auto matrix = [](const NormMatrix& m) {
    json out = json::array();
    for (std::size_t i = 0; i < m.dim; ++i) {
      json row = json::array();
      for (std::size_t j = 0; j < m.dim; ++j) row.push_back(m(i, j));
      out.push_back(row);
    }
    return out;
  };
  return {{"format", "nhawkes-model-v1"},
          {"provenance", provenance_json(prov)},
          {"dimension", stats.dim},
          {"marks", stats.marks},
          {"horizon", stats.grid.T},
          {"norms", matrix(norms)},
          {"norms_abs", matrix(norms_abs)},
          {"branching_ratio", branching_ratio(norms)},
          {"rows", r},
          {"stats", stats_to_json(stats)}};
}

FittedModel load_model(const std::string& path) {
  const json j = read_json(path);
  if (j.value("format", "") != "nhawkes-model-v1") throw ArgumentError("'" + path + "' is not a model file");
  FittedModel m;
  for (const auto& r : j.at("rows")) m.rows.push_back(row_model_from_json(r));
  m.stats = stats_from_json(j.at("stats"));
  return m;
}

json wh_to_json(const WhSolution& sol, const Provenance& prov) {
  return {{"format", "nhawkes-wh-v1"}, {"provenance", provenance_json(prov)}, {"dimension", sol.dim},
          {"marks", sol.marks},         {"times", sol.times},                  {"delta", sol.delta},
          {"rcond", sol.rcond},         {"values", sol.values},                {"stats", stats_to_json(sol.stats)}};
}

WhSolution load_wh(const std::string& path) {
  const json j = read_json(path);
  if (j.value("format", "") != "nhawkes-wh-v1") throw ArgumentError("'" + path + "' is not a Wiener-Hopf file");
  WhSolution s;
  s.dim = j.at("dimension").get<std::size_t>();
  s.marks = j.at("marks").get<int>();
  s.times = j.at("times").get<std::vector<double>>();
  s.delta = j.at("delta").get<double>();
  s.rcond = j.at("rcond").get<double>();
  s.values = j.at("values").get<std::vector<double>>();
  s.stats = stats_from_json(j.at("stats"));
  return s;
}

std::string kernel_table_csv(const KernelFunction& f, std::size_t D, int M, double t_first, double T, std::size_t K,
                             const Provenance& prov, const std::optional<KernelFunction>& truth = std::nullopt) {
  std::ostringstream out;
  out << csv_header("nhawkes-kernel-table-v1", prov);
  out << (truth ? "i,j,t,mark,estimate,truth\n" : "i,j,t,mark,value\n");
  for (std::size_t i = 0; i < D; ++i)
    for (std::size_t j = 0; j < D; ++j)
      for (int m = 1; m <= M; ++m)
        for (std::size_t k = 0; k <= K; ++k) {
          const double t = k == 0 ? t_first : T * static_cast<double>(k) / static_cast<double>(K);
          out << i + 1 << ',' << j + 1 << ',' << format_double(t) << ',' << m << ',' << format_double(f(i, j, t, m));
          if (truth) out << ',' << format_double((*truth)(i, j, t, m));
          out << '\n';
        }
  return out.str();
}

// ---------------------------------------------------------------- training flags

struct TrainFlags {
  std::string config;
  std::optional<int> width, cells, quadrature, batch, train_size, validation_size, epochs;
  std::optional<double> lr, temporal_eps, continuity_weight, short_fraction, short_threshold;
  std::optional<std::string> optimizer;
  bool no_magnitude = false;

  void add(CLI::App* cmd) {
    cmd->add_option("--config", config, "training configuration JSON (missing keys take defaults)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--width", width, "neurons per layer");
    cmd->add_option("--cells", cells, "number of DGM cells");
    cmd->add_option("--quadrature", quadrature, "quadrature points Q");
    cmd->add_option("--batch", batch, "mini-batch size");
    cmd->add_option("--train-size", train_size, "training points per epoch");
    cmd->add_option("--validation-size", validation_size, "validation points per epoch");
    cmd->add_option("--epochs", epochs, "number of epochs");
    cmd->add_option("--lr", lr, "initial learning rate");
    cmd->add_option("--optimizer", optimizer, "sgd or adam")->check(CLI::IsMember({"sgd", "adam"}));
    cmd->add_option("--temporal-eps", temporal_eps, "temporal weight strength");
    cmd->add_option("--continuity-weight", continuity_weight, "weight of the u(T, x) = 0 penalty");
    cmd->add_option("--short-fraction", short_fraction, "share of training points below the short-time threshold");
    cmd->add_option("--short-threshold", short_threshold, "short-time threshold in seconds (default: grid h)");
    cmd->add_flag("--no-magnitude-weights", no_magnitude, "disable the per-kernel magnitude weights");
  }

  TrainConfig build(std::uint64_t seed) const {
    json j = config.empty() ? json::object() : read_json(config);
    if (width) j["width"] = *width;
    if (cells) j["cells"] = *cells;
    if (quadrature) j["quadrature"] = *quadrature;
    if (batch) j["batch"] = *batch;
    if (train_size) j["train_size"] = *train_size;
    if (validation_size) j["validation_size"] = *validation_size;
    if (epochs) j["epochs"] = *epochs;
    if (lr) j["lr0"] = *lr;
    if (optimizer) j["optimizer"] = *optimizer;
    if (temporal_eps) j["temporal_eps"] = *temporal_eps;
    if (continuity_weight) j["continuity_weight"] = *continuity_weight;
    if (short_fraction) j["short_fraction"] = *short_fraction;
    if (short_threshold) j["short_threshold"] = *short_threshold;
    if (no_magnitude) j["magnitude_weighting"] = false;
    j["seed"] = seed;
    return train_config_from_json(j);
  }
};

struct GridFlags {
  double h = 0.1;
  int n_lin = 10;
  int n_log = 50;
  double T = 2.0;

  void add(CLI::App* cmd) {
    cmd->add_option("--h", h, "end of the linear part of the grid (s)")->capture_default_str();
    cmd->add_option("--n-lin", n_lin, "linear grid points")->capture_default_str();
    cmd->add_option("--n-log", n_log, "logarithmic grid points (0 with h = T: linear grid)")->capture_default_str();
    cmd->add_option("--T", T, "truncation horizon (s)")->capture_default_str();
  }
  StatGrid build() const { return build_grid(h, n_lin, n_log, T); }
};

template <class F>
void parallel_for(std::size_t n, int jobs, F&& body) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t k; (k = next.fetch_add(1)) < n;) try {
        body(k);
      } catch (...) {
        errors[k] = std::current_exception();
      }
  };
  std::vector<std::thread> pool;
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), n);
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------- commands

struct Cli {
  CLI::App app{"Non-parametric estimation of marked multivariate Hawkes kernels", "nhawkes"};
  std::function<void()> action;

  // shared values
  std::string spec, preset_name, out, stats_path, events_path, model, wh, truth, truth_preset;
  std::uint64_t seed = 0;
  int jobs = 1;

  void simulate_cmd() {
    auto* cmd = app.add_subcommand("simulate", "simulate a marked Hawkes process (Ogata thinning)");
    auto n_events = std::make_shared<std::size_t>(0);
    auto horizon = std::make_shared<double>(0.0);
    auto max_events = std::make_shared<std::size_t>(100000000);
    auto diag = std::make_shared<std::string>();
    cmd->add_option("--spec", spec, "kernel spec JSON")->check(CLI::ExistingFile);
    cmd->add_option("--preset", preset_name, "built-in spec")->check(CLI::IsMember(preset_names()));
    cmd->add_option("--events", *n_events, "stop after this many events");
    cmd->add_option("--horizon", *horizon, "observation horizon (s)");
    cmd->add_option("--max-events", *max_events, "abort beyond this many events")->capture_default_str();
    cmd->add_option("--seed", seed, "random seed")->capture_default_str();
    cmd->add_option("--out", out, "event CSV")->required();
    cmd->add_option("--diagnostics", *diag, "thinning diagnostics JSON");
    cmd->callback([=, this] {
      action = [=, this] {
        const KernelSpec s = load_spec(spec, preset_name);
        if (*n_events == 0 && *horizon <= 0.0) throw ArgumentError("give --events or --horizon");
        SimConfig cfg{s, *horizon > 0.0 ? *horizon : simulation_horizon(s, *n_events), seed};
        cfg.stop_after_events = *n_events;
        cfg.max_events = *max_events;
        const auto prov = provenance(*cmd, seed);
        const SimResult r = simulate_with_diagnostics(cfg);
        std::ostringstream csv;
        write_events_csv(csv, r.stream, prov);
        write_file(out, csv.str());
        if (!diag->empty())
          write_json(*diag, {{"provenance", provenance_json(prov)},
                             {"events", r.stream.size()},
                             {"horizon", r.stream.horizon()},
                             {"candidates", r.diagnostics.candidates},
                             {"accepted", r.diagnostics.accepted},
                             {"clamp_fraction", r.diagnostics.clamp_fraction()},
                             {"pruned_mass", r.diagnostics.pruned_mass}});
      };
    });
  }

  void preset_cmd() {
    auto* cmd = app.add_subcommand("preset", "write a built-in kernel spec");
    auto name = std::make_shared<std::string>();
    auto list = std::make_shared<bool>(false);
    cmd->add_option("--name", *name, "preset name")->check(CLI::IsMember(preset_names()));
    cmd->add_flag("--list", *list, "print the presets and their statistics grids");
    cmd->add_option("--out", out, "spec JSON");
    cmd->callback([=, this] {
      action = [=, this] {
        if (*list) {
          json all = json::array();
          for (const auto& n : preset_names()) {
            const auto p = preset(n);
            all.push_back({{"name", p.name},
                           {"description", p.description},
                           {"grid", {{"h", p.grid.h}, {"n_lin", p.grid.n_lin}, {"n_log", p.grid.n_log}, {"T", p.grid.T}}}});
          }
          std::cout << all.dump(2) << "\n";
          return;
        }
        if (name->empty() || out.empty()) throw ArgumentError("preset needs --name and --out (or --list)");
        write_json(out, to_json(preset(*name).spec));
      };
    });
  }

  void stats_cmd() {
    auto* cmd = app.add_subcommand("stats", "estimate rates, mark pmfs and second-order statistics");
    auto grid = std::make_shared<GridFlags>();
    auto blocks = std::make_shared<int>(0);
    auto resamples = std::make_shared<int>(100);
    auto se_out = std::make_shared<std::string>();
    cmd->add_option("--events", events_path, "event CSV")->required()->check(CLI::ExistingFile);
    grid->add(cmd);
    cmd->add_option("--bootstrap-blocks", *blocks, "block bootstrap blocks (0: no bootstrap)");
    cmd->add_option("--bootstrap-resamples", *resamples, "bootstrap resamples")->capture_default_str();
    cmd->add_option("--se-out", *se_out, "bootstrap standard errors CSV");
    cmd->add_option("--seed", seed, "bootstrap seed")->capture_default_str();
    cmd->add_option("--jobs", jobs, "worker threads")->capture_default_str();
    cmd->add_option("--out", out, "statistics CSV (a .json sidecar is written next to it)")->required();
    cmd->callback([=, this] {
      action = [=, this] {
        const auto prov = provenance(*cmd, seed);
        const EventStream s = load_events(events_path);
        const StatGrid g = grid->build();
        const auto st = estimate_second_order(s, g, jobs);
        for (const auto& [j, m] : st.flagged())
          std::cerr << json{{"warning", "no conditioning events"}, {"component", j + 1}, {"mark", m}}.dump() << "\n";
        save_stats(out, st, prov);
        if (*blocks > 0) {
          if (se_out->empty()) throw ArgumentError("--bootstrap-blocks needs --se-out");
          const auto se = bootstrap_standard_error(s, g, *blocks, *resamples, seed);
          std::ostringstream csv;
          csv << csv_header("nhawkes-stats-se-v1", prov) << "i,j,bin_lo,bin_hi,mark,se\n";
          for (std::size_t i = 0; i < st.dim; ++i)
            for (std::size_t j = 0; j < st.dim; ++j)
              for (int m = 1; m <= st.marks; ++m)
                for (std::size_t b = 0; b < g.bins(); ++b)
                  csv << i + 1 << ',' << j + 1 << ',' << format_double(g.lo(b)) << ',' << format_double(g.hi(b)) << ','
                      << m << ',' << format_double(se[st.index(i, j, m, b)]) << '\n';
          write_file(*se_out, csv.str());
        }
      };
    });
  }

  void fit_neural_cmd() {
    auto* cmd = app.add_subcommand("fit-neural", "fit the kernel with the neural solver");
    auto train = std::make_shared<TrainFlags>();
    auto table = std::make_shared<std::string>();
    auto spec_out = std::make_shared<std::string>();
    auto loss_out = std::make_shared<std::string>();
    auto points = std::make_shared<std::size_t>(1000);
    cmd->add_option("--stats", stats_path, "statistics CSV (with .json sidecar)")->required()->check(CLI::ExistingFile);
    train->add(cmd);
    cmd->add_option("--seed", seed, "master seed")->capture_default_str();
    cmd->add_option("--jobs", jobs, "rows trained in parallel")->capture_default_str();
    cmd->add_option("--out", out, "model JSON")->required();
    cmd->add_option("--table", *table, "kernel values on a uniform grid (CSV)");
    cmd->add_option("--table-points", *points, "grid intervals K of --table and --spec-out")->capture_default_str();
    cmd->add_option("--spec-out", *spec_out, "tabulated kernel spec JSON (simulatable)");
    cmd->add_option("--loss-out", *loss_out, "validation loss per epoch (CSV)");
    cmd->callback([=, this] {
      action = [=, this] {
        const auto prov = provenance(*cmd, seed);
        const TrainConfig cfg = train->build(seed);
        const auto st = load_stats(stats_path);
        const auto rows = fit(st, cfg, jobs);
        write_json(out, model_to_json(rows, st, prov));
        if (!table->empty())
          write_file(*table, kernel_table_csv(model_function(rows), st.dim, st.marks, st.grid.t_min, st.grid.T, *points,
                                              prov));
        if (!spec_out->empty()) {
          std::vector<double> nodes;
          for (std::size_t k = 0; k <= *points; ++k)
            nodes.push_back(st.grid.t_min * std::pow(st.grid.T / st.grid.t_min, static_cast<double>(k) / static_cast<double>(*points)));
          nodes.back() = st.grid.T;
          write_json(*spec_out, to_json(tabulate(rows, st, nodes)));
        }
        if (!loss_out->empty()) {
          std::ostringstream csv;
          csv << csv_header("nhawkes-loss-v1", prov) << "epoch,row,loss\n";
          for (std::size_t e = 0; e < rows.front().loss_history.size(); ++e)
            for (const auto& r : rows)
              csv << e + 1 << ',' << r.row + 1 << ',' << format_double(r.loss_history[e]) << '\n';
          write_file(*loss_out, csv.str());
        }
      };
    });
  }

  void fit_wh_cmd() {
    auto* cmd = app.add_subcommand("fit-wh", "fit the kernel with the Wiener-Hopf baseline");
    auto Q = std::make_shared<std::size_t>(200);
    auto table = std::make_shared<std::string>();
    auto nodes_csv = std::make_shared<std::string>();
    auto points = std::make_shared<std::size_t>(1000);
    cmd->add_option("--stats", stats_path, "statistics CSV (with .json sidecar)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--quadrature", *Q, "uniform quadrature points Q")->capture_default_str();
    cmd->add_option("--out", out, "solution JSON")->required();
    cmd->add_option("--nodes-csv", *nodes_csv, "nodal values (CSV)");
    cmd->add_option("--table", *table, "reconstructed kernel on a uniform grid (CSV)");
    cmd->add_option("--table-points", *points, "grid intervals K of --table")->capture_default_str();
    cmd->callback([=, this] {
      action = [=, this] {
        const auto prov = provenance(*cmd, 0);
        const auto sol = wh_solve(load_stats(stats_path), *Q);
        write_json(out, wh_to_json(sol, prov));
        if (!nodes_csv->empty()) {
          std::ostringstream csv;
          csv << csv_header("nhawkes-wh-nodes-v1", prov) << "i,j,t,mark,value\n";
          for (std::size_t i = 0; i < sol.dim; ++i)
            for (std::size_t k = 0; k < sol.dim; ++k)
              for (int m = 1; m <= sol.marks; ++m)
                for (std::size_t q = 0; q < sol.nodes(); ++q)
                  csv << i + 1 << ',' << k + 1 << ',' << format_double(sol.times[q]) << ',' << m << ','
                      << format_double(sol.value(i, k, m, q)) << '\n';
          write_file(*nodes_csv, csv.str());
        }
        if (!table->empty())
          write_file(*table, kernel_table_csv(wh_function(sol), sol.dim, sol.marks, 0.0, sol.stats.grid.T, *points, prov));
      };
    });
  }

  void eval_cmd() {
    auto* cmd = app.add_subcommand("eval", "error of a fitted kernel against a known spec");
    auto K = std::make_shared<std::size_t>(1000);
    auto T = std::make_shared<double>(0.0);
    auto curves = std::make_shared<std::string>();
    cmd->add_option("--model", model, "model JSON from fit-neural")->check(CLI::ExistingFile);
    cmd->add_option("--wh", wh, "solution JSON from fit-wh")->check(CLI::ExistingFile);
    cmd->add_option("--truth", truth, "true kernel spec JSON")->check(CLI::ExistingFile);
    cmd->add_option("--truth-preset", truth_preset, "true kernel as a built-in spec")->check(CLI::IsMember(preset_names()));
    cmd->add_option("--K", *K, "grid intervals")->capture_default_str();
    cmd->add_option("--T", *T, "grid end (default: the fit's horizon)");
    cmd->add_option("--out", out, "error report JSON")->required();
    cmd->add_option("--curves", *curves, "estimate and truth on the grid (CSV)");
    cmd->callback([=, this] {
      action = [=, this] {
        if (model.empty() == wh.empty()) throw ArgumentError("give exactly one of --model and --wh");
        const auto prov = provenance(*cmd, 0);
        const KernelSpec s = load_spec(truth, truth_preset);
        KernelFunction f;
        double horizon = 0.0, t_first = 0.0;
        if (!model.empty()) {
          const auto m = load_model(model);
          f = model_function(m.rows);
          horizon = m.stats.grid.T;
          t_first = m.stats.grid.t_min;
        } else {
          const auto sol = load_wh(wh);
          f = wh_function(sol);
          horizon = sol.stats.grid.T;
        }
        const double T_eval = *T > 0.0 ? *T : horizon;
        json report = to_json(error_report(f, s, *K, T_eval, t_first));
        report["provenance"] = provenance_json(prov);
        report["T"] = T_eval;
        write_json(out, report);
        if (!curves->empty())
          write_file(*curves, kernel_table_csv(f, s.dimension(), s.marks(), t_first, T_eval, *K, prov, spec_function(s)));
      };
    });
  }

  void metrics_cmd() {
    auto* cmd = app.add_subcommand("metrics", "causality ratios, baseline recovery and goodness of fit");
    auto volumes = std::make_shared<std::string>();
    auto gof = std::make_shared<std::size_t>(0);
    cmd->add_option("--model", model, "model JSON from fit-neural")->check(CLI::ExistingFile);
    cmd->add_option("--spec", spec, "use the norms of a known spec instead")->check(CLI::ExistingFile);
    cmd->add_option("--preset", preset_name, "use the norms of a built-in spec")->check(CLI::IsMember(preset_names()));
    cmd->add_option("--volumes", *volumes, "JSON array of traded volumes per component (default: equal)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--truth", truth, "true spec JSON: report baseline recovery")->check(CLI::ExistingFile);
    cmd->add_option("--truth-preset", truth_preset, "true spec as a built-in")->check(CLI::IsMember(preset_names()));
    cmd->add_option("--gof-events", *gof, "resimulate the fitted model with this many events");
    cmd->add_option("--seed", seed, "goodness-of-fit seed")->capture_default_str();
    auto csv_out = std::make_shared<std::string>();
    cmd->add_option("--out", out, "report JSON")->required();
    cmd->add_option("--csv", *csv_out, "plot-ready series (series,x,y): norms, spillover, leader, receiver, participation");
    cmd->callback([=, this] {
      action = [=, this] {
        const auto prov = provenance(*cmd, seed);
        NormMatrix norms;
        std::vector<double> rates;
        std::optional<FittedModel> fitted;
        if (!model.empty()) {
          if (!spec.empty() || !preset_name.empty()) throw ArgumentError("give either --model or a spec");
          fitted = load_model(model);
          const auto quad = solver_quadrature(fitted->stats, fitted->rows.front().config.quadrature);
          norms = fitted_norms(fitted->rows, fitted->stats, quad);
          rates = fitted->stats.rates;
        } else {
          const KernelSpec s = load_spec(spec, preset_name);
          norms = kernel_l1_norm_exact(s, INFINITY);
          rates = rates_from_baseline(norms, s.baseline());
        }
        std::vector<double> v(norms.dim, 1.0);
        if (!volumes->empty()) v = read_json(*volumes).get<std::vector<double>>();
        const auto causal = causality_report(norms, rates, v);
        json report = to_json(causal);
        if (!csv_out->empty()) {
          std::ostringstream csv;
          csv << csv_header("nhawkes-causality-v1", prov) << "series,x,y\n";
          const auto pair = [](std::size_t i, std::size_t j) { return std::to_string(i + 1) + "-" + std::to_string(j + 1); };
          for (std::size_t i = 0; i < norms.dim; ++i)
            for (std::size_t j = 0; j < norms.dim; ++j) {
              csv << "norm," << pair(i, j) << ',' << format_double(norms(i, j)) << '\n';
              csv << "spillover," << pair(i, j) << ',' << format_double(causal.spillover(i, j)) << '\n';
            }
          for (std::size_t i = 0; i < norms.dim; ++i) {
            csv << "leader," << i + 1 << ',' << format_double(causal.leader[i]) << '\n';
            csv << "receiver," << i + 1 << ',' << format_double(causal.receiver[i]) << '\n';
            csv << "participation," << i + 1 << ',' << format_double(causal.participation[i]) << '\n';
          }
          write_file(*csv_out, csv.str());
        }
        report["rates"] = rates;
        report["provenance"] = provenance_json(prov);
        if (!truth.empty() || !truth_preset.empty()) {
          const KernelSpec t = load_spec(truth, truth_preset);
          if (t.dimension() != norms.dim) throw ArgumentError("true spec dimension differs from the fit");
          report["true_baseline"] = t.baseline();
          if (report["baseline"].is_null()) {
            std::cerr << json{{"warning", "fitted branching ratio >= 1, no baseline"},
                              {"branching_ratio", branching_ratio(norms)}}.dump()
                      << "\n";
          } else {
            json rel = json::array();
            const auto mu_hat = report["baseline"].get<std::vector<double>>();
            for (std::size_t i = 0; i < norms.dim; ++i)
              rel.push_back(std::abs(mu_hat[i] - t.baseline()[i]) / t.baseline()[i]);
            report["baseline_relative_error"] = rel;
          }
        }
        if (*gof > 0) {
          if (!fitted) throw ArgumentError("--gof-events needs --model");
          const auto g = goodness_of_fit(fitted->rows, fitted->stats, *gof, seed);
          report["goodness_of_fit"] = {{"fitted_baseline", g.fitted_baseline},
                                       {"true_rates", g.true_rates},
                                       {"simulated_rates", g.simulated_rates},
                                       {"rate_mean_abs_relative_error", g.rate_mare},
                                       {"g_mean_abs_diff", g.g_mean_abs_diff},
                                       {"g_mean_abs", g.g_mean_abs},
                                       {"refit_mean_abs_diff", g.refit_mean_abs_diff},
                                       {"branching_ratio", g.branching_ratio},
                                       {"clamp_fraction", g.clamp_fraction},
                                       {"events", g.events}};
        }
        write_json(out, report);
      };
    });
  }

  void ingest_cmd() {
    auto* cmd = app.add_subcommand("ingest", "turn a trade CSV into an event stream");
    auto trades = std::make_shared<std::string>();
    auto pairs = std::make_shared<std::string>();
    auto edges = std::make_shared<std::string>();
    auto window = std::make_shared<std::string>();
    auto volumes_out = std::make_shared<std::string>();
    auto profile = std::make_shared<std::string>();
    auto bin_minutes = std::make_shared<double>(5.0);
    cmd->add_option("--trades", *trades, "CSV timestamp_us,pair,volume_usd")->required()->check(CLI::ExistingFile);
    cmd->add_option("--pairs", *pairs, "comma-separated pairs, one component each (default: all, sorted)");
    cmd->add_option("--edges", *edges, "JSON array of volume bin edges (default: 100 to 100000 USD, 15 marks)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--window", *window, "daily UTC window HH:MM-HH:MM");
    cmd->add_option("--out", out, "event CSV")->required();
    cmd->add_option("--volumes-out", *volumes_out, "traded volume per pair (JSON)");
    cmd->add_option("--profile", *profile, "intraday rate profile (CSV)");
    cmd->add_option("--bin-minutes", *bin_minutes, "profile bin length")->capture_default_str();
    cmd->callback([=, this] {
      action = [=, this] {
        const auto prov = provenance(*cmd, 0);
        std::istringstream in(read_file(*trades));
        const auto records = read_trades_csv(in);
        const VolumeBinning binning =
            edges->empty() ? default_volume_binning() : VolumeBinning(read_json(*edges).get<std::vector<double>>());
        const auto ms = build_market_stream(records, split_list(*pairs), binning);
        if (!profile->empty()) {
          const auto p = intraday_profile(ms.stream, *bin_minutes);
          for (auto d : p.skipped_days) std::cerr << json{{"warning", "day without events skipped"}, {"day", d}}.dump() << "\n";
          std::ostringstream csv;
          csv << csv_header("nhawkes-intraday-v1", prov) << "bin,start_minute,mean_rate,ci_low,ci_high\n";
          for (std::size_t b = 0; b < p.mean_rate.size(); ++b)
            csv << b << ',' << format_double(static_cast<double>(b) * p.bin_minutes) << ',' << format_double(p.mean_rate[b])
                << ',' << format_double(p.ci_low[b]) << ',' << format_double(p.ci_high[b]) << '\n';
          write_file(*profile, csv.str());
        }
        EventStream stream = ms.stream;
        if (!window->empty()) {
          const auto parse_clock = [](std::string_view s) {
            const auto hm = split(s, ':');
            if (hm.size() != 2) throw ArgumentError("window times must be HH:MM");
            return 3600.0 * static_cast<double>(parse_int(hm[0])) + 60.0 * static_cast<double>(parse_int(hm[1]));
          };
          const auto ends = split(*window, '-');
          if (ends.size() != 2) throw ArgumentError("--window must be HH:MM-HH:MM");
          stream = window_filter(stream, parse_clock(ends[0]), parse_clock(ends[1]));
        }
        std::ostringstream csv;
        write_events_csv(csv, stream, prov);
        write_file(out, csv.str());
        if (!volumes_out->empty())
          write_json(*volumes_out, {{"provenance", provenance_json(prov)},
                                    {"pairs", ms.pairs},
                                    {"volumes", ms.volumes},
                                    {"origin_us", ms.origin_us}});
      };
    });
  }

  void synth_trades_cmd() {
    auto* cmd = app.add_subcommand("synth-trades", "synthetic trade CSV from a simulated process");
    auto horizon = std::make_shared<double>(86400.0);
    auto pairs = std::make_shared<std::string>();
    auto origin = std::make_shared<std::int64_t>(1699920000000000LL);
    auto log_mean = std::make_shared<double>(7.0);
    auto log_sd = std::make_shared<double>(1.5);
    cmd->add_option("--spec", spec, "kernel spec JSON")->check(CLI::ExistingFile);
    cmd->add_option("--preset", preset_name, "built-in spec")->check(CLI::IsMember(preset_names()));
    cmd->add_option("--horizon", *horizon, "seconds of trading")->capture_default_str();
    cmd->add_option("--pairs", *pairs, "comma-separated pair names (default P1, P2, ...)");
    cmd->add_option("--origin-us", *origin, "timestamp of t = 0 (a UTC midnight)")->capture_default_str();
    cmd->add_option("--log-mean", *log_mean, "mean of log volume")->capture_default_str();
    cmd->add_option("--log-sd", *log_sd, "sd of log volume")->capture_default_str();
    cmd->add_option("--seed", seed, "random seed")->capture_default_str();
    cmd->add_option("--out", out, "trade CSV")->required();
    cmd->callback([=, this] {
      action = [=, this] {
        const KernelSpec s = load_spec(spec, preset_name);
        auto names = split_list(*pairs);
        if (names.empty())
          for (std::size_t k = 0; k < s.dimension(); ++k) names.push_back("P" + std::to_string(k + 1));
        std::ostringstream csv;
        write_trades_csv(csv, synthetic_trades(s, *horizon, seed, names, *origin, *log_mean, *log_sd));
        write_file(out, csv.str());
      };
    });
  }

  void sweep_cmd() {
    auto* cmd = app.add_subcommand("sweep", "refit over a hyperparameter list or a list of statistics grids");
    auto train = std::make_shared<TrainFlags>();
    auto grid = std::make_shared<std::string>();
    auto stat_grids = std::make_shared<std::string>();
    auto out_dir = std::make_shared<std::string>();
    auto wh_q = std::make_shared<std::size_t>(0);
    auto K = std::make_shared<std::size_t>(1000);
    cmd->add_option("--stats", stats_path, "statistics CSV (hyperparameter sweep)")->check(CLI::ExistingFile);
    cmd->add_option("--grid", *grid, "JSON object {key: [values]}; each value is one run, the rest unchanged")
        ->check(CLI::ExistingFile);
    cmd->add_option("--events", events_path, "event CSV (statistics-grid sweep)")->check(CLI::ExistingFile);
    cmd->add_option("--stat-grids", *stat_grids, "JSON array of {h, n_lin, n_log, T}")->check(CLI::ExistingFile);
    cmd->add_option("--wh-quadrature", *wh_q, "also fit Wiener-Hopf with Q points in the grid sweep");
    train->add(cmd);
    cmd->add_option("--truth", truth, "true spec JSON for error reports")->check(CLI::ExistingFile);
    cmd->add_option("--truth-preset", truth_preset, "true spec as a built-in")->check(CLI::IsMember(preset_names()));
    cmd->add_option("--K", *K, "error grid intervals")->capture_default_str();
    cmd->add_option("--seed", seed, "master seed")->capture_default_str();
    cmd->add_option("--jobs", jobs, "runs in parallel")->capture_default_str();
    cmd->add_option("--out-dir", *out_dir, "output directory")->required();
    cmd->callback([=, this] {
      action = [=, this] {
        const auto prov = provenance(*cmd, seed);
        const bool has_truth = !truth.empty() || !truth_preset.empty();
        std::optional<KernelSpec> t;
        if (has_truth) t = load_spec(truth, truth_preset);
        const TrainConfig base = train->build(seed);
        std::filesystem::create_directories(*out_dir);
        json summary = json::array();

        if (!stats_path.empty()) {
          if (grid->empty()) throw ArgumentError("a hyperparameter sweep needs --grid");
          const auto st = load_stats(stats_path);
          std::vector<std::pair<std::string, json>> runs;
          const json sweep = read_json(*grid);
          for (const auto& [key, values] : sweep.items()) {
            if (!values.is_array()) throw ArgumentError("sweep values for '" + key + "' must be an array");
            for (const auto& v : values) runs.emplace_back(key, v);
          }
          std::vector<TrainConfig> configs;
          for (const auto& [key, v] : runs) {
            json j = to_json(base);
            if (!j.contains(key)) throw ArgumentError("unknown training parameter '" + key + "'");
            j[key] = v;
            configs.push_back(train_config_from_json(j));
          }
          std::vector<json> results(runs.size());
          parallel_for(runs.size(), jobs, [&](std::size_t k) {
            const auto rows = fit(st, configs[k], 1);
            write_json(*out_dir + "/run_" + std::to_string(k + 1) + ".json", model_to_json(rows, st, prov));
            json r = {{"run", k + 1}, {"parameter", runs[k].first}, {"value", runs[k].second}};
            double loss = 0.0;
            for (const auto& row : rows) loss += row.loss_history.empty() ? 0.0 : row.loss_history.back();
            r["final_loss"] = loss;
            if (t) r["errors"] = to_json(error_report(model_function(rows), *t, *K, st.grid.T, st.grid.t_min));
            results[k] = r;
          });
          for (auto& r : results) summary.push_back(r);
        } else {
          if (events_path.empty() || stat_grids->empty())
            throw ArgumentError("sweep needs --stats with --grid, or --events with --stat-grids");
          const EventStream s = load_events(events_path);
          const json grids = read_json(*stat_grids);
          std::vector<json> results(grids.size());
          parallel_for(grids.size(), jobs, [&](std::size_t k) {
            const auto& g = grids.at(k);
            const StatGrid sg = build_grid(g.at("h").get<double>(), g.at("n_lin").get<int>(), g.at("n_log").get<int>(),
                                           g.at("T").get<double>());
            const auto st = estimate_second_order(s, sg);
            const auto rows = fit(st, base, 1);
            write_json(*out_dir + "/grid_" + std::to_string(k + 1) + "_neural.json", model_to_json(rows, st, prov));
            json r = {{"run", k + 1}, {"grid", g}};
            if (t) r["neural_errors"] = to_json(error_report(model_function(rows), *t, *K, sg.T, sg.t_min));
            if (*wh_q > 0) {
              const auto sol = wh_solve(st, *wh_q);
              write_json(*out_dir + "/grid_" + std::to_string(k + 1) + "_wh.json", wh_to_json(sol, prov));
              if (t) r["wh_errors"] = to_json(error_report(wh_function(sol), *t, *K, sg.T, 0.0));
            }
            results[k] = r;
          });
          for (auto& r : results) summary.push_back(r);
        }
        write_json(*out_dir + "/summary.json", {{"provenance", provenance_json(prov)}, {"runs", summary}});
      };
    });
  }

  void convergence_cmd() {
    auto* cmd = app.add_subcommand("convergence", "error decay with the number of events");
    auto train = std::make_shared<TrainFlags>();
    auto grid = std::make_shared<GridFlags>();
    auto events = std::make_shared<std::string>("10000,100000,1000000");
    auto seeds = std::make_shared<std::string>("1,2,3");
    auto K = std::make_shared<std::size_t>(1000);
    cmd->add_option("--spec", spec, "kernel spec JSON")->check(CLI::ExistingFile);
    cmd->add_option("--preset", preset_name, "built-in spec")->check(CLI::IsMember(preset_names()));
    cmd->add_option("--events", *events, "comma-separated sample sizes")->capture_default_str();
    cmd->add_option("--seeds", *seeds, "comma-separated seeds")->capture_default_str();
    grid->add(cmd);
    train->add(cmd);
    cmd->add_option("--K", *K, "error grid intervals")->capture_default_str();
    cmd->add_option("--jobs", jobs, "replicas in parallel")->capture_default_str();
    cmd->add_option("--out", out, "result JSON")->required();
    cmd->callback([=, this] {
      action = [=, this] {
        const auto prov = provenance(*cmd, 0);
        ConvergenceConfig c;
        for (const auto& e : split_list(*events)) c.events.push_back(static_cast<std::size_t>(parse_double(e)));
        for (const auto& s : split_list(*seeds)) c.seeds.push_back(static_cast<std::uint64_t>(parse_int(s)));
        c.h = grid->h;
        c.n_lin = grid->n_lin;
        c.n_log = grid->n_log;
        c.T = grid->T;
        c.train = train->build(0);
        c.K = *K;
        c.jobs = jobs;
        json r = to_json(convergence_study(load_spec(spec, preset_name), c));
        r["provenance"] = provenance_json(prov);
        write_json(out, r);
      };
    });
  }

  Cli() {
    app.require_subcommand(1);
    app.set_help_flag("--help", "print this help");
    app.set_help_all_flag("--help-all", "print help for every subcommand");
    simulate_cmd();
    preset_cmd();
    stats_cmd();
    fit_neural_cmd();
    fit_wh_cmd();
    eval_cmd();
    metrics_cmd();
    ingest_cmd();
    synth_trades_cmd();
    sweep_cmd();
    convergence_cmd();
  }
};

int fail(int code, const std::string& kind, const std::string& message, json extra = json::object()) {
  extra["error"] = kind;
  extra["message"] = message;
  std::cerr << extra.dump() << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  Cli cli;
  try {
    cli.app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return cli.app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return cli.app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(1, "argument", e.what());
  }
  try {
    if (cli.action) cli.action();
    return 0;
  } catch (const ArgumentError& e) {
    return fail(1, "argument", e.what());
  } catch (const DivergenceError& e) {
    return fail(2, "divergence", e.what(), {{"epoch", e.epoch()}});
  } catch (const LinearAlgebraError& e) {
    return fail(2, "linear_algebra", e.what(), {{"rcond", e.reciprocal_condition()}});
  } catch (const StationarityError& e) {
    return fail(2, "stationarity", e.what(), {{"branching_ratio", e.ratio()}});
  } catch (const NumericalError& e) {
    return fail(2, "numerical", e.what());
  } catch (const std::exception& e) {
    return fail(1, "argument", e.what());
  }
}
