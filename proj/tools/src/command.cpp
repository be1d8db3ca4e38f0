#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "cwnd/cli.hpp"
#include "cwnd/errors.hpp"

namespace cwnd::cli {

namespace {

namespace fs = std::filesystem;

struct Options {
  std::string model;
  std::string out;
  std::optional<int> c;
  std::vector<int> c_list;
  std::optional<int> n_max;
  std::optional<double> tolerance;
  std::optional<double> epsilon;
  std::optional<std::uint64_t> seed;
  std::optional<double> time;
  std::optional<double> warmup;
  std::optional<int> reps;
  std::optional<int> threads;
  std::optional<int> cap;
  std::optional<std::string> discipline;
  std::vector<double> target;
  std::string trace;
};

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("--model", o.model, "Model file (JSON)")->required();
  sub->add_option("--out", o.out, "Output directory (default: experiment.output_dir or .)");
  sub->add_option("--cap", o.cap, "Window cap, in units of c, applied to every route");
}

fs::path output_dir(const Options& o, const ExperimentConfig& e) {
  fs::path dir = o.out.empty() ? fs::path(e.output_dir) : fs::path(o.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(fmt::format("cannot create output directory '{}': {}", dir.string(), ec.message()));
  return dir;
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(fmt::format("cannot write '{}'", path.string()));
  return f;
}

struct Prepared {
  LoadedConfig cfg;
  Network net;
};

Prepared prepare(const Options& o) {
  LoadedConfig cfg = load_config(o.model);
  auto& e = cfg.experiment;
  if (!o.c_list.empty()) e.c_values = o.c_list;
  if (o.n_max) e.n_max = o.n_max;
  if (o.tolerance) e.tolerance = *o.tolerance;
  if (o.epsilon) e.epsilon = *o.epsilon;
  if (o.seed) e.seed = *o.seed;
  if (o.time) e.measure_time = *o.time;
  if (o.warmup) e.warmup_time = o.warmup;
  if (o.reps) e.replications = *o.reps;
  if (o.threads) e.threads = *o.threads;
  if (!o.target.empty()) e.target = o.target;
  validate_experiment(e);
  Network net(cfg.model);
  if (o.cap) {
    if (*o.cap < 0) throw ValidationError("invalid --cap", {"window cap must be nonnegative"});
    net = net.with_window_cap(*o.cap);
  }
  if (o.discipline) {
    if (*o.discipline == "ps") {
      net = net.with_discipline(Discipline::processor_sharing());
    } else if (*o.discipline == "fifo") {
      net = net.with_discipline(Discipline::fifo());
    } else if (*o.discipline == "lifo") {
      net = net.with_discipline(Discipline::lifo_preemptive());
    } else {
      throw ValidationError("invalid --discipline", {fmt::format("unknown discipline '{}'", *o.discipline)});
    }
  }
  return {std::move(cfg), std::move(net)};
}

std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (std::size_t k = 0; k < v.size(); ++k) s += (k ? "," : "") + std::to_string(v[k]);
  return s;
}

std::string join_reals(const std::vector<double>& v) {
  std::string s;
  for (std::size_t k = 0; k < v.size(); ++k) s += (k ? "," : "") + format_real(v[k]);
  return s;
}

Header common_params(const Options& o, const ExperimentConfig& e) {
  return {{"cap", o.cap ? std::to_string(*o.cap) : "model"},
          {"n_max", e.n_max ? std::to_string(*e.n_max) : "auto"},
          {"tolerance", format_real(e.tolerance)},
          {"state_budget", std::to_string(e.state_budget)}};
}

int do_solve(const Options& o, std::ostream& out) {
  Prepared p = prepare(o);
  SolverExport r = run_solve(p.net);
  fs::path dir = output_dir(o, p.cfg.experiment);
  auto f = open_output(dir / "solve.tsv");
  write_solution(f, p.net, r, make_header("solve", p.cfg, {{"cap", o.cap ? std::to_string(*o.cap) : "model"}}));
  write_solution(out, p.net, r);
  return 0;
}

int do_exact(const Options& o, std::ostream& out) {
  Prepared p = prepare(o);
  const int c = o.c ? *o.c : (p.cfg.experiment.c_values.empty() ? 1 : p.cfg.experiment.c_values.front());
  const auto& e = p.cfg.experiment;
  TruncationPolicy policy{e.n_max, e.tolerance, e.state_budget};
  StationaryTable table = stationary_distribution(p.net, c, policy);
  ThroughputReport report = exact_throughput(p.net, table);
  Header params = common_params(o, e);
  params.insert(params.begin(), {"c", std::to_string(c)});
  fs::path dir = output_dir(o, e);
  auto ft = open_output(dir / fmt::format("table_c{}.tsv", c));
  write_table(ft, p.net, table, make_header("exact", p.cfg, params));
  auto fr = open_output(dir / fmt::format("throughput_c{}.tsv", c));
  write_throughput(fr, p.net, report, make_header("exact", p.cfg, params));
  write_throughput(out, p.net, report);
  return 0;
}

int do_sweep(const Options& o, std::ostream& out) {
  Prepared p = prepare(o);
  const auto& e = p.cfg.experiment;
  SweepResult r = run_sweep(p.net, e);
  Header params = common_params(o, e);
  params.insert(params.begin(), {"c_values", join_ints(e.c_values)});
  fs::path dir = output_dir(o, e);
  auto f = open_output(dir / "sweep.tsv");
  write_sweep(f, p.net, r, make_header("sweep", p.cfg, params));
  write_sweep(out, p.net, r, {});
  return 0;
}

int do_ldp(const Options& o, std::ostream& out) {
  Prepared p = prepare(o);
  const auto& e = p.cfg.experiment;
  LdpReport r = run_ldp_check(p.net, e);
  Header params = common_params(o, e);
  params.insert(params.begin(), {{"c_values", join_ints(e.c_values)}, {"target", join_reals(e.target)}});
  fs::path dir = output_dir(o, e);
  auto f = open_output(dir / "ldp.tsv");
  write_ldp(f, p.net, r, make_header("ldp-check", p.cfg, params));
  write_ldp(out, p.net, r, {});
  return 0;
}

int do_simulate(const Options& o, std::ostream& out) {
  Prepared p = prepare(o);
  const auto& e = p.cfg.experiment;
  const int c = o.c ? *o.c : (e.c_values.empty() ? 1 : e.c_values.front());
  fs::path dir = output_dir(o, e);
  std::optional<std::ofstream> trace;
  if (!o.trace.empty()) {
    trace.emplace(open_output(dir / o.trace));
    *trace << "time\tkind\troute\tqueue\tposition\n";
  }
  SimulationReport r = run_simulate(p.net, e, c, trace ? &*trace : nullptr);
  Header params{{"c", std::to_string(c)},
                {"seed", std::to_string(e.seed)},
                {"measure_time", format_real(e.measure_time)},
                {"warmup_time", e.warmup_time ? format_real(*e.warmup_time) : "default"},
                {"replications", std::to_string(e.replications)},
                {"cap", o.cap ? std::to_string(*o.cap) : "model"},
                {"discipline", o.discipline.value_or("model")}};
  auto f = open_output(dir / "simulate.tsv");
  write_simulation(f, p.net, r, make_header("simulate", p.cfg, params));
  write_simulation(out, p.net, r, {});
  return 0;
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const NonConvergenceError*>(&e) || dynamic_cast<const TruncationError*>(&e) ||
      dynamic_cast<const StateBudgetError*>(&e)) {
    return 2;
  }
  return 1;
}

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Window-controlled queueing networks: optimum, exact stationary law and simulation", "cwnd"};
  app.require_subcommand(1);
  Options o;

  auto* solve = app.add_subcommand("solve", "Solve the utility maximisation and report prices and the concentration point");
  add_common(solve, o);

  auto* exact = app.add_subcommand("exact", "Exact stationary table and throughput at one congestion level");
  add_common(exact, o);
  exact->add_option("--c", o.c, "Congestion level");
  exact->add_option("--n-max", o.n_max, "Explicit truncation level (default: automatic)");
  exact->add_option("--tolerance", o.tolerance, "Accepted relative tail bound");

  auto* sweep = app.add_subcommand("sweep", "Exact throughput and concentration over a ladder of congestion levels");
  add_common(sweep, o);
  sweep->add_option("--c", o.c_list, "Congestion levels, strictly ascending")->delimiter(',');
  sweep->add_option("--n-max", o.n_max, "Explicit truncation level (default: automatic)");
  sweep->add_option("--tolerance", o.tolerance, "Accepted relative tail bound");
  sweep->add_option("--epsilon", o.epsilon, "Distance for the concentration column");

  auto* ldp = app.add_subcommand("ldp-check", "Empirical large-deviation rate at a target point against the analytic rate");
  add_common(ldp, o);
  ldp->add_option("--c", o.c_list, "Congestion levels, strictly ascending")->delimiter(',');
  ldp->add_option("--target", o.target, "Scaled target point, one value per (queue, route) pair")->delimiter(',');
  ldp->add_option("--tolerance", o.tolerance, "Accepted relative tail bound");

  auto* sim = app.add_subcommand("simulate", "Simulate the positional system");
  add_common(sim, o);
  sim->add_option("--c", o.c, "Congestion level");
  sim->add_option("--seed", o.seed, "Random seed");
  sim->add_option("--time", o.time, "Measurement time per replication");
  sim->add_option("--warmup", o.warmup, "Warmup time (default: time / 10)");
  sim->add_option("--reps", o.reps, "Replications");
  sim->add_option("--threads", o.threads, "Worker threads (0: all cores)");
  sim->add_option("--discipline", o.discipline, "Override every queue discipline: ps, fifo or lifo");
  sim->add_option("--trace", o.trace, "Write the event trace of replication 0 to this file in the output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }

  try {
    if (solve->parsed()) return do_solve(o, out);
    if (exact->parsed()) return do_exact(o, out);
    if (sweep->parsed()) return do_sweep(o, out);
    if (ldp->parsed()) return do_ldp(o, out);
    if (sim->parsed()) return do_simulate(o, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    for (const auto& v : e.violations()) err << "  - " << v << '\n';
    return exit_code_for(e);
  } catch (const TruncationError& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
  return 1;
}

}  // namespace cwnd::cli
