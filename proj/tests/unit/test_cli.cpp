#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cwnd/cli.hpp"
#include "cwnd/errors.hpp"
#include "fixtures.hpp"

using namespace cwnd;
using namespace cwnd::cli;
namespace t = cwnd::testing;
namespace fs = std::filesystem;

namespace {

const char* kMinimal = R"({
  "queues": [{"id": "link", "capacity": 1.0, "discipline": "ps"}],
  "routes": [{"id": "flow", "path": ["link"]}]
})";

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("cwnd_cli_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int invoke(std::vector<std::string> args, std::string* out_text = nullptr, std::string* err_text = nullptr) {
  args.insert(args.begin(), "cwnd");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
  if (out_text) *out_text = out.str();
  if (err_text) *err_text = err.str();
  return code;
}

}  // namespace

TEST(Config, BundledFixturesLoad) {
  for (const char* name : {"single_route.model", "single_bottleneck.model", "tandem.model", "triangle.model"}) {
    LoadedConfig cfg = load_config(t::model_path(name));
    EXPECT_TRUE(validate_network(cfg.model).empty()) << name;
    EXPECT_FALSE(cfg.experiment.c_values.empty()) << name;
    EXPECT_EQ(cfg.hash.size(), 16u);
  }
}

TEST(Config, DefaultsAndUtility) {
  LoadedConfig cfg = parse_config(kMinimal);
  Network net(cfg.model);
  EXPECT_EQ(net.route_count(), 1u);
  EXPECT_FALSE(net.control(0).window_cap.has_value());
  EXPECT_FALSE(cfg.experiment.n_max.has_value());
  EXPECT_DOUBLE_EQ(cfg.experiment.tolerance, 1e-12);
}

TEST(Config, RejectsUnknownKeyWithPath) {
  const char* text = R"({
    "queues": [{"id": "link", "capacity": 1.0, "discipline": "ps", "speed": 3}],
    "routes": [{"id": "flow", "path": ["link"]}]
  })";
  try {
    parse_config(text);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("queues[0].speed"), std::string::npos) << e.what();
  }
}

TEST(Config, SyntaxErrorCarriesPosition) {
  try {
    parse_config("{\n  \"queues\": [\n    {\"id\": }\n]}", "broken.model");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("broken.model"), std::string::npos) << what;
    EXPECT_NE(what.find("line 3"), std::string::npos) << what;
  }
}

TEST(Config, EmptyRoutesFailValidation) {
  EXPECT_THROW(parse_config(R"({"queues": [{"id": "q", "capacity": 1}], "routes": []})"), ValidationError);
}

TEST(Config, UnknownQueueInPath) {
  EXPECT_THROW(parse_config(R"({"queues": [{"id": "q", "capacity": 1}],
                                "routes": [{"id": "r", "path": ["nowhere"]}]})"),
               ValidationError);
}

TEST(Config, ExperimentInvariants) {
  ExperimentConfig e;
  e.c_values = {1, 4, 2};
  EXPECT_THROW(validate_experiment(e), ValidationError);
  e.c_values = {1, 2};
  e.tolerance = -1.0;
  EXPECT_THROW(validate_experiment(e), ValidationError);
  e.tolerance = 1e-12;
  e.replications = 0;
  EXPECT_THROW(validate_experiment(e), ValidationError);
  e.replications = 4;
  EXPECT_NO_THROW(validate_experiment(e));
}

TEST(Config, HashIsStable) {
  EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
  EXPECT_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
}

TEST(Solve, WeightedSharedQueue) {
  LoadedConfig cfg = load_config(t::model_path("single_bottleneck.model"));
  SolverExport r = run_solve(Network(cfg.model));
  // U = -w/x: x_i = sqrt(w_i / q) and sum x_i = 1 give q = 9.
  EXPECT_NEAR(r.solution.allocation.rates[0], 2.0 / 3.0, 1e-8);
  EXPECT_NEAR(r.solution.allocation.rates[1], 1.0 / 3.0, 1e-8);
  EXPECT_NEAR(r.solution.prices.values[0], 9.0, 1e-7);
  EXPECT_LE(r.solution.kkt.worst(), 1e-8);
  EXPECT_LE(r.duality.gap, 1e-8 * (1 + std::abs(r.duality.dual)));
}

TEST(Sweep, SingleRouteErrorIsExpMinusC) {
  LoadedConfig cfg = load_config(t::model_path("single_route.model"));
  Network net(cfg.model);
  SweepResult r = run_sweep(net, cfg.experiment);
  ASSERT_EQ(r.rows.size(), 4u);
  for (std::size_t k = 0; k < r.rows.size(); ++k) {
    const int c = r.rows[k].c;
    EXPECT_NEAR(r.rows[k].abs_error[0], std::exp(-c), 1e-9) << c;
    if (k) {
      EXPECT_LT(r.rows[k].max_abs_error, r.rows[k - 1].max_abs_error);
    }
  }
  SolverExport s = run_solve(net);
  EXPECT_NEAR(r.optimum.solution.allocation.rates[0], s.solution.allocation.rates[0], 1e-9);
}

TEST(Sweep, ConcentrationMatchesPoisson) {
  LoadedConfig cfg = load_config(t::model_path("single_route.model"));
  cfg.experiment.c_values = {4, 16};
  cfg.experiment.epsilon = 0.5;
  SweepResult r = run_sweep(Network(cfg.model), cfg.experiment);
  for (const auto& row : r.rows) {
    EXPECT_NEAR(row.concentration, t::poisson_concentration(row.c, 0.5), 1e-10) << row.c;
  }
}

TEST(Ldp, FitRecoversPolynomialIntercept) {
  std::vector<int> c{10, 20, 40, 80};
  std::vector<double> y;
  for (int x : c) y.push_back(0.7 + 0.3 * std::log(x) / x - 2.0 / x);
  EXPECT_NEAR(fit_rate_limit(c, y), 0.7, 1e-10);
  EXPECT_NEAR(fit_rate_limit({10, 20}, {0.7 + 1.0 / 10, 0.7 + 1.0 / 20}), 0.7, 1e-12);
  EXPECT_DOUBLE_EQ(fit_rate_limit({5}, {0.25}), 0.25);
}

TEST(Ldp, SingleRouteRate) {
  LoadedConfig cfg = load_config(t::model_path("single_route.model"));
  cfg.experiment.c_values = {20, 40, 80, 160};
  LdpReport r = run_ldp_check(Network(cfg.model), cfg.experiment);
  // Poisson(c) at 2c: rate 2 log 2 - 1.
  EXPECT_NEAR(r.analytic, 2 * std::log(2.0) - 1, 1e-8);
  EXPECT_LE(r.relative_deviation, 0.05);
}

TEST(Ldp, TargetLengthMustMatch) {
  LoadedConfig cfg = load_config(t::model_path("tandem.model"));
  cfg.experiment.target = {1.0};
  EXPECT_THROW(run_ldp_check(Network(cfg.model), cfg.experiment), ValidationError);
}

TEST(Run, ExitCodes) {
  fs::path dir = scratch("exit");
  std::string err;
  EXPECT_EQ(invoke({"solve", "--model", t::model_path("tandem.model"), "--out", dir.string()}), 0);
  EXPECT_TRUE(fs::exists(dir / "solve.tsv"));
  EXPECT_EQ(invoke({"solve", "--model", (dir / "missing.model").string()}, nullptr, &err), 1);
  EXPECT_FALSE(err.empty());
  EXPECT_EQ(invoke({"frobnicate"}), 1);
  EXPECT_EQ(invoke({"exact", "--model", t::model_path("single_route.model"), "--c", "8", "--n-max", "4", "--out",
                    dir.string()},
                   nullptr, &err),
            2);
  EXPECT_NE(err.find("n_max"), std::string::npos) << err;
  EXPECT_EQ(invoke({"simulate", "--model", t::model_path("tandem.model"), "--discipline", "random", "--out",
                    dir.string()}),
            1);
}

TEST(Run, StateBudgetExitCode) {
  fs::path dir = scratch("budget");
  std::ofstream(dir / "wide.model") << R"({
    "queues": [{"id": "a", "capacity": 1}, {"id": "b", "capacity": 1}],
    "routes": [{"id": "r1", "path": ["a", "b"]}, {"id": "r2", "path": ["b", "a"]}, {"id": "r3", "path": ["a"]}],
    "experiment": {"c_values": [40]}
  })";
  ::setenv("CWND_STATE_BUDGET", "1000", 1);
  const int code = invoke({"exact", "--model", (dir / "wide.model").string(), "--out", dir.string()});
  ::unsetenv("CWND_STATE_BUDGET");
  EXPECT_EQ(code, 2);
}

TEST(Run, OutputsAreReproducible) {
  fs::path a = scratch("repro_a");
  fs::path b = scratch("repro_b");
  const std::string model = t::model_path("triangle.model");
  for (const fs::path& dir : {a, b}) {
    ASSERT_EQ(invoke({"sweep", "--model", model, "--c", "1,2", "--out", dir.string()}), 0);
    ASSERT_EQ(invoke({"exact", "--model", model, "--c", "1", "--out", dir.string()}), 0);
    ASSERT_EQ(invoke({"simulate", "--model", model, "--c", "1", "--time", "200", "--reps", "2", "--cap", "1",
                      "--trace", "trace.tsv", "--out", dir.string()}),
              0);
  }
  for (const char* file : {"sweep.tsv", "table_c1.tsv", "throughput_c1.tsv", "simulate.tsv", "trace.tsv"}) {
    const std::string x = slurp(a / file);
    EXPECT_FALSE(x.empty()) << file;
    EXPECT_EQ(x, slurp(b / file)) << file;
  }
}

TEST(Run, HeaderEchoesModel) {
  fs::path dir = scratch("header");
  ASSERT_EQ(invoke({"exact", "--model", t::model_path("single_route.model"), "--c", "2", "--out", dir.string()}), 0);
  const std::string text = slurp(dir / "table_c2.tsv");
  LoadedConfig cfg = load_config(t::model_path("single_route.model"));
  EXPECT_NE(text.find(cfg.hash), std::string::npos);
  EXPECT_NE(text.find("exact"), std::string::npos);
  EXPECT_EQ(text.rfind("# ", 0), 0u);
}
