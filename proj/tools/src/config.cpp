#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "cwnd/cli.hpp"
#include "cwnd/errors.hpp"

namespace cwnd::cli {

namespace {

using nlohmann::json;

// Walks a JSON document while remembering where it is, so every complaint can
// name the offending key.
class Cursor {
 public:
  Cursor(const json& node, std::string path) : node_(node), path_(std::move(path)) {}

  const json& node() const { return node_; }
  const std::string& path() const { return path_; }

  Cursor at(const std::string& key) const { return {node_.at(key), join(key)}; }
  Cursor at(std::size_t index) const { return {node_.at(index), fmt::format("{}[{}]", path_, index)}; }
  bool has(const std::string& key) const { return node_.contains(key) && !node_.at(key).is_null(); }

  void require_object(std::initializer_list<const char*> allowed) const {
    if (!node_.is_object()) fail("expected an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, value] : node_.items()) {
      if (!ok.count(key)) throw ParseError(fmt::format("unknown key `{}`", join(key)));
    }
  }

  void require_array() const {
    if (!node_.is_array()) fail("expected an array");
  }

  std::string string() const {
    if (!node_.is_string()) fail("expected a string");
    return node_.get<std::string>();
  }

  double number() const {
    if (!node_.is_number()) fail("expected a number");
    return node_.get<double>();
  }

  long integer() const {
    if (!node_.is_number_integer()) fail("expected an integer");
    return node_.get<long>();
  }

  std::uint64_t unsigned_integer() const {
    if (!node_.is_number_unsigned() && !(node_.is_number_integer() && node_.get<long>() >= 0)) {
      fail("expected a nonnegative integer");
    }
    return node_.get<std::uint64_t>();
  }

  std::vector<double> numbers() const {
    require_array();
    std::vector<double> out;
    for (std::size_t k = 0; k < node_.size(); ++k) out.push_back(at(k).number());
    return out;
  }

  std::vector<std::vector<double>> matrix() const {
    require_array();
    std::vector<std::vector<double>> out;
    for (std::size_t k = 0; k < node_.size(); ++k) out.push_back(at(k).numbers());
    return out;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(fmt::format("`{}`: {}", path_.empty() ? "<root>" : path_, what));
  }

 private:
  std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json& node_;
  std::string path_;
};

Discipline parse_discipline(const Cursor& cur) {
  if (cur.node().is_string()) {
    const std::string name = cur.string();
    if (name == "ps") return Discipline::processor_sharing();
    if (name == "fifo") return Discipline::fifo();
    if (name == "lifo") return Discipline::lifo_preemptive();
    cur.fail(fmt::format("unknown discipline '{}' (expected ps, fifo, lifo or a custom object)", name));
  }
  cur.require_object({"custom"});
  Cursor custom = cur.at("custom");
  custom.require_object({"service", "placement"});
  if (!custom.has("service") || !custom.has("placement")) custom.fail("custom disciplines need service and placement");
  return Discipline::custom(custom.at("service").matrix(), custom.at("placement").matrix());
}

UtilitySpec parse_utility(const Cursor& cur) {
  cur.require_object({"kind", "alpha", "weight"});
  if (cur.has("kind") && cur.at("kind").string() != "alpha_fair") {
    cur.at("kind").fail("only alpha_fair utilities can be read from a file");
  }
  const double alpha = cur.has("alpha") ? cur.at("alpha").number() : 2.0;
  const double weight = cur.has("weight") ? cur.at("weight").number() : 1.0;
  try {
    return AlphaFair(alpha, weight);
  } catch (const DomainError& e) {
    cur.fail(e.what());
  }
}

ExperimentConfig parse_experiment(const Cursor& cur) {
  cur.require_object({"c_values", "n_max", "tolerance", "seed", "epsilon", "target", "measure_time", "warmup_time",
                      "replications", "threads", "output_dir"});
  ExperimentConfig e;
  if (cur.has("c_values")) {
    Cursor cs = cur.at("c_values");
    cs.require_array();
    for (std::size_t k = 0; k < cs.node().size(); ++k) e.c_values.push_back(static_cast<int>(cs.at(k).integer()));
  }
  if (cur.has("n_max")) {
    Cursor n = cur.at("n_max");
    if (n.node().is_string()) {
      if (n.string() != "auto") n.fail("expected \"auto\" or an integer");
    } else {
      e.n_max = static_cast<int>(n.integer());
    }
  }
  if (cur.has("tolerance")) e.tolerance = cur.at("tolerance").number();
  if (cur.has("seed")) e.seed = cur.at("seed").unsigned_integer();
  if (cur.has("epsilon")) e.epsilon = cur.at("epsilon").number();
  if (cur.has("target")) e.target = cur.at("target").numbers();
  if (cur.has("measure_time")) e.measure_time = cur.at("measure_time").number();
  if (cur.has("warmup_time")) e.warmup_time = cur.at("warmup_time").number();
  if (cur.has("replications")) e.replications = static_cast<int>(cur.at("replications").integer());
  if (cur.has("threads")) e.threads = static_cast<int>(cur.at("threads").integer());
  if (cur.has("output_dir")) e.output_dir = cur.at("output_dir").string();
  return e;
}

}  // namespace

void validate_experiment(const ExperimentConfig& config) {
  std::vector<std::string> v;
  for (std::size_t k = 0; k < config.c_values.size(); ++k) {
    if (config.c_values[k] < 1) v.push_back(fmt::format("c_values[{}] = {} is not positive", k, config.c_values[k]));
    if (k > 0 && config.c_values[k] <= config.c_values[k - 1]) {
      v.push_back(fmt::format("c_values must be strictly ascending (c_values[{}] = {} after {})", k,
                              config.c_values[k], config.c_values[k - 1]));
    }
  }
  if (!(config.tolerance > 0.0)) v.push_back("tolerance must be positive");
  if (config.n_max && *config.n_max < 0) v.push_back("n_max must be nonnegative");
  if (!(config.epsilon >= 0.0)) v.push_back("epsilon must be nonnegative");
  if (!(config.measure_time > 0.0)) v.push_back("measure_time must be positive");
  if (config.warmup_time && !(*config.warmup_time >= 0.0)) v.push_back("warmup_time must be nonnegative");
  if (config.replications < 1) v.push_back("replications must be >= 1");
  if (config.threads < 0) v.push_back("threads must be >= 0");
  if (config.state_budget == 0) v.push_back("state budget must be positive");
  if (!v.empty()) throw ValidationError("invalid experiment configuration", std::move(v));
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

LoadedConfig parse_config(std::string_view text, std::string source) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(fmt::format("{}: {}", source, e.what()));
  }

  LoadedConfig cfg;
  cfg.source = source;
  cfg.hash = fnv1a_hex(text);
  try {
    Cursor root(doc, "");
    root.require_object({"description", "queues", "routes", "experiment"});
    if (root.has("description")) root.at("description").string();
    if (!root.has("queues")) root.fail("missing `queues`");
    if (!root.has("routes")) root.fail("missing `routes`");

    Cursor queues = root.at("queues");
    queues.require_array();
    for (std::size_t k = 0; k < queues.node().size(); ++k) {
      Cursor q = queues.at(k);
      q.require_object({"id", "capacity", "discipline"});
      QueueSpec spec;
      if (!q.has("id")) q.fail("missing `id`");
      if (!q.has("capacity")) q.fail("missing `capacity`");
      spec.id = q.at("id").string();
      spec.capacity = q.at("capacity").number();
      if (q.has("discipline")) spec.discipline = parse_discipline(q.at("discipline"));
      cfg.model.queues.push_back(std::move(spec));
    }

    Cursor routes = root.at("routes");
    routes.require_array();
    for (std::size_t k = 0; k < routes.node().size(); ++k) {
      Cursor r = routes.at(k);
      r.require_object({"id", "path", "utility", "window_cap", "ack_rate_log"});
      if (!r.has("id")) r.fail("missing `id`");
      if (!r.has("path")) r.fail("missing `path`");
      RouteSpec spec{r.at("id").string(), {}, CongestionControl{AlphaFair(2.0, 1.0), 0.0, std::nullopt}};
      Cursor path = r.at("path");
      path.require_array();
      for (std::size_t h = 0; h < path.node().size(); ++h) spec.path.push_back(path.at(h).string());
      if (r.has("utility")) spec.control.utility = parse_utility(r.at("utility"));
      if (r.has("window_cap")) spec.control.window_cap = static_cast<int>(r.at("window_cap").integer());
      if (r.has("ack_rate_log")) spec.control.ack_rate_log = r.at("ack_rate_log").number();
      cfg.model.routes.push_back(std::move(spec));
    }

    if (root.has("experiment")) cfg.experiment = parse_experiment(root.at("experiment"));
  } catch (const json::exception& e) {
    throw ParseError(fmt::format("{}: {}", source, e.what()));
  } catch (const ParseError& e) {
    throw ParseError(fmt::format("{}: {}", source, e.what()));
  }

  if (const char* budget = std::getenv("CWND_STATE_BUDGET")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(budget, &end, 10);
    if (end == budget || *end != '\0' || v == 0) {
      throw ValidationError("invalid CWND_STATE_BUDGET", {fmt::format("'{}' is not a positive integer", budget)});
    }
    cfg.experiment.state_budget = static_cast<std::size_t>(v);
  }

  auto violations = validate_network(cfg.model);
  if (!violations.empty()) throw ValidationError(fmt::format("{}: invalid model", source), std::move(violations));
  validate_experiment(cfg.experiment);
  return cfg;
}

LoadedConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(fmt::format("cannot open model file '{}'", path));
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path);
}

Header make_header(const std::string& command, const LoadedConfig& cfg, const Header& params) {
  Header h{{"command", command}, {"format_version", kFormatVersion}, {"model", cfg.source}, {"model_hash", cfg.hash}};
  h.insert(h.end(), params.begin(), params.end());
  return h;
}

}  // namespace cwnd::cli
