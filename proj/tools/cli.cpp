#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <memory>
#include <ostream>
#include <random>
#include <sstream>

#include "aimle/bench.hpp"
#include "aimle/csv.hpp"
#include "aimle/errors.hpp"
#include "aimle/parallel.hpp"

namespace aimle::cli {

namespace {

using json = nlohmann::json;

std::vector<std::pair<std::string, std::string>> controller_keys() {
  return {{"alpha", "0"}, {"c", "1"}, {"eta", "0.001"}, {"gamma", "0.9"}};
}

std::vector<CommandSchema> build_commands() {
  std::vector<CommandSchema> out;

  CommandSchema bench{"bench-cosine", "Cosine similarity to the exact gradient across sample counts", {}};
  bench.keys = {{"spec", "categorical:50"},
                {"estimators", "sfe,ste,imle_forward,imle_central,aimle_forward,aimle_central"},
                {"S", "1,10,100,1000,10000,100000"},
                {"seeds", "32"},
                {"seed", ""},
                {"lambda", "1"},
                {"noise", "gumbel"},
                {"tau", "1"}};
  for (auto& kv : controller_keys()) bench.keys.push_back(kv);
  bench.keys.insert(bench.keys.end(), {{"warmup_steps", "2000"},
                                       {"warmup_samples", "10"},
                                       {"out", "bench_cosine.csv"},
                                       {"aggregate", ""},
                                       {"record", ""},
                                       {"jobs", "0"},
                                       {"timing", "false"}});
  out.push_back(bench);

  CommandSchema sweep{"sweep-lambda", "IMLE over a lambda grid next to adaptive IMLE", {}};
  sweep.keys = {{"spec", "categorical:50"}, {"mode", "central"},   {"lambda_min", "0"},
                {"lambda_max", "5"},        {"lambda_points", "11"}, {"S", "1000"},
                {"seeds", "32"},            {"seed", ""},          {"noise", "gumbel"}};
  for (auto& kv : controller_keys()) sweep.keys.push_back(kv);
  sweep.keys.insert(sweep.keys.end(), {{"warmup_steps", "2000"},
                                       {"warmup_samples", "10"},
                                       {"out", "sweep_lambda.csv"},
                                       {"aggregate", ""},
                                       {"record", ""},
                                       {"jobs", "0"},
                                       {"timing", "false"}});
  out.push_back(sweep);

  CommandSchema toy{"optimize-toy", "Closed-loop training on the quadratic toy problem", {}};
  toy.keys = {{"spec", "categorical:20"}, {"estimator", "aimle_central"}, {"lambda", "1"},
              {"S", "1"},                 {"steps", "1000"},              {"optimizer", "adam"},
              {"lr", ""},                 {"beta1", "0.9"},               {"beta2", "0.999"},
              {"eps", "1e-8"},            {"noise", "gumbel"},            {"tau", "1"}};
  for (auto& kv : controller_keys()) toy.keys.push_back(kv);
  toy.keys.insert(toy.keys.end(),
                  {{"seed", ""}, {"out", "toy.csv"}, {"record", ""}, {"resume", ""}});
  out.push_back(toy);

  CommandSchema bias{"bias-enum", "Exact expectation of the IMLE update against the exact gradient", {}};
  bias.keys = {{"spec", "categorical:3"},
               {"lambdas", "1,0.1,0.01"},
               {"seed", ""},
               {"out", "bias_enum.csv"},
               {"record", ""}};
  out.push_back(bias);
  return out;
}

// Typed, validated access to resolved parameters.
class Params {
 public:
  explicit Params(KeyValues kv) : kv_(std::move(kv)) {}

  const std::string& str(const std::string& key) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) throw ConfigError("missing key '" + key + "'");
    return it->second;
  }

  double real(const std::string& key) const { return to_real(key, str(key)); }

  double positive(const std::string& key) const {
    const double v = real(key);
    if (!(v > 0.0)) throw ConfigError(key + " must be > 0");
    return v;
  }

  double non_negative(const std::string& key) const {
    const double v = real(key);
    if (!(v >= 0.0)) throw ConfigError(key + " must be >= 0");
    return v;
  }

  std::size_t count(const std::string& key, std::size_t min = 0) const {
    const std::size_t v = to_count(key, str(key));
    if (v < min) throw ConfigError(key + " must be >= " + std::to_string(min));
    return v;
  }

  bool flag(const std::string& key) const {
    const auto& v = str(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(key + " must be true or false");
  }

  std::vector<std::string> list(const std::string& key) const {
    std::vector<std::string> items;
    std::stringstream in(str(key));
    std::string item;
    while (std::getline(in, item, ',')) {
      if (!item.empty()) items.push_back(item);
    }
    if (items.empty()) throw ConfigError(key + " must be a non-empty list");
    return items;
  }

  std::vector<double> real_list(const std::string& key) const {
    std::vector<double> out;
    for (const auto& item : list(key)) out.push_back(to_real(key, item));
    return out;
  }

  std::vector<std::size_t> count_list(const std::string& key, std::size_t min = 0) const {
    std::vector<std::size_t> out;
    for (const auto& item : list(key)) {
      out.push_back(to_count(key, item));
      if (out.back() < min) throw ConfigError(key + " entries must be >= " + std::to_string(min));
    }
    return out;
  }

  const KeyValues& values() const { return kv_; }
  void set(const std::string& key, std::string value) { kv_[key] = std::move(value); }

 private:
  static double to_real(const std::string& key, const std::string& text) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(v)) {
      throw ConfigError(key + ": '" + text + "' is not a finite number");
    }
    return v;
  }

  static std::size_t to_count(const std::string& key, const std::string& text) {
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
      throw ConfigError(key + ": '" + text + "' is not a non-negative integer");
    }
    return v;
  }

  KeyValues kv_;
};

template <class Fn>
auto as_config_error(Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
}

PolytopeSpec spec_of(const Params& p) {
  return as_config_error([&] { return PolytopeSpec::parse(p.str("spec")); });
}

NoiseSpec noise_of(const Params& p) {
  return as_config_error([&] { return parse_noise(p.str("noise")); });
}

AimleController controller_of(const Params& p) {
  AimleController c;
  c.alpha = p.non_negative("alpha");
  c.c = p.positive("c");
  const auto& eta = p.str("eta");
  if (eta == "slow") c.eta = 1e-3;
  else if (eta == "fast") c.eta = 1e-2;
  else c.eta = p.positive("eta");
  c.gamma = p.real("gamma");
  as_config_error([&] {
    c.validate();
    return 0;
  });
  return c;
}

// Resolves the seed, choosing and logging one when absent.
std::uint64_t seed_of(Params& p, std::ostream& err) {
  if (!p.str("seed").empty()) return p.count("seed");
  std::random_device device;
  const std::uint64_t seed = (static_cast<std::uint64_t>(device()) << 32) | device();
  err << "aimle: no seed given, using seed " << seed << '\n';
  p.set("seed", std::to_string(seed));
  return seed;
}

std::string default_path(const std::string& out, std::string_view suffix) {
  const auto dot = out.rfind('.');
  const auto slash = out.find_last_of('/');
  const bool has_ext = dot != std::string::npos && (slash == std::string::npos || dot > slash);
  return (has_ext ? out.substr(0, dot) : out) + std::string(suffix);
}

std::ofstream open_output(const std::string& path) {
  std::ofstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot open '" + path + "' for writing");
  return file;
}

void finish_output(std::ofstream& file, const std::string& path) {
  file.flush();
  if (!file) throw std::runtime_error("failed writing '" + path + "'");
}

json controller_json(const AimleController& c) {
  return {{"alpha", c.alpha}, {"g_bar", c.g_bar}, {"eta", c.eta},
          {"c", c.c},         {"gamma", c.gamma}, {"t", c.t}};
}

AimleController controller_from_json(const json& j) {
  AimleController c;
  c.alpha = j.at("alpha").get<double>();
  c.g_bar = j.at("g_bar").get<double>();
  c.eta = j.at("eta").get<double>();
  c.c = j.at("c").get<double>();
  c.gamma = j.at("gamma").get<double>();
  c.t = j.at("t").get<std::uint64_t>();
  return c;
}

void write_record(const std::string& path, const std::string& name, const Params& p, json extra) {
  json record = {{"command", name}, {"config", p.values()}};
  for (auto& [key, value] : extra.items()) record[key] = value;
  auto file = open_output(path);
  file << record.dump(2) << '\n';
  finish_output(file, path);
}

void print_summary(std::ostream& out, const std::vector<AggregateRow>& rows) {
  out << std::left << std::setw(16) << "estimator" << std::setw(9) << "S" << std::setw(10) << "lambda"
      << std::setw(8) << "runs" << std::setw(12) << "cosine" << std::setw(10) << "std"
      << std::setw(10) << "l0" << "zero_frac\n";
  char line[160];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-16s%-9zu%-10s%-8zu%-12.4f%-10.4f%-10.3f%.4f\n",
                  r.estimator.c_str(), r.samples, r.lambda.c_str(), r.count, r.cosine_mean,
                  r.cosine_std, r.l0_mean, r.zero_fraction_mean);
    out << line;
  }
}

std::size_t jobs_of(const Params& p) {
  const std::size_t jobs = p.count("jobs");
  return jobs == 0 ? default_jobs() : jobs;
}

void emit_bench(const std::string& name, Params& p, const std::vector<BenchRecord>& records,
                std::ostream& out) {
  const auto& path = p.str("out");
  auto file = open_output(path);
  write_bench_csv(file, records);
  finish_output(file, path);

  const auto rows = aggregate(records);
  const auto agg_path = p.str("aggregate").empty() ? default_path(path, ".agg.csv") : p.str("aggregate");
  auto agg = open_output(agg_path);
  write_aggregate_csv(agg, rows);
  finish_output(agg, agg_path);

  const auto record_path = p.str("record").empty() ? default_path(path, ".run.json") : p.str("record");
  write_record(record_path, name, p, {{"outputs", {{"csv", path}, {"aggregate", agg_path}}}});
  print_summary(out, rows);
}

using Action = std::function<void()>;

Action plan_bench_cosine(Params& p, std::ostream& out, std::ostream& err) {
  const auto spec = spec_of(p);
  const auto noise = noise_of(p);
  const auto controller = controller_of(p);
  const double lambda = p.positive("lambda");
  const double tau = p.positive("tau");
  std::vector<EstimatorConfig> estimators;
  for (const auto& id : p.list("estimators")) {
    auto cfg = as_config_error([&] { return EstimatorConfig::from_id(id); });
    if (cfg.kind == EstimatorKind::GumbelSoftmax && !spec.is_categorical()) {
      throw ConfigError("gumbel_softmax requires a categorical spec");
    }
    cfg.lambda = lambda;
    cfg.noise = noise;
    cfg.tau = tau;
    cfg.controller = controller;
    cfg.warmup_steps = p.count("warmup_steps");
    cfg.warmup_samples = p.count("warmup_samples", 1);
    estimators.push_back(cfg);
  }
  const auto samples = p.count_list("S", 1);
  const std::size_t count = p.count("seeds", 1);
  const BenchOptions options{jobs_of(p), p.flag("timing"), {}};
  const auto seed = seed_of(p, err);
  return [=, &p, &out] {
    const auto records = bench_cosine(spec, estimators, samples, seed_list(seed, count), options);
    emit_bench("bench-cosine", p, records, out);
  };
}

Action plan_sweep_lambda(Params& p, std::ostream& out, std::ostream& err) {
  const auto spec = spec_of(p);
  const auto mode = p.str("mode");
  if (mode != "forward" && mode != "central") throw ConfigError("mode must be forward or central");
  auto imle = EstimatorConfig::from_id("imle_" + mode);
  auto aimle = EstimatorConfig::from_id("aimle_" + mode);
  imle.noise = aimle.noise = noise_of(p);
  aimle.controller = controller_of(p);
  aimle.warmup_steps = p.count("warmup_steps");
  aimle.warmup_samples = p.count("warmup_samples", 1);
  const double lo = p.non_negative("lambda_min");
  const double hi = p.non_negative("lambda_max");
  if (hi < lo) throw ConfigError("lambda_max must be >= lambda_min");
  const auto grid = lambda_grid(lo, hi, p.count("lambda_points", 1));
  const std::size_t samples = p.count("S", 1);
  const std::size_t count = p.count("seeds", 1);
  const BenchOptions options{jobs_of(p), p.flag("timing"), {}};
  const auto seed = seed_of(p, err);
  return [=, &p, &out] {
    const auto records =
        sweep_lambda(spec, grid, samples, seed_list(seed, count), imle, aimle, options);
    emit_bench("sweep-lambda", p, records, out);
  };
}

Action plan_optimize_toy(Params& p, std::ostream& out, std::ostream& err) {
  const auto spec = spec_of(p);
  auto estimator = as_config_error([&] { return EstimatorConfig::from_id(p.str("estimator")); });
  estimator.lambda = p.positive("lambda");
  estimator.noise = noise_of(p);
  estimator.tau = p.positive("tau");
  estimator.controller = controller_of(p);
  if (estimator.kind == EstimatorKind::GumbelSoftmax && !spec.is_categorical()) {
    throw ConfigError("gumbel_softmax requires a categorical spec");
  }
  OptimizerConfig optimizer;
  const auto& name = p.str("optimizer");
  if (name == "sgd") {
    optimizer = Sgd{p.str("lr").empty() ? Sgd{}.lr : p.positive("lr")};
  } else if (name == "adam") {
    Adam adam;
    if (!p.str("lr").empty()) adam.lr = p.positive("lr");
    adam.beta1 = p.non_negative("beta1");
    adam.beta2 = p.non_negative("beta2");
    adam.eps = p.positive("eps");
    if (adam.beta1 >= 1.0 || adam.beta2 >= 1.0) throw ConfigError("beta1 and beta2 must be < 1");
    optimizer = adam;
  } else {
    throw ConfigError("optimizer must be sgd or adam");
  }
  ToyOptions options;
  options.steps = p.count("steps");
  options.samples = p.count("S", 1);

  std::uint64_t seed = 0;
  if (!p.str("resume").empty()) {
    std::ifstream in(p.str("resume"));
    if (!in) throw ConfigError("cannot read run record '" + p.str("resume") + "'");
    json record;
    try {
      in >> record;
      if (record.at("command") != "optimize-toy") throw ConfigError("run record is not from optimize-toy");
      const auto& state = record.at("state");
      seed = std::stoull(record.at("config").at("seed").get<std::string>());
      options.initial_theta = state.at("theta").get<Vector>();
      options.initial_controller = controller_from_json(state.at("controller"));
      OptimizerState opt;
      opt.step = state.at("optimizer").at("step").get<std::uint64_t>();
      opt.m = state.at("optimizer").at("m").get<Vector>();
      opt.v = state.at("optimizer").at("v").get<Vector>();
      options.initial_optimizer = opt;
      options.initial_rng_state = state.at("rng").get<std::string>();
      options.first_step = state.at("next_step").get<std::size_t>();
    } catch (const json::exception& e) {
      throw ConfigError(std::string("malformed run record: ") + e.what());
    }
    if (!p.str("seed").empty() && p.count("seed") != seed) {
      throw ConfigError("seed differs from the resumed run record");
    }
    p.set("seed", std::to_string(seed));
    if (options.initial_theta->size() != spec.dimension()) {
      throw ConfigError("resumed theta does not match spec dimension");
    }
  } else {
    seed = seed_of(p, err);
  }

  return [=, &p, &out] {
    const auto run = run_toy_training(spec, estimator, optimizer, seed, options);
    const auto& path = p.str("out");
    auto file = open_output(path);
    write_trajectory_csv(file, run.trajectory);
    finish_output(file, path);
    const auto record_path = p.str("record").empty() ? default_path(path, ".run.json") : p.str("record");
    json state = {{"next_step", options.first_step + options.steps},
                  {"theta", run.theta},
                  {"controller", controller_json(run.controller)},
                  {"optimizer", {{"step", run.optimizer.step}, {"m", run.optimizer.m}, {"v", run.optimizer.v}}},
                  {"rng", run.rng_state}};
    write_record(record_path, "optimize-toy", p, {{"outputs", {{"csv", path}}}, {"state", state}});
    if (!run.trajectory.empty()) {
      const auto& last = run.trajectory.back();
      out << "steps " << run.trajectory.size() << ", final loss " << format_real(last.loss)
          << ", lambda " << format_real(last.lambda) << ", g_bar " << format_real(last.g_bar)
          << ", alpha " << format_real(last.alpha) << '\n';
    }
  };
}

Action plan_bias_enum(Params& p, std::ostream& out, std::ostream& err) {
  const auto spec = spec_of(p);
  const auto lambdas = p.real_list("lambdas");
  for (double l : lambdas) {
    if (!(l > 0.0)) throw ConfigError("lambdas must be > 0");
  }
  const auto seed = seed_of(p, err);
  return [=, &p, &out] {
    const auto problem = make_problem(spec, seed);
    std::vector<BiasRow> rows;
    for (double lambda : lambdas) {
      const auto expected = expected_imle_gradient_exact(spec, problem.theta,
                                                         problem.loss.as_downstream(), lambda);
      double bias_sq = 0.0;
      double unscaled_sq = 0.0;
      for (std::size_t i = 0; i < spec.dimension(); ++i) {
        BiasRow row{lambda, i, problem.true_grad[i], expected.unscaled[i], expected.scaled[i],
                    expected.scaled[i] - problem.true_grad[i]};
        bias_sq += row.bias * row.bias;
        unscaled_sq += row.expected_unscaled * row.expected_unscaled;
        rows.push_back(row);
      }
      out << "lambda " << format_real(lambda) << ": |bias| " << format_real(std::sqrt(bias_sq))
          << ", |unscaled| " << format_real(std::sqrt(unscaled_sq)) << '\n';
    }
    const auto& path = p.str("out");
    auto file = open_output(path);
    write_bias_csv(file, rows);
    finish_output(file, path);
    const auto record_path = p.str("record").empty() ? default_path(path, ".run.json") : p.str("record");
    write_record(record_path, "bias-enum", p, {{"outputs", {{"csv", path}}}});
  };
}

}  // namespace

const std::vector<CommandSchema>& commands() {
  static const std::vector<CommandSchema> all = build_commands();
  return all;
}

const CommandSchema& command(std::string_view name) {
  for (const auto& c : commands()) {
    if (c.name == name) return c;
  }
  throw ConfigError("unknown command '" + std::string(name) + "'");
}

KeyValues parse_config_text(std::string_view text) {
  KeyValues kv;
  std::size_t line_no = 0;
  std::stringstream in{std::string(text)};
  std::string line;
  auto trim = [](std::string s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return std::string();
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

KeyValues resolve(const CommandSchema& schema, const KeyValues& file, const KeyValues& overrides) {
  KeyValues kv;
  for (const auto& [key, value] : schema.keys) kv[key] = value;
  for (const auto* layer : {&file, &overrides}) {
    for (const auto& [key, value] : *layer) {
      if (!kv.count(key)) throw ConfigError("unknown key '" + key + "' for " + schema.name);
      kv[key] = value;
    }
  }
  return kv;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Gradient estimators for discrete exponential families: benchmarks and toy runs",
               "aimle"};
  app.require_subcommand(1);
  struct Bound {
    const CommandSchema* schema;
    CLI::App* sub;
    std::string config_path;
    std::map<std::string, std::string> values;
    std::map<std::string, CLI::Option*> options;
  };
  std::vector<std::unique_ptr<Bound>> bound;
  for (const auto& schema : commands()) {
    auto b = std::make_unique<Bound>();
    b->schema = &schema;
    b->sub = app.add_subcommand(schema.name, schema.description);
    b->sub->add_option("--config", b->config_path, "flat key = value config file");
    for (const auto& [key, def] : schema.keys) {
      b->options[key] =
          b->sub->add_option("--" + key, b->values[key], "default: " + (def.empty() ? "<none>" : def));
    }
    bound.push_back(std::move(b));
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kOk;
    }
    err << "aimle: " << e.what() << '\n';
    return kConfigError;
  }

  for (const auto& b : bound) {
    if (!b->sub->parsed()) continue;
    Action action;
    std::unique_ptr<Params> params;
    try {
      KeyValues file;
      if (!b->config_path.empty()) {
        std::ifstream in(b->config_path);
        if (!in) throw ConfigError("cannot read config file '" + b->config_path + "'");
        std::stringstream buffer;
        buffer << in.rdbuf();
        file = parse_config_text(buffer.str());
      }
      KeyValues overrides;
      for (const auto& [key, opt] : b->options) {
        if (opt->count() > 0) overrides[key] = b->values[key];
      }
      params = std::make_unique<Params>(resolve(*b->schema, file, overrides));
      const auto& name = b->schema->name;
      if (name == "bench-cosine") action = plan_bench_cosine(*params, out, err);
      else if (name == "sweep-lambda") action = plan_sweep_lambda(*params, out, err);
      else if (name == "optimize-toy") action = plan_optimize_toy(*params, out, err);
      else action = plan_bias_enum(*params, out, err);
    } catch (const ConfigError& e) {
      err << "aimle: config error: " << e.what() << '\n';
      return kConfigError;
    }
    try {
      action();
    } catch (const std::exception& e) {
      err << "aimle: " << e.what() << '\n';
      return kRuntimeError;
    }
    return kOk;
  }
  return kConfigError;
}

}  // namespace aimle::cli
