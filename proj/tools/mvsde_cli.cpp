// mvsde: run one experiment described by a JSON config and write CSV reports.
//
//   mvsde --config run.json [--seed S] [--threads T] [--out-dir DIR]
//         [--override key=value ...]
//
// Exit codes: 0 ok, 2 config error, 3 numerical abort, 4 non-convergence.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mvsde/mvsde.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mvsde;

namespace {

constexpr int kSchemaVersion = 1;

/// A config problem tied to one field.
struct ConfigError : std::runtime_error {
  std::string field;
  ConfigError(std::string f, const std::string& reason) : std::runtime_error(reason), field(std::move(f)) {}
};

const std::vector<std::string> kExperiments{"simulate", "strong-rate", "poc", "one-step", "picard-compare", "moments"};

// Every accepted top-level key with its default; null means no default.
json defaults() {
  return json{
      {"schema", kSchemaVersion},
      {"experiment", nullptr},
      {"model", nullptr},
      {"horizon", nullptr},
      {"seed", 0},
      {"threads", 0},
      {"output_dir", "out"},
      {"w2_method", "auto"},
      {"w2_projections", 64},
      {"particles", 1000},
      {"n", json::array({16, 32, 64, 128, 256})},
      {"n_ref", 2048},
      {"replications", 8},
      {"steps", 256},
      {"N", json::array({32, 64, 128, 256, 512, 1024})},
      {"law_particles", 8192},
      {"law_proxy", "picard"},
      {"q", 2.0},
      {"p", 6.0},
      {"tol", 0.05},
      {"max_iter", 20},
      {"record", "endpoint"},
      {"taming", "plain"},
      {"tau", nullptr},
      {"chain", nullptr},
  };
}

template <class T>
T get(const json& cfg, const std::string& key) {
  try {
    return cfg.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(key, "has the wrong type");
  }
}

std::size_t positive(const json& cfg, const std::string& key) {
  const auto& v = cfg.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 1) throw ConfigError(key, "must be a positive integer");
  return v.get<std::size_t>();
}

std::vector<std::size_t> positive_list(const json& cfg, const std::string& key) {
  const auto& v = cfg.at(key);
  if (!v.is_array() || v.empty()) throw ConfigError(key, "must be a non-empty array of positive integers");
  std::vector<std::size_t> out;
  for (const auto& e : v) {
    if (!e.is_number_integer() || e.get<long long>() < 1)
      throw ConfigError(key, "must be a non-empty array of positive integers");
    out.push_back(e.get<std::size_t>());
  }
  return out;
}

/// Fills defaults and checks types; returns the resolved config.
json resolve_config(json raw) {
  if (!raw.is_object()) throw ConfigError("", "config must be a JSON object");
  raw.erase("manifest");
  json cfg = defaults();
  for (auto it = raw.begin(); it != raw.end(); ++it) {
    if (!cfg.contains(it.key())) throw ConfigError(it.key(), "unknown field");
    cfg[it.key()] = it.value();
  }
  for (const char* required : {"experiment", "model", "horizon"})
    if (cfg[required].is_null()) throw ConfigError(required, "missing required field");

  if (!cfg["schema"].is_number_integer() || cfg["schema"].get<int>() != kSchemaVersion)
    throw ConfigError("schema", "unsupported schema version (expected " + std::to_string(kSchemaVersion) + ")");
  const auto experiment = get<std::string>(cfg, "experiment");
  if (std::find(kExperiments.begin(), kExperiments.end(), experiment) == kExperiments.end())
    throw ConfigError("experiment", "unknown experiment '" + experiment + "'");
  if (!cfg["horizon"].is_number() || !(cfg["horizon"].get<double>() > 0.0))
    throw ConfigError("horizon", "must be a positive number");
  const auto& model = cfg["model"];
  if (!model.is_object() || !model.contains("preset") || !model["preset"].is_string())
    throw ConfigError("model.preset", "missing required field");
  for (auto it = model.begin(); it != model.end(); ++it)
    if (it.key() != "preset" && it.key() != "params") throw ConfigError("model." + it.key(), "unknown field");
  if (model.contains("params")) {
    if (!model["params"].is_object()) throw ConfigError("model.params", "must be an object");
    for (auto it = model["params"].begin(); it != model["params"].end(); ++it)
      if (!it.value().is_number()) throw ConfigError("model.params." + it.key(), "must be a number");
    if (model["params"].contains("horizon"))
      throw ConfigError("model.params.horizon", "set the top-level 'horizon' instead");
  }
  if (!cfg["seed"].is_number_unsigned() && !(cfg["seed"].is_number_integer() && cfg["seed"].get<long long>() >= 0))
    throw ConfigError("seed", "must be a non-negative integer");
  if (!cfg["threads"].is_number_integer() || cfg["threads"].get<int>() < 0)
    throw ConfigError("threads", "must be a non-negative integer");
  (void)get<std::string>(cfg, "output_dir");
  for (const char* key : {"particles", "n_ref", "replications", "steps", "law_particles", "max_iter", "w2_projections"})
    (void)positive(cfg, key);
  (void)positive_list(cfg, "n");
  (void)positive_list(cfg, "N");
  for (const char* key : {"q", "p", "tol"})
    if (!cfg[key].is_number() || !(cfg[key].get<double>() > 0.0)) throw ConfigError(key, "must be a positive number");
  auto one_of = [&](const char* key, std::initializer_list<const char*> allowed) {
    const auto v = get<std::string>(cfg, key);
    for (const char* a : allowed)
      if (v == a) return;
    throw ConfigError(key, "invalid value '" + v + "'");
  };
  one_of("w2_method", {"auto", "exact1d", "assignment", "sliced"});
  one_of("law_proxy", {"picard", "interacting"});
  one_of("record", {"endpoint", "grid"});
  one_of("taming", {"plain", "none"});
  if (!cfg["tau"].is_null() && (!cfg["tau"].is_number() || !(cfg["tau"].get<double>() > 0.0)))
    throw ConfigError("tau", "must be a positive number");
  if (!cfg["chain"].is_null()) {
    const auto& c = cfg["chain"];
    if (!c.is_object() || !c.contains("generator") || !c["generator"].is_array())
      throw ConfigError("chain.generator", "missing required field");
    for (auto it = c.begin(); it != c.end(); ++it)
      if (it.key() != "generator" && it.key() != "initial") throw ConfigError("chain." + it.key(), "unknown field");
  }
  return cfg;
}

ModelSpec build_model(const json& cfg) {
  PresetParams params;
  if (cfg["model"].contains("params"))
    for (auto it = cfg["model"]["params"].begin(); it != cfg["model"]["params"].end(); ++it)
      params[it.key()] = it.value().get<double>();
  ModelSpec m;
  try {
    m = preset(cfg["model"]["preset"].get<std::string>(), params);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("model", e.what());
  }
  m.horizon = cfg["horizon"].get<double>();
  if (!cfg["tau"].is_null()) {
    if (!m.delay) throw ConfigError("tau", "the chosen preset has no delay");
    m.delay->tau = cfg["tau"].get<double>();
  }
  if (!cfg["chain"].is_null()) {
    if (!m.chain) throw ConfigError("chain", "the chosen preset has no switching chain");
    const auto& rows = cfg["chain"]["generator"];
    ChainSpec c;
    c.states = rows.size();
    c.generator.clear();
    for (const auto& row : rows) {
      if (!row.is_array() || row.size() != c.states) throw ConfigError("chain.generator", "must be a square matrix");
      for (const auto& v : row) {
        if (!v.is_number()) throw ConfigError("chain.generator", "entries must be numbers");
        c.generator.push_back(v.get<double>());
      }
    }
    c.initial = cfg["chain"].value("initial", 0);
    m.chain = c;
  }
  try {
    m.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("model", e.what());
  }
  return m;
}

W2Method build_w2(const json& cfg) {
  const auto name = cfg["w2_method"].get<std::string>();
  const auto seed = cfg["seed"].get<std::uint64_t>();
  if (name == "exact1d") return W2Method::exact1d();
  if (name == "assignment") return W2Method::assignment();
  if (name == "sliced") return W2Method::sliced(cfg["w2_projections"].get<std::size_t>(), derive_seed(seed, 0x5EED));
  W2Method m = W2Method::automatic();
  m.seed = derive_seed(seed, 0x5EED);
  return m;
}

/// Applies key=value, where key may be dotted (model.params.kappa) and value
/// is parsed as JSON when possible and taken as a string otherwise.
void apply_override(json& raw, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError(spec, "override must look like key=value");
  const std::string key = spec.substr(0, eq);
  const std::string text = spec.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  json* node = &raw;
  std::stringstream path(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(path, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->is_object()) throw ConfigError(key, "override path crosses a non-object");
    node = &(*node)[parts[i]];
    if (node->is_null()) *node = json::object();
  }
  (*node)[parts.back()] = value;
}

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  body(os);
}

void write_rate(const fs::path& dir, const std::string& stem, const RateReport& rep) {
  write_file(dir / (stem + ".csv"), [&](std::ostream& os) { write_rate_csv(os, rep); });
  write_file(dir / (stem + ".gp"),
             [&](std::ostream& os) { write_gnuplot_script(os, rep, stem + ".csv", stem + ".png"); });
  if (!rep.notes.empty())
    write_file(dir / (stem + "_notes.txt"), [&](std::ostream& os) {
      for (const auto& n : rep.notes) os << n << '\n';
    });
}

void run_experiment(const json& cfg, const fs::path& dir, json& summary) {
  const ModelSpec model = build_model(cfg);
  const auto experiment = cfg["experiment"].get<std::string>();
  const auto seed = cfg["seed"].get<std::uint64_t>();
  const int threads = cfg["threads"].get<int>();
  const Taming taming = cfg["taming"] == "none" ? Taming::none : Taming::plain;

  if (experiment == "simulate") {
    const auto n = cfg["steps"].get<std::size_t>();
    if (!is_power_of_two(n)) throw ConfigError("steps", "must be a power of two");
    const auto bundle = generate_noise(seed, cfg["particles"].get<std::size_t>(), model.wiener_dim, n, model.levy,
                                       model.horizon, threads);
    SimulationOptions so;
    so.steps = n;
    so.record = cfg["record"] == "grid" ? Recording::grid : Recording::endpoint;
    so.initial_seed = seed;
    so.threads = threads;
    so.taming = taming;
    const auto res = simulate_auto(model, bundle, so, seed);
    write_file(dir / "trajectory.csv", [&](std::ostream& os) { write_trajectory_csv(os, res); });
    const auto m = moment_tracker(res.flow, cfg["p"].get<double>());
    write_file(dir / "moments.csv",
               [&](std::ostream& os) { write_series_csv(os, res.flow.times(), m, "moment"); });
    summary["final_mean"] = std::vector<double>(res.final_ensemble().mean().begin(), res.final_ensemble().mean().end());
  } else if (experiment == "strong-rate") {
    StrongRateOptions o;
    o.n_list = positive_list(cfg, "n");
    o.n_ref = cfg["n_ref"].get<std::size_t>();
    if (!is_power_of_two(o.n_ref)) throw ConfigError("n_ref", "must be a power of two");
    for (std::size_t n : o.n_list)
      if (o.n_ref % n != 0) throw ConfigError("n", "every entry must divide n_ref");
    o.particles = cfg["particles"].get<std::size_t>();
    o.replications = cfg["replications"].get<std::size_t>();
    o.seed = seed;
    o.threads = threads;
    const auto rep = strong_rate(model, o);
    write_rate(dir, "strong_rate", rep);
    if (rep.fit) summary["slope"] = rep.fit->slope;
  } else if (experiment == "poc") {
    PocOptions o;
    o.n_particles = positive_list(cfg, "N");
    o.steps = cfg["steps"].get<std::size_t>();
    if (!is_power_of_two(o.steps)) throw ConfigError("steps", "must be a power of two");
    o.law_particles = cfg["law_particles"].get<std::size_t>();
    if (o.law_particles <= *std::max_element(o.n_particles.begin(), o.n_particles.end()))
      throw ConfigError("law_particles", "must exceed every entry of N");
    o.proxy = cfg["law_proxy"] == "interacting" ? LawProxy::interacting : LawProxy::picard;
    o.replications = cfg["replications"].get<std::size_t>();
    o.seed = seed;
    o.threads = threads;
    o.picard_tol = cfg["tol"].get<double>();
    o.picard_max_iter = cfg["max_iter"].get<std::size_t>();
    o.w2 = build_w2(cfg);
    const auto rep = poc_experiment(model, o);
    write_rate(dir, "poc", rep);
    if (rep.fit) summary["slope"] = rep.fit->slope;
  } else if (experiment == "one-step") {
    OneStepOptions o;
    o.n_list = positive_list(cfg, "n");
    o.particles = cfg["particles"].get<std::size_t>();
    o.q = cfg["q"].get<double>();
    o.seed = seed;
    o.threads = threads;
    const auto rep = one_step_rate(model, o);
    write_rate(dir, "one_step", rep);
    if (rep.fit) summary["slope"] = rep.fit->slope;
  } else if (experiment == "picard-compare") {
    PicardOptions o;
    o.steps = cfg["steps"].get<std::size_t>();
    if (!is_power_of_two(o.steps)) throw ConfigError("steps", "must be a power of two");
    o.particles = cfg["particles"].get<std::size_t>();
    o.tol = cfg["tol"].get<double>();
    o.max_iter = cfg["max_iter"].get<std::size_t>();
    o.seed = seed;
    o.threads = threads;
    o.w2 = build_w2(cfg);
    PicardResult res;
    std::optional<NonConvergence> failure;
    try {
      res = solve_measure_flow(model, o);
    } catch (const NonConvergence& e) {
      failure = e;
      res = e.result();
    }
    write_file(dir / "picard_distances.csv", [&](std::ostream& os) { write_distances_csv(os, res.distances); });
    // the same law estimated by one interacting run with as many particles
    const std::uint64_t s = derive_seed(seed, 0xC0DE);
    const auto bundle = generate_noise(s, o.particles, model.wiener_dim, o.steps, model.levy, model.horizon, threads);
    SimulationOptions so;
    so.steps = o.steps;
    so.record = Recording::grid;
    so.initial_seed = s;
    so.threads = threads;
    const double gap = flow_distance(res.flow, simulate(model, bundle, so).flow, o.w2);
    write_file(dir / "picard_compare.csv", [&](std::ostream& os) {
      os << "iterations,converged,final_distance,interacting_gap\n"
         << res.iterations << ',' << (res.converged ? 1 : 0) << ','
         << (res.distances.empty() ? 0.0 : res.distances.back()) << ',' << gap << '\n';
    });
    summary["iterations"] = res.iterations;
    summary["interacting_gap"] = gap;
    if (failure) throw *failure;
  } else if (experiment == "moments") {
    MomentSweepOptions o;
    o.n_list = positive_list(cfg, "n");
    o.particles = cfg["particles"].get<std::size_t>();
    o.p = cfg["p"].get<double>();
    o.taming = taming;
    o.seed = seed;
    o.threads = threads;
    const auto pts = moment_sweep(model, o);
    write_file(dir / "moments.csv", [&](std::ostream& os) { write_moments_csv(os, pts); });
  }
}

void emit_error(const std::string& kind, const std::string& message, json extra = json::object()) {
  extra["error"] = kind;
  extra["message"] = message;
  std::cerr << extra.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tamed Euler particle experiments for McKean-Vlasov SDEs with jumps"};
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> out_dir;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "JSON experiment config")->required()->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "master seed (overrides the config)");
  app.add_option("--threads", threads, "worker threads; affects wall time only");
  app.add_option("--out-dir", out_dir, "output directory (overrides the config)");
  app.add_option("--override", overrides, "key=value config override; dotted keys reach nested fields");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    emit_error("usage", e.what());
    return 2;
  }

  json cfg;
  try {
    std::ifstream in(config_path);
    json raw = json::parse(in, nullptr, true, true);
    for (const auto& o : overrides) apply_override(raw, o);
    if (seed) raw["seed"] = *seed;
    if (threads) raw["threads"] = *threads;
    if (out_dir) raw["output_dir"] = *out_dir;
    cfg = resolve_config(std::move(raw));
    (void)build_model(cfg);
  } catch (const ConfigError& e) {
    emit_error("config", e.what(), {{"field", e.field}});
    return 2;
  } catch (const json::exception& e) {
    emit_error("config", std::string("cannot parse config: ") + e.what());
    return 2;
  }

  const fs::path dir = cfg["output_dir"].get<std::string>();
  json manifest = cfg;
  manifest["manifest"] = {{"library_version", kVersion}, {"seed", cfg["seed"]}, {"status", "running"}};
  try {
    fs::create_directories(dir);
    json summary = json::object();
    run_experiment(cfg, dir, summary);
    manifest["manifest"]["status"] = "ok";
    manifest["manifest"]["summary"] = summary;
    write_file(dir / "manifest.json", [&](std::ostream& os) { os << manifest.dump(2) << '\n'; });
  } catch (const ConfigError& e) {
    emit_error("config", e.what(), {{"field", e.field}});
    return 2;
  } catch (const NonFinite& e) {
    emit_error("non_finite", e.what(), {{"particle", e.particle()}, {"step", e.step()}});
    return 3;
  } catch (const NonConvergence& e) {
    manifest["manifest"]["status"] = "non_convergence";
    write_file(dir / "manifest.json", [&](std::ostream& os) { os << manifest.dump(2) << '\n'; });
    emit_error("non_convergence", e.what(), {{"distances", e.result().distances}});
    return 4;
  } catch (const std::invalid_argument& e) {
    emit_error("config", e.what());
    return 2;
  } catch (const std::exception& e) {
    emit_error("runtime", e.what());
    return 1;
  }
  return 0;
}
