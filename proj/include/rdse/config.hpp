#pragma once

// YAML run configuration: network, scenario, filters, experiment, tuning, benchmark and output blocks.
// Every mapping is checked against its allowed keys.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "rdse/casefile.hpp"
#include "rdse/harness.hpp"
#include "rdse/tuning.hpp"

namespace rdse {

inline constexpr int kConfigSchemaVersion = 1;

class ConfigError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

struct TuneSettings {
  std::string filter = "GMMEEF-AUKF";
  OptimizerConfig optimizer = [] {
    OptimizerConfig o;
    o.population = 8;
    o.max_iters = 10;
    return o;
  }();
  TuningBounds bounds;
  TuningBudget budget;
};

struct BenchSettings {
  std::vector<OptimizerVariant> variants{OptimizerVariant::sga, OptimizerVariant::isga, OptimizerVariant::pso};
  std::vector<int> functions{1, 12};
  Index dim = 30;
  int seeds = 10;
  OptimizerConfig optimizer;
};

struct OutputSettings {
  std::string dir = "out";
  std::vector<std::string> formats{"csv"};
};

struct RunConfig {
  std::string network_path;  // empty when the config has no network (benchmark-only configs)
  ExperimentSpec spec;
  TuneSettings tune;
  BenchSettings bench;
  OutputSettings output;
  std::string source_text;  // raw config text, fingerprinted for provenance

  const NamedFilter& filter(const std::string& name) const {
    for (const auto& f : spec.filters)
      if (f.name == name) return f;
    throw ConfigError("no filter named '" + name + "' in config");
  }
};

/// Preset filter names understood by `preset:`.
inline FilterConfig filter_preset(const std::string& name) {
  if (name == "GMMEEF-AUKF") return FilterConfig::gmmeef_aukf();
  if (name == "MEEF-UKF") return FilterConfig::meef_ukf();
  if (name == "MEE-UKF") return FilterConfig::mee_ukf();
  if (name == "MCC-UKF") return FilterConfig::mcc_ukf();
  if (name == "UKF") return FilterConfig::ukf();
  if (name == "AUKF") return FilterConfig::aukf();
  throw ConfigError("unknown filter preset '" + name + "'");
}

inline const std::vector<std::string>& filter_preset_names() {
  static const std::vector<std::string> names{"UKF", "MCC-UKF", "MEE-UKF", "MEEF-UKF", "GMMEEF-AUKF", "AUKF"};
  return names;
}

namespace config_detail {

inline void check_keys(const YAML::Node& n, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!n.IsMap()) throw ConfigError(where + ": expected a mapping");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& kv : n) {
    const auto key = kv.first.as<std::string>();
    if (!ok.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <class T>
T get(const YAML::Node& n, const std::string& where) {
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(where + ": bad value '" + YAML::Dump(n) + "'");
  }
}

template <class T>
void read(const YAML::Node& parent, const char* key, T& out, const std::string& where) {
  if (const auto n = parent[key]) out = get<T>(n, where + "." + key);
}

inline Vector read_vector(const YAML::Node& n, const std::string& where) {
  if (!n.IsSequence()) throw ConfigError(where + ": expected a list");
  const auto v = get<std::vector<double>>(n, where);
  return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
}

inline void read_kernel(const YAML::Node& n, KernelParams& k, const std::string& where) {
  check_keys(n, {"shape", "bandwidth"}, where);
  read(n, "shape", k.shape, where);
  read(n, "bandwidth", k.bandwidth, where);
}

inline void read_criterion(const YAML::Node& n, CriterionConfig& c, const std::string& where) {
  check_keys(n, {"mode", "kappa", "phi", "fiducial1", "fiducial2", "entropy", "lambda_prefactor", "gap_floor"}, where);
  if (n["mode"]) c.mode = criterion_mode_from_string(get<std::string>(n["mode"], where + ".mode"));
  read(n, "kappa", c.kappa, where);
  read(n, "phi", c.phi, where);
  if (n["fiducial1"]) read_kernel(n["fiducial1"], c.fiducial1, where + ".fiducial1");
  if (n["fiducial2"]) read_kernel(n["fiducial2"], c.fiducial2, where + ".fiducial2");
  if (n["entropy"]) read_kernel(n["entropy"], c.entropy, where + ".entropy");
  if (n["lambda_prefactor"]) {
    const auto s = get<std::string>(n["lambda_prefactor"], where + ".lambda_prefactor");
    if (s == "as_printed") c.lambda_prefactor = LambdaPrefactor::as_printed;
    else if (s == "kernel_gradient") c.lambda_prefactor = LambdaPrefactor::kernel_gradient;
    else throw ConfigError(where + ".lambda_prefactor: expected as_printed or kernel_gradient");
  }
  read(n, "gap_floor", c.gap_floor, where);
}

inline constexpr std::initializer_list<const char*> kFilterOverrideKeys{
    "ut", "criterion", "adapt_noise", "theta_mode", "theta", "forgetting", "fixed_point_tol",
    "fixed_point_max_iters", "fallback_on_divergence", "noise_floor"};

inline void read_filter_overrides(const YAML::Node& n, FilterConfig& f, const std::string& where) {
  if (const auto ut = n["ut"]) {
    check_keys(ut, {"alpha", "beta", "lambda"}, where + ".ut");
    read(ut, "alpha", f.ut.alpha, where + ".ut");
    read(ut, "beta", f.ut.beta, where + ".ut");
    read(ut, "lambda", f.ut.lambda, where + ".ut");
  }
  if (n["criterion"]) read_criterion(n["criterion"], f.criterion, where + ".criterion");
  read(n, "adapt_noise", f.adapt_noise, where);
  if (n["theta_mode"]) {
    const auto s = get<std::string>(n["theta_mode"], where + ".theta_mode");
    if (s == "constant") f.theta_mode = ThetaMode::constant;
    else if (s == "forgetting") f.theta_mode = ThetaMode::forgetting;
    else throw ConfigError(where + ".theta_mode: expected constant or forgetting");
  }
  read(n, "theta", f.theta, where);
  read(n, "forgetting", f.forgetting, where);
  read(n, "fixed_point_tol", f.fixed_point_tol, where);
  read(n, "fixed_point_max_iters", f.fixed_point_max_iters, where);
  read(n, "fallback_on_divergence", f.fallback_on_divergence, where);
  read(n, "noise_floor", f.noise_floor, where);
}

inline YAML::Node load_yaml_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw ConfigError("cannot open " + p.string());
  try {
    return YAML::Load(in);
  } catch (const YAML::ParserException& e) {
    throw ParseError(p.string() + ": " + e.msg, static_cast<std::size_t>(e.mark.line + 1));
  }
}

inline void apply_overlay(const std::filesystem::path& p, FilterConfig& f) {
  const YAML::Node n = load_yaml_file(p);
  const std::string where = p.string();
  std::vector<const char*> keys(kFilterOverrideKeys);
  for (const char* k : {"schema", "kind", "base_filter", "fitness", "start_fitness", "config_hash", "seed"}) keys.push_back(k);
  if (!n.IsMap()) throw ConfigError(where + ": expected a mapping");
  for (const auto& kv : n) {
    const auto key = kv.first.as<std::string>();
    if (std::find_if(keys.begin(), keys.end(), [&](const char* k) { return key == k; }) == keys.end())
      throw ConfigError(where + ": unknown key '" + key + "'");
  }
  if (n["kind"] && n["kind"].as<std::string>() != "tuning-overlay") throw ConfigError(where + ": not a tuning overlay");
  read_filter_overrides(n, f, where);
}

inline void read_impulse(const YAML::Node& n, ImpulseSpec& s, const std::string& where) {
  check_keys(n, {"mixture", "impulse_prob", "impulse_scale", "component_fraction"}, where);
  if (const auto m = n["mixture"]) {
    if (!m.IsSequence() || m.size() == 0) throw ConfigError(where + ".mixture: expected a non-empty list");
    s.base.components.clear();
    for (std::size_t i = 0; i < m.size(); ++i) {
      const std::string w = where + ".mixture[" + std::to_string(i) + "]";
      check_keys(m[i], {"weight", "mean", "variance"}, w);
      MixtureComponent c;
      read(m[i], "weight", c.weight, w);
      read(m[i], "mean", c.mean, w);
      read(m[i], "variance", c.variance, w);
      s.base.components.push_back(c);
    }
  }
  read(n, "impulse_prob", s.impulse_prob, where);
  read(n, "impulse_scale", s.impulse_scale, where);
  read(n, "component_fraction", s.component_fraction, where);
}

inline void read_optimizer(const YAML::Node& n, OptimizerConfig& o, const std::string& where,
                           std::initializer_list<const char*> extra = {}) {
  std::vector<const char*> keys{"variant", "population", "max_iters", "f_min", "f_max", "seed", "damping", "jobs"};
  keys.insert(keys.end(), extra.begin(), extra.end());
  for (const auto& kv : n) {
    const auto key = kv.first.as<std::string>();
    if (std::find_if(keys.begin(), keys.end(), [&](const char* k) { return key == k; }) == keys.end())
      throw ConfigError(where + ": unknown key '" + key + "'");
  }
  if (n["variant"]) o.variant = optimizer_variant_from_string(get<std::string>(n["variant"], where + ".variant"));
  read(n, "population", o.population, where);
  read(n, "max_iters", o.max_iters, where);
  read(n, "f_min", o.f_min, where);
  read(n, "f_max", o.f_max, where);
  read(n, "seed", o.seed, where);
  read(n, "jobs", o.jobs, where);
  if (n["damping"]) {
    const auto s = get<std::string>(n["damping"], where + ".damping");
    if (s == "as_printed") o.damping = SgaDamping::as_printed;
    else if (s == "exp_ratio") o.damping = SgaDamping::exp_ratio;
    else throw ConfigError(where + ".damping: expected as_printed or exp_ratio");
  }
}

inline std::filesystem::path resolve(const std::filesystem::path& base_dir, const std::string& p) {
  std::filesystem::path q(p);
  if (q.is_absolute()) return q;
  if (std::filesystem::exists(base_dir / q)) return base_dir / q;
  const std::filesystem::path data(RDSE_DATA_DIR);
  if (std::filesystem::exists(data / q)) return data / q;
  if (std::filesystem::exists(data / q.filename())) return data / q.filename();
  return base_dir / q;
}

}  // namespace config_detail

/// Parses config text; relative paths resolve against `base_dir`, then the bundled data directory.
inline RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = ".") {
  using namespace config_detail;
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ParseError("config: " + e.msg, static_cast<std::size_t>(e.mark.line + 1));
  }
  check_keys(root, {"schema", "network", "plan", "scenario", "experiment", "filters", "tune", "bench", "output"}, "config");
  if (root["schema"] && root["schema"].as<int>() != kConfigSchemaVersion)
    throw ConfigError("config: unsupported schema " + root["schema"].as<std::string>());
  RunConfig c;
  c.source_text = text;

  const bool has_network = static_cast<bool>(root["network"]);
  if (has_network) {
  c.network_path = resolve(base_dir, get<std::string>(root["network"], "network")).string();
  try {
    c.spec.network = load_cdf(c.network_path);
  } catch (const std::ios_base::failure&) {
    throw ConfigError("network: cannot open " + c.network_path);
  }

  if (const auto p = root["plan"]; p && !(p.IsScalar() && p.as<std::string>() == "default")) {
    const auto items = get<std::vector<std::string>>(p, "plan");
    c.spec.plan = make_plan(c.spec.network, items);
  } else {
    c.spec.plan = default_plan(c.spec.network);
  }
  }

  if (const auto s = root["scenario"]) {
    if (s.IsScalar()) {
      c.spec.scenario = scenario_preset(s.as<std::string>());
    } else {
      check_keys(s, {"preset", "name", "process", "measurement", "bad_data"}, "scenario");
      c.spec.scenario = scenario_preset(s["preset"] ? s["preset"].as<std::string>() : "scenario1");
      read(s, "name", c.spec.scenario.name, "scenario");
      if (s["process"]) read_impulse(s["process"], c.spec.scenario.process, "scenario.process");
      if (s["measurement"]) read_impulse(s["measurement"], c.spec.scenario.measurement, "scenario.measurement");
      if (const auto b = s["bad_data"]) {
        if (!b.IsSequence()) throw ConfigError("scenario.bad_data: expected a list");
        c.spec.scenario.bad_data.events.clear();
        for (std::size_t i = 0; i < b.size(); ++i) {
          const std::string w = "scenario.bad_data[" + std::to_string(i) + "]";
          check_keys(b[i], {"t", "multiplier"}, w);
          BadDataEvent e;
          read(b[i], "t", e.time, w);
          read(b[i], "multiplier", e.multiplier, w);
          c.spec.scenario.bad_data.events.push_back(e);
        }
      }
    }
  } else {
    c.spec.scenario = scenario_preset("scenario1");
  }

  if (const auto e = root["experiment"]) {
    check_keys(e, {"experiments", "horizon", "seed", "jobs", "rmse_convention", "holt", "init"}, "experiment");
    read(e, "experiments", c.spec.experiments, "experiment");
    read(e, "horizon", c.spec.horizon, "experiment");
    read(e, "seed", c.spec.base_seed, "experiment");
    read(e, "jobs", c.spec.jobs, "experiment");
    if (e["rmse_convention"]) {
      const auto s = get<std::string>(e["rmse_convention"], "experiment.rmse_convention");
      if (s == "as_printed") c.spec.convention = RmseConvention::as_printed;
      else if (s == "inside_root") c.spec.convention = RmseConvention::inside_root;
      else throw ConfigError("experiment.rmse_convention: expected as_printed or inside_root");
    }
    if (const auto h = e["holt"]) {
      check_keys(h, {"level", "trend"}, "experiment.holt");
      read(h, "level", c.spec.holt.level, "experiment.holt");
      read(h, "trend", c.spec.holt.trend, "experiment.holt");
    }
    if (const auto i = e["init"]) {
      check_keys(i, {"p00", "q0", "r0", "perturb_initial"}, "experiment.init");
      read(i, "p00", c.spec.init.p00, "experiment.init");
      read(i, "q0", c.spec.init.q0, "experiment.init");
      read(i, "r0", c.spec.init.r0, "experiment.init");
      read(i, "perturb_initial", c.spec.init.perturb_initial, "experiment.init");
    }
  }

  if (const auto fs = root["filters"]) {
    if (!fs.IsSequence()) throw ConfigError("filters: expected a list");
    for (std::size_t i = 0; i < fs.size(); ++i) {
      const auto& n = fs[i];
      const std::string where = "filters[" + std::to_string(i) + "]";
      std::vector<const char*> keys(kFilterOverrideKeys);
      for (const char* k : {"name", "preset", "overlay"}) keys.push_back(k);
      if (!n.IsMap()) throw ConfigError(where + ": expected a mapping");
      for (const auto& kv : n) {
        const auto key = kv.first.as<std::string>();
        if (std::find_if(keys.begin(), keys.end(), [&](const char* k) { return key == k; }) == keys.end())
          throw ConfigError(where + ": unknown key '" + key + "'");
      }
      NamedFilter nf;
      const std::string preset = n["preset"] ? get<std::string>(n["preset"], where + ".preset") : "GMMEEF-AUKF";
      nf.name = n["name"] ? get<std::string>(n["name"], where + ".name") : preset;
      nf.config = filter_preset(preset);
      if (n["overlay"]) apply_overlay(resolve(base_dir, get<std::string>(n["overlay"], where + ".overlay")), nf.config);
      read_filter_overrides(n, nf.config, where);
      for (const auto& other : c.spec.filters)
        if (other.name == nf.name) throw ConfigError(where + ": duplicate filter name '" + nf.name + "'");
      c.spec.filters.push_back(std::move(nf));
    }
  } else {
    for (const auto& name : filter_preset_names()) c.spec.filters.push_back({name, filter_preset(name)});
  }

  if (const auto t = root["tune"]) {
    check_keys(t, {"filter", "optimizer", "bounds", "budget"}, "tune");
    read(t, "filter", c.tune.filter, "tune");
    if (t["optimizer"]) read_optimizer(t["optimizer"], c.tune.optimizer, "tune.optimizer");
    if (const auto b = t["bounds"]) {
      check_keys(b, {"lo", "hi"}, "tune.bounds");
      if (b["lo"]) c.tune.bounds.lo = read_vector(b["lo"], "tune.bounds.lo");
      if (b["hi"]) c.tune.bounds.hi = read_vector(b["hi"], "tune.bounds.hi");
    }
    if (const auto b = t["budget"]) {
      check_keys(b, {"experiments", "horizon", "seed"}, "tune.budget");
      read(b, "experiments", c.tune.budget.experiments, "tune.budget");
      read(b, "horizon", c.tune.budget.horizon, "tune.budget");
      read(b, "seed", c.tune.budget.seed, "tune.budget");
    }
  }

  if (const auto b = root["bench"]) {
    check_keys(b, {"variants", "functions", "dim", "seeds", "optimizer"}, "bench");
    if (b["variants"]) {
      c.bench.variants.clear();
      for (const auto& s : get<std::vector<std::string>>(b["variants"], "bench.variants"))
        c.bench.variants.push_back(optimizer_variant_from_string(s));
    }
    read(b, "functions", c.bench.functions, "bench");
    read(b, "dim", c.bench.dim, "bench");
    read(b, "seeds", c.bench.seeds, "bench");
    if (b["optimizer"]) read_optimizer(b["optimizer"], c.bench.optimizer, "bench.optimizer");
  }

  if (const auto o = root["output"]) {
    check_keys(o, {"dir", "formats"}, "output");
    read(o, "dir", c.output.dir, "output");
    read(o, "formats", c.output.formats, "output");
    for (const auto& f : c.output.formats)
      if (f != "csv" && f != "jsonl") throw ConfigError("output.formats: expected csv and/or jsonl, got '" + f + "'");
  }

  try {
    if (has_network) c.spec.validate();
    c.tune.bounds.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const ValidationError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.spec.config_hash = fingerprint(text);
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::filesystem::path(path).parent_path());
}

/// Tuning overlay in the filter-block format, loadable through a filter's `overlay:` key.
inline std::string tuning_overlay_yaml(const TuningResult& r, const std::string& base_filter, const std::string& hash,
                                       std::uint64_t seed) {
  const FilterConfig& c = r.config;
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "schema" << YAML::Value << kConfigSchemaVersion;
  out << YAML::Key << "kind" << YAML::Value << "tuning-overlay";
  out << YAML::Key << "base_filter" << YAML::Value << base_filter;
  out << YAML::Key << "config_hash" << YAML::Value << hash;
  out << YAML::Key << "seed" << YAML::Value << seed;
  out << YAML::Key << "fitness" << YAML::Value << r.fitness;
  out << YAML::Key << "start_fitness" << YAML::Value << r.start_fitness;
  out << YAML::Key << "ut" << YAML::Value << YAML::BeginMap << YAML::Key << "alpha" << YAML::Value << c.ut.alpha
      << YAML::Key << "beta" << YAML::Value << c.ut.beta << YAML::EndMap;
  auto kernel = [&](const char* key, const KernelParams& k) {
    out << YAML::Key << key << YAML::Value << YAML::BeginMap << YAML::Key << "shape" << YAML::Value << k.shape
        << YAML::Key << "bandwidth" << YAML::Value << k.bandwidth << YAML::EndMap;
  };
  out << YAML::Key << "criterion" << YAML::Value << YAML::BeginMap;
  kernel("fiducial1", c.criterion.fiducial1);
  kernel("fiducial2", c.criterion.fiducial2);
  kernel("entropy", c.criterion.entropy);
  out << YAML::EndMap;
  if (c.theta_mode == ThetaMode::constant)
    out << YAML::Key << "theta" << YAML::Value << c.theta;
  else
    out << YAML::Key << "forgetting" << YAML::Value << c.forgetting;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

}  // namespace rdse
