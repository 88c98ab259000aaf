#include <set>

#include "json.hpp"

#include "config_json.hpp"
#include "rlattack/bytes.hpp"
#include "rlattack/harness.hpp"

namespace rlattack {

using nlohmann::json;

namespace {

const std::vector<double> kDefaultBetas{0.0,  0.02, 0.05, 0.08, 0.1,  0.12, 0.14, 0.16, 0.18, 0.2,  0.25, 0.3,
                                        0.4,  0.5,  0.6,  0.7,  0.8,  0.9,  0.95, 0.98, 0.99, 0.995, 0.998, 0.999,
                                        0.9995, 0.9999, 1.01};

// Walks one JSON object, type-checking each read and rejecting keys nobody read.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "config" : path_, "expected an object");
  }

  std::string key(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }
  bool has(const std::string& k) const { return j_.contains(k) && !j_.at(k).is_null(); }

  const json& raw(const std::string& k) {
    seen_.insert(k);
    return j_.at(k);
  }

  double number(const std::string& k, double def) {
    if (!has(k)) return mark(k, def);
    const json& v = raw(k);
    if (!v.is_number()) throw ConfigError(key(k), "expected a number");
    return v.get<double>();
  }

  int integer(const std::string& k, int def) {
    if (!has(k)) return mark(k, def);
    const json& v = raw(k);
    if (!v.is_number_integer()) throw ConfigError(key(k), "expected an integer");
    return v.get<int>();
  }

  std::uint64_t unsigned_integer(const std::string& k) {
    if (!has(k)) throw ConfigError(key(k), "missing required key");
    const json& v = raw(k);
    if (!v.is_number_unsigned()) throw ConfigError(key(k), "expected a non-negative integer");
    return v.get<std::uint64_t>();
  }

  bool boolean(const std::string& k, bool def) {
    if (!has(k)) return mark(k, def);
    const json& v = raw(k);
    if (!v.is_boolean()) throw ConfigError(key(k), "expected true or false");
    return v.get<bool>();
  }

  std::string text(const std::string& k, const std::string& def) {
    if (!has(k)) return mark(k, def);
    const json& v = raw(k);
    if (!v.is_string()) throw ConfigError(key(k), "expected a string");
    return v.get<std::string>();
  }

  std::string required_text(const std::string& k) {
    if (!has(k)) throw ConfigError(key(k), "missing required key");
    return text(k, "");
  }

  template <typename T>
  std::vector<T> list(const std::string& k, const std::vector<T>& def) {
    if (!has(k)) return mark(k, def);
    const json& v = raw(k);
    if (!v.is_array() || v.empty()) throw ConfigError(key(k), "expected a non-empty array");
    std::vector<T> out;
    for (const json& item : v) {
      if constexpr (std::is_same_v<T, int>) {
        if (!item.is_number_integer()) throw ConfigError(key(k), "expected integers");
      } else if constexpr (std::is_same_v<T, double>) {
        if (!item.is_number()) throw ConfigError(key(k), "expected numbers");
      } else {
        if (!item.is_string()) throw ConfigError(key(k), "expected strings");
      }
      out.push_back(item.get<T>());
    }
    return out;
  }

  Section child(const std::string& k) {
    static const json empty = json::object();
    if (!has(k)) return mark(k, Section(empty, key(k)));
    return Section(raw(k), key(k));
  }

  // Accepts an explicit null for an optional key.
  void skip(const std::string& k) { seen_.insert(k); }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(key(it.key()), "unknown key");
    }
  }

 private:
  template <typename T>
  T mark(const std::string& k, T v) {
    seen_.insert(k);
    return v;
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void check_valid(const std::string& key, const auto& validate) {
  try {
    validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(key, e.what());
  }
}

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError(key, what);
}

TrainConfig read_train(Section& s, AgentKind kind) {
  TrainConfig t;
  const bool value = kind == AgentKind::value_based;
  t.episodes = s.integer("episodes", value ? 6000 : 40000);
  t.lr = s.number("lr", value ? 0.2 : 0.5);
  t.gamma = s.number("gamma", t.gamma);
  t.hidden = s.integer("hidden", t.hidden);
  t.epsilon_start = s.number("epsilon_start", t.epsilon_start);
  t.epsilon_end = s.number("epsilon_end", 0.01);
  t.replay_capacity = s.integer("replay_capacity", t.replay_capacity);
  t.batch_size = s.integer("batch_size", t.batch_size);
  t.target_sync = s.integer("target_sync", t.target_sync);
  t.warmup = s.integer("warmup", t.warmup);
  t.entropy_weight = s.number("entropy_weight", t.entropy_weight);
  t.value_weight = s.number("value_weight", t.value_weight);
  t.episodes_per_update = s.integer("episodes_per_update", t.episodes_per_update);
  t.gae_lambda = s.number("gae_lambda", t.gae_lambda);
  return t;
}

json train_json(const TrainConfig& t) {
  return {{"episodes", t.episodes},
          {"lr", t.lr},
          {"gamma", t.gamma},
          {"hidden", t.hidden},
          {"epsilon_start", t.epsilon_start},
          {"epsilon_end", t.epsilon_end},
          {"replay_capacity", t.replay_capacity},
          {"batch_size", t.batch_size},
          {"target_sync", t.target_sync},
          {"warmup", t.warmup},
          {"entropy_weight", t.entropy_weight},
          {"value_weight", t.value_weight},
          {"episodes_per_update", t.episodes_per_update},
          {"gae_lambda", t.gae_lambda}};
}

std::string predictor_name(PredictorChoice p) {
  switch (p) {
    case PredictorChoice::learned: return "learned";
    case PredictorChoice::oracle: return "oracle";
    case PredictorChoice::both: return "both";
  }
  return "both";
}

json optional_json(const auto& v) { return v ? json(*v) : json(nullptr); }

json canonical_json(const ExperimentConfig& c) {
  json agents = json::array();
  for (const AgentSpec& a : c.agents) {
    agents.push_back({{"name", a.name}, {"kind", std::string(to_string(a.kind))}, {"train", train_json(a.train)}});
  }
  const CurveConfig& cv = c.enchant.curve;
  return {
      {"seed", c.seed},
      {"output_dir", c.output_dir.generic_string()},
      {"env",
       {{"kind", std::string(to_string(c.env.kind))},
        {"frame_size", c.env.frame_size},
        {"p_noise", c.env.p_noise},
        {"max_steps", c.env.max_steps}}},
      {"agents", agents},
      {"competence", {{"min_return", c.competence_min_return}, {"episodes", c.competence_episodes}}},
      {"dynamics",
       {{"enabled", c.dynamics.enabled},
        {"episodes", c.dynamics.episodes},
        {"hidden", c.dynamics.train.hidden},
        {"epochs", c.dynamics.train.epochs},
        {"lr", c.dynamics.train.lr},
        {"batch_size", c.dynamics.train.batch_size},
        {"heldout_fraction", c.dynamics.train.heldout_fraction},
        {"max_mse", optional_json(c.dynamics.max_mse)}}},
      {"craft",
       {{"epsilon", c.craft.epsilon}, {"max_iters", c.craft.max_iters}, {"step_size", optional_json(c.craft.step_size)}}},
      {"timed",
       {{"agents", c.timed.agents.empty() ? json(nullptr) : json(c.timed.agents)},
        {"betas", c.timed.betas},
        {"episodes_per_beta", c.timed.episodes_per_beta},
        {"budget", optional_json(c.timed.budget)}}},
      {"enchant",
       {{"agent", c.enchant.agent},
        {"horizons", cv.horizons},
        {"start_fractions", cv.start_fractions},
        {"trials", cv.trials},
        {"length_episodes", cv.length_episodes},
        {"cem",
         {{"samples", cv.cem.samples},
          {"elites", cv.cem.elites},
          {"iterations", cv.cem.iterations},
          {"exhaustive", cv.cem.exhaustive},
          {"smoothing", cv.cem.smoothing}}},
        {"tolerance", c.enchant.calibrate ? json("calibrate") : json(cv.tolerance)},
        {"calibration", {{"pairs", c.enchant.calibration_pairs}, {"quantile", c.enchant.calibration_quantile}}},
        {"predictor", predictor_name(c.enchant.predictor)}}},
  };
}

}  // namespace

const AgentSpec& ExperimentConfig::agent(const std::string& name) const {
  for (const AgentSpec& a : agents) {
    if (a.name == name) return a;
  }
  throw ConfigError("agents", "no agent named '" + name + "'");
}

std::uint64_t agent_train_seed(const ExperimentConfig& cfg, const std::string& agent) {
  return derive_seed(cfg.seed, "train." + agent);
}

ExperimentConfig parse_config_json(const json& root) {
  ExperimentConfig c;
  Section top(root, "");
  c.seed = top.unsigned_integer("seed");
  c.output_dir = top.text("output_dir", "run");

  {
    Section env = top.child("env");
    const std::string kind = env.required_text("kind");
    try {
      c.env.kind = parse_env_kind(kind);
    } catch (const std::invalid_argument&) {
      throw ConfigError("env.kind", "unknown environment '" + kind + "' (expected catch or gridgoal)");
    }
    c.env.frame_size = env.integer("frame_size", c.env.frame_size);
    c.env.p_noise = env.number("p_noise", c.env.p_noise);
    c.env.max_steps = env.integer("max_steps", c.env.max_steps);
    env.finish();
    check_valid("env", [&] { c.env.validate(); });
  }

  if (top.has("agents")) {
    const json& arr = top.raw("agents");
    require(arr.is_array() && !arr.empty(), "agents", "expected a non-empty array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string path = "agents[" + std::to_string(i) + "]";
      Section a(arr[i], path);
      AgentSpec spec;
      spec.name = a.required_text("name");
      require(!spec.name.empty() && spec.name.find_first_of("/\\. ") == std::string::npos, path + ".name",
              "must be a non-empty plain file name");
      const std::string kind = a.required_text("kind");
      try {
        spec.kind = parse_agent_kind(kind);
      } catch (const std::invalid_argument&) {
        throw ConfigError(path + ".kind", "unknown agent kind '" + kind + "'");
      }
      Section t = a.child("train");
      spec.train = read_train(t, spec.kind);
      t.finish();
      a.finish();
      check_valid(path + ".train", [&] { spec.train.validate(); });
      for (const AgentSpec& other : c.agents) require(other.name != spec.name, path + ".name", "duplicate agent name");
      c.agents.push_back(std::move(spec));
    }
  } else {
    top.skip("agents");
    c.agents.push_back({"value", AgentKind::value_based, {}});
    c.agents.push_back({"policy", AgentKind::policy_gradient, {}});
    for (AgentSpec& a : c.agents) {
      Section empty(json::object(), "agents");
      a.train = read_train(empty, a.kind);
    }
  }

  {
    Section s = top.child("competence");
    c.competence_min_return = s.number("min_return", c.competence_min_return);
    c.competence_episodes = s.integer("episodes", c.competence_episodes);
    s.finish();
    require(c.competence_episodes >= 1, "competence.episodes", "must be positive");
  }

  {
    Section s = top.child("dynamics");
    c.dynamics.enabled = s.boolean("enabled", c.dynamics.enabled);
    c.dynamics.episodes = s.integer("episodes", c.dynamics.episodes);
    c.dynamics.train.hidden = s.integer("hidden", c.dynamics.train.hidden);
    c.dynamics.train.epochs = s.integer("epochs", c.dynamics.train.epochs);
    c.dynamics.train.lr = s.number("lr", c.dynamics.train.lr);
    c.dynamics.train.batch_size = s.integer("batch_size", c.dynamics.train.batch_size);
    c.dynamics.train.heldout_fraction = s.number("heldout_fraction", c.dynamics.train.heldout_fraction);
    if (s.has("max_mse")) c.dynamics.max_mse = s.number("max_mse", 0.0);
    else s.skip("max_mse");
    s.finish();
    require(c.dynamics.episodes >= 1, "dynamics.episodes", "must be positive");
    check_valid("dynamics", [&] { c.dynamics.train.validate(); });
  }

  {
    Section s = top.child("craft");
    c.craft.epsilon = s.number("epsilon", 0.05);
    c.craft.max_iters = s.integer("max_iters", c.craft.max_iters);
    if (s.has("step_size")) c.craft.step_size = s.number("step_size", 0.0);
    else s.skip("step_size");
    s.finish();
    check_valid("craft", [&] { c.craft.validate(); });
  }

  {
    Section s = top.child("timed");
    if (s.has("agents")) c.timed.agents = s.list<std::string>("agents", {});
    else s.skip("agents");
    c.timed.betas = s.list<double>("betas", kDefaultBetas);
    c.timed.episodes_per_beta = s.integer("episodes_per_beta", c.timed.episodes_per_beta);
    if (s.has("budget")) c.timed.budget = s.integer("budget", 0);
    else s.skip("budget");
    s.finish();
    for (double b : c.timed.betas) require(b >= 0.0, "timed.betas", "betas must be non-negative");
    require(c.timed.episodes_per_beta >= 1, "timed.episodes_per_beta", "must be positive");
    require(!c.timed.budget || *c.timed.budget >= 0, "timed.budget", "must be non-negative");
    for (const std::string& n : c.timed.agents) {
      try {
        c.agent(n);
      } catch (const ConfigError&) {
        throw ConfigError("timed.agents", "no agent named '" + n + "'");
      }
    }
  }

  {
    Section s = top.child("enchant");
    EnchantSpec& e = c.enchant;
    e.agent = s.text("agent", c.agents.front().name);
    try {
      c.agent(e.agent);
    } catch (const ConfigError&) {
      throw ConfigError("enchant.agent", "no agent named '" + e.agent + "'");
    }
    e.curve.horizons = s.list<int>("horizons", e.curve.horizons);
    e.curve.start_fractions = s.list<double>("start_fractions", e.curve.start_fractions);
    e.curve.trials = s.integer("trials", e.curve.trials);
    e.curve.length_episodes = s.integer("length_episodes", e.curve.length_episodes);
    Section cem = s.child("cem");
    e.curve.cem.samples = cem.integer("samples", e.curve.cem.samples);
    e.curve.cem.elites = cem.integer("elites", e.curve.cem.elites);
    e.curve.cem.iterations = cem.integer("iterations", e.curve.cem.iterations);
    e.curve.cem.exhaustive = cem.boolean("exhaustive", e.curve.cem.exhaustive);
    e.curve.cem.smoothing = cem.number("smoothing", e.curve.cem.smoothing);
    cem.finish();
    check_valid("enchant.cem", [&] { e.curve.cem.validate(); });
    if (s.has("tolerance") && s.raw("tolerance").is_string()) {
      require(s.raw("tolerance").get<std::string>() == "calibrate", "enchant.tolerance",
              "expected a number or \"calibrate\"");
      e.calibrate = true;
    } else {
      e.calibrate = !s.has("tolerance");
      e.curve.tolerance = s.number("tolerance", e.curve.tolerance);
      require(e.curve.tolerance >= 0.0, "enchant.tolerance", "must be non-negative");
    }
    Section cal = s.child("calibration");
    e.calibration_pairs = cal.integer("pairs", e.calibration_pairs);
    e.calibration_quantile = cal.number("quantile", e.calibration_quantile);
    cal.finish();
    require(e.calibration_pairs >= 1, "enchant.calibration.pairs", "must be positive");
    require(e.calibration_quantile > 0.0 && e.calibration_quantile <= 1.0, "enchant.calibration.quantile",
            "must be in (0, 1]");
    const std::string pred = s.text("predictor", "both");
    if (pred == "learned") e.predictor = PredictorChoice::learned;
    else if (pred == "oracle") e.predictor = PredictorChoice::oracle;
    else if (pred == "both") e.predictor = PredictorChoice::both;
    else throw ConfigError("enchant.predictor", "expected learned, oracle or both");
    s.finish();
    for (int h : e.curve.horizons) require(h >= 1, "enchant.horizons", "horizons must be positive");
    for (double f : e.curve.start_fractions) {
      require(f >= 0.0 && f < 1.0, "enchant.start_fractions", "fractions must be in [0, 1)");
    }
    require(e.curve.trials >= 1, "enchant.trials", "must be positive");
    require(e.curve.length_episodes >= 1, "enchant.length_episodes", "must be positive");
  }
  top.finish();
  c.enchant.curve.craft = c.craft;
  c.canonical = canonical_json(c).dump(2) + "\n";
  return c;
}

json parse_json_text(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("config", std::string("invalid JSON: ") + e.what());
  }
}

ExperimentConfig parse_config(const std::string& json_text) { return parse_config_json(parse_json_text(json_text)); }

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::exception&) {
    throw ConfigError("--config", "cannot read " + path.string());
  }
  return parse_config(text);
}

}  // namespace rlattack
