#include "rlattack/enchant.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

#include "rlattack/rng.hpp"

namespace rlattack {

Eigen::MatrixXd OraclePredictor::final_states(const Observation& start, const SnapshotBlob& blob,
                                              const std::vector<ActionSequence>& sequences) const {
  const Environment base = Environment::restore(blob);
  Eigen::MatrixXd out(start.size(), static_cast<Eigen::Index>(sequences.size()));
  for (std::size_t j = 0; j < sequences.size(); ++j) {
    Environment env = base;
    for (int a : sequences[j]) {
      if (env.done()) break;
      env.step(a);
    }
    out.col(static_cast<Eigen::Index>(j)) = env.observation();
  }
  return out;
}

Eigen::MatrixXd LearnedPredictor::final_states(const Observation& start, const SnapshotBlob&,
                                               const std::vector<ActionSequence>& sequences) const {
  return predict_batch(model_, start, sequences);
}

void CEMConfig::validate() const {
  if (samples < 1) throw std::invalid_argument("cem: samples must be positive");
  if (elites < 1 || elites > samples) throw std::invalid_argument("cem: elites must be in [1, samples]");
  if (iterations < 1) throw std::invalid_argument("cem: iterations must be positive");
  if (horizon < 1) throw std::invalid_argument("cem: horizon must be positive");
  if (!(smoothing >= 0.0)) throw std::invalid_argument("cem: smoothing must be non-negative");
}

namespace {

// Scores sequences by distance to the goal, evaluating each distinct sequence
// once, and tracks the incumbent best (first found wins ties).
class Scorer {
 public:
  Scorer(const StatePredictor& predictor, const Observation& start, const SnapshotBlob& blob, const Observation& goal)
      : predictor_(predictor), start_(start), blob_(blob), goal_(goal) {}

  std::vector<double> score(const std::vector<ActionSequence>& batch) {
    std::vector<ActionSequence> fresh;
    for (const ActionSequence& s : batch) {
      if (!cache_.count(s) && std::find(fresh.begin(), fresh.end(), s) == fresh.end()) fresh.push_back(s);
    }
    if (!fresh.empty()) {
      const Eigen::MatrixXd states = predictor_.final_states(start_, blob_, fresh);
      for (std::size_t j = 0; j < fresh.size(); ++j) {
        cache_[fresh[j]] = {distance(goal_, states.col(static_cast<Eigen::Index>(j))), states.col(static_cast<Eigen::Index>(j))};
      }
    }
    std::vector<double> scores;
    scores.reserve(batch.size());
    for (const ActionSequence& s : batch) {
      const Entry& e = cache_.at(s);
      scores.push_back(e.distance);
      if (e.distance < best_distance_) {
        best_distance_ = e.distance;
        best_ = s;
        best_state_ = e.state;
      }
    }
    return scores;
  }

  double best_distance() const { return best_distance_; }
  const ActionSequence& best() const { return best_; }
  const Observation& best_state() const { return best_state_; }

 private:
  struct Entry {
    double distance;
    Observation state;
  };
  const StatePredictor& predictor_;
  const Observation& start_;
  const SnapshotBlob& blob_;
  const Observation& goal_;
  std::map<ActionSequence, Entry> cache_;
  double best_distance_ = std::numeric_limits<double>::infinity();
  ActionSequence best_;
  Observation best_state_;
};

Eigen::MatrixXd refit(const std::vector<ActionSequence>& batch, const std::vector<double>& scores, int elites,
                      int horizon, int action_count, double smoothing) {
  std::vector<std::size_t> order(batch.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  Eigen::MatrixXd counts = Eigen::MatrixXd::Constant(horizon, action_count, smoothing);
  for (int k = 0; k < elites; ++k) {
    const ActionSequence& s = batch[order[static_cast<std::size_t>(k)]];
    for (int t = 0; t < horizon; ++t) counts(t, s[static_cast<std::size_t>(t)]) += 1.0;
  }
  for (int t = 0; t < horizon; ++t) counts.row(t) /= counts.row(t).sum();
  return counts;
}

int sample_row(const Eigen::MatrixXd& sampler, int row, Rng& rng) {
  const double u = uniform01(rng);
  double acc = 0.0;
  for (Eigen::Index a = 0; a < sampler.cols(); ++a) {
    acc += sampler(row, a);
    if (u < acc) return static_cast<int>(a);
  }
  return static_cast<int>(sampler.cols() - 1);
}

// |A|^H when it does not exceed `cap`, otherwise cap + 1.
long long bounded_power(int base, int exp, long long cap) {
  long long v = 1;
  for (int i = 0; i < exp; ++i) {
    v *= base;
    if (v > cap) return cap + 1;
  }
  return v;
}

}  // namespace

ActionPlan cem_plan(const StatePredictor& predictor, const Observation& start, const SnapshotBlob& blob,
                    const Observation& goal, const CEMConfig& cfg, int action_count, std::uint64_t seed) {
  cfg.validate();
  if (action_count < 1) throw std::invalid_argument("cem: action_count must be positive");
  const int horizon = cfg.horizon;
  Scorer scorer(predictor, start, blob, goal);
  ActionPlan plan;

  const long long total = bounded_power(action_count, horizon, cfg.samples);
  if (cfg.exhaustive && total <= cfg.samples) {
    std::vector<ActionSequence> all;
    all.reserve(static_cast<std::size_t>(total));
    for (long long code = 0; code < total; ++code) {
      ActionSequence s(static_cast<std::size_t>(horizon));
      long long c = code;
      for (int t = horizon - 1; t >= 0; --t) {
        s[static_cast<std::size_t>(t)] = static_cast<int>(c % action_count);
        c /= action_count;
      }
      all.push_back(std::move(s));
    }
    const std::vector<double> scores = scorer.score(all);
    plan.sampler = refit(all, scores, std::min<int>(cfg.elites, static_cast<int>(all.size())), horizon, action_count,
                         cfg.smoothing);
    plan.best_per_iteration.push_back(scorer.best_distance());
    plan.enumerated = true;
  } else {
    Rng rng(seed);
    plan.sampler = Eigen::MatrixXd::Constant(horizon, action_count, 1.0 / action_count);
    std::vector<ActionSequence> batch(static_cast<std::size_t>(cfg.samples), ActionSequence(static_cast<std::size_t>(horizon)));
    for (int it = 0; it < cfg.iterations; ++it) {
      for (ActionSequence& s : batch) {
        for (int t = 0; t < horizon; ++t) s[static_cast<std::size_t>(t)] = sample_row(plan.sampler, t, rng);
      }
      const std::vector<double> scores = scorer.score(batch);
      plan.sampler = refit(batch, scores, cfg.elites, horizon, action_count, cfg.smoothing);
      plan.best_per_iteration.push_back(scorer.best_distance());
    }
  }
  plan.actions = scorer.best();
  plan.predicted_final = scorer.best_state();
  plan.predicted_distance = scorer.best_distance();
  return plan;
}

TargetState synthesize_target(const SnapshotBlob& blob, int horizon, std::uint64_t seed) {
  if (horizon < 0) throw std::invalid_argument("synthesize_target: horizon must be non-negative");
  Environment env = Environment::restore(blob);
  if (env.config().p_noise > 0.0) env.reseed_noise(derive_seed(seed, "target.noise"));
  Rng rng(derive_seed(seed, "target.actions"));
  TargetState target;
  for (int h = 0; h < horizon; ++h) {
    if (env.done()) {
      target.truncated = true;
      break;
    }
    const int a = uniform_int(rng, env.action_count());
    env.step(a);
    target.actions.push_back(a);
  }
  target.obs = env.observation();
  return target;
}

double EnchantOutcome::craft_success_rate() const {
  if (steps.empty()) return 0.0;
  int ok = 0;
  for (const EnchantStep& s : steps) ok += s.craft_success ? 1 : 0;
  return static_cast<double>(ok) / static_cast<double>(steps.size());
}

EnchantOutcome run_enchant_attack(const AgentPolicy& agent, const SnapshotBlob& blob, const TargetState& target,
                                  int horizon, const StatePredictor& predictor, const CEMConfig& cem,
                                  const CraftConfig& craft, double tolerance, std::uint64_t seed) {
  if (horizon < 0) throw std::invalid_argument("enchant: horizon must be non-negative");
  Environment env = Environment::restore(blob);
  EnchantOutcome out;
  out.horizon = horizon;
  out.t_start = env.t();
  const int steps = std::min<int>(horizon, static_cast<int>(target.actions.size()));
  for (int k = 0; k < steps; ++k) {
    if (env.done()) {
      out.truncated = true;
      break;
    }
    const Observation obs = env.observation();
    CEMConfig step_cfg = cem;
    step_cfg.horizon = steps - k;
    const ActionPlan plan = cem_plan(predictor, obs, env.snapshot(), target.obs, step_cfg, env.action_count(),
                                     derive_seed(seed, "enchant.plan", static_cast<std::uint64_t>(k)));
    EnchantStep rec;
    rec.planned = plan.actions.front();
    rec.predicted_distance = plan.predicted_distance;
    const Perturbation p = craft_targeted(agent, obs, rec.planned, craft);
    rec.craft_success = p.success;
    rec.realized = act_greedy(agent, apply_perturbation(obs, p));
    env.step(rec.realized);
    out.steps.push_back(rec);
  }
  out.final_obs = env.observation();
  out.final_distance = normalized_distance(out.final_obs, target.obs);
  out.success = out.final_distance <= tolerance;
  return out;
}

double estimate_episode_length(const AgentPolicy& agent, const EnvConfig& env, int episodes, std::uint64_t seed) {
  return evaluate_greedy(agent, env, episodes, seed).mean_length;
}

bool advance_to_start(const AgentPolicy& agent, const EnvConfig& env_cfg, std::uint64_t seed, int steps,
                      Environment& out) {
  Environment env = Environment::reset(env_cfg, seed);
  for (int i = 0; i < steps; ++i) {
    if (env.done()) return false;
    env.step(act_greedy(agent, env.observation()));
  }
  if (env.done()) return false;
  out = env;
  return true;
}

std::uint64_t enchant_episode_seed(std::uint64_t seed, std::size_t start_index, int trial) {
  return derive_seed(derive_seed(seed, "enchant.start", start_index), "episode", static_cast<std::uint64_t>(trial));
}

std::uint64_t enchant_target_seed(std::uint64_t seed, std::size_t start_index, std::size_t horizon_index, int trial) {
  return derive_seed(derive_seed(enchant_episode_seed(seed, start_index, trial), "horizon", horizon_index), "target");
}

SuccessCurve success_curve(const AgentPolicy& agent, const EnvConfig& env, const StatePredictor& predictor,
                           const CurveConfig& cfg, std::uint64_t seed) {
  if (cfg.start_fractions.empty()) throw std::invalid_argument("success_curve: start fractions must be non-empty");
  if (cfg.horizons.empty()) throw std::invalid_argument("success_curve: horizons must be non-empty");
  if (cfg.trials < 1) throw std::invalid_argument("success_curve: trials must be positive");
  SuccessCurve curve;
  curve.episode_length = estimate_episode_length(agent, env, cfg.length_episodes, derive_seed(seed, "enchant.length"));
  for (int h : cfg.horizons) curve.points.push_back({h, 0, 0});

  for (std::size_t si = 0; si < cfg.start_fractions.size(); ++si) {
    const double frac = cfg.start_fractions[si];
    const int start_step = static_cast<int>(std::floor(frac * curve.episode_length));
    for (int trial = 0; trial < cfg.trials; ++trial) {
      Environment start_env = Environment::reset(env, 0);
      if (!advance_to_start(agent, env, enchant_episode_seed(seed, si, trial), start_step, start_env)) {
        curve.skipped.push_back("start_fraction=" + std::to_string(frac) + " trial=" + std::to_string(trial) +
                                ": episode ended before step " + std::to_string(start_step));
        continue;
      }
      const SnapshotBlob blob = start_env.snapshot();
      for (std::size_t hi = 0; hi < cfg.horizons.size(); ++hi) {
        const int h = cfg.horizons[hi];
        const std::uint64_t tseed = enchant_target_seed(seed, si, hi, trial);
        const TargetState target = synthesize_target(blob, h, tseed);
        EnchantTrial rec;
        rec.horizon = h;
        rec.start_fraction = frac;
        rec.trial = trial;
        rec.seed = tseed;
        rec.outcome = run_enchant_attack(agent, blob, target, h, predictor, cfg.cem, cfg.craft, cfg.tolerance,
                                         derive_seed(tseed, "attack"));
        curve.points[hi].attempts += 1;
        curve.points[hi].successes += rec.outcome.success ? 1 : 0;
        curve.trials.push_back(std::move(rec));
      }
    }
  }
  return curve;
}

double calibrate_tolerance(const AgentPolicy& agent, const EnvConfig& env, const CurveConfig& cfg, int pairs_per_cell,
                           double quantile, std::uint64_t seed) {
  if (!(quantile > 0.0 && quantile <= 1.0)) throw std::invalid_argument("calibrate_tolerance: quantile in (0, 1]");
  const double length = estimate_episode_length(agent, env, cfg.length_episodes, derive_seed(seed, "enchant.length"));
  std::vector<double> dists;
  for (std::size_t si = 0; si < cfg.start_fractions.size(); ++si) {
    const int start_step = static_cast<int>(std::floor(cfg.start_fractions[si] * length));
    for (int pair = 0; pair < pairs_per_cell; ++pair) {
      const std::uint64_t ep_seed = derive_seed(derive_seed(seed, "calibrate.start", si), "episode",
                                                static_cast<std::uint64_t>(pair));
      Environment start_env = Environment::reset(env, 0);
      if (!advance_to_start(agent, env, ep_seed, start_step, start_env)) continue;
      const SnapshotBlob blob = start_env.snapshot();
      for (std::size_t hi = 0; hi < cfg.horizons.size(); ++hi) {
        const std::uint64_t base = derive_seed(ep_seed, "horizon", hi);
        const TargetState a = synthesize_target(blob, cfg.horizons[hi], derive_seed(base, "a"));
        const TargetState b = synthesize_target(blob, cfg.horizons[hi], derive_seed(base, "b"));
        const double d = normalized_distance(a.obs, b.obs);
        if (d > 0.0) dists.push_back(d);
      }
    }
  }
  if (dists.empty()) return 0.0;
  std::sort(dists.begin(), dists.end());
  const auto rank = static_cast<std::size_t>(std::ceil(quantile * static_cast<double>(dists.size())));
  return dists[std::clamp<std::size_t>(rank, 1, dists.size()) - 1];
}

}  // namespace rlattack
