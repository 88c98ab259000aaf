#include "rlattack/timed.hpp"

#include <numeric>
#include <stdexcept>

namespace rlattack {

double preference(const AgentPolicy& agent, const Observation& obs) {
  const Eigen::VectorXd p = action_dist(agent, obs);
  return p.maxCoeff() - p.minCoeff();
}

int AttackSchedule::attacks() const { return std::accumulate(b.begin(), b.end(), 0); }

int TimedEpisodeResult::crafts_succeeded() const {
  int n = 0;
  for (const Perturbation& p : crafted) n += p.success ? 1 : 0;
  return n;
}

EpisodeRecord run_clean_episode(const AgentPolicy& agent, const EnvConfig& env, std::uint64_t seed) {
  return run_episode(env, seed, [&](const Environment&, const Observation& o) { return act_greedy(agent, o); });
}

namespace {

enum class Mode { timed, uniform };

// The environment only ever sees the agent's chosen action; the perturbation
// is applied to the agent's copy of the observation.
TimedEpisodeResult run_attacked(const AgentPolicy& agent, const EnvConfig& env_cfg, std::uint64_t seed, Mode mode,
                                double beta, const CraftConfig& craft, std::optional<int> budget) {
  craft.validate();
  if (budget && *budget < 0) throw std::invalid_argument("attack budget must be non-negative");
  TimedEpisodeResult res;
  res.seed = seed;
  res.schedule.beta = beta;
  res.schedule.budget = budget;
  Environment env = Environment::reset(env_cfg, seed);
  int used = 0;
  while (!env.done()) {
    const Observation obs = env.observation();
    const double c = preference(agent, obs);
    bool attack = mode == Mode::uniform || should_attack(c, beta);
    if (attack && budget && used >= *budget) attack = false;
    int action;
    if (attack) {
      Perturbation p = mode == Mode::uniform ? craft_untargeted(agent, obs, craft)
                                             : craft_targeted(agent, obs, argmin_index(action_dist(agent, obs)), craft);
      action = act_greedy(agent, apply_perturbation(obs, p));
      res.crafted.push_back(std::move(p));
      ++used;
    } else {
      action = act_greedy(agent, obs);
    }
    res.schedule.b.push_back(attack ? 1 : 0);
    res.schedule.preference.push_back(c);
    const StepResult sr = env.step(action);
    res.record.actions.push_back(action);
    res.record.rewards.push_back(sr.reward);
    res.record.total_return += sr.reward;
  }
  res.record.length = static_cast<int>(res.record.actions.size());
  res.schedule.attack_rate = res.record.length ? static_cast<double>(used) / res.record.length : 0.0;
  res.clean_return = run_clean_episode(agent, env_cfg, seed).total_return;
  return res;
}

SweepPoint summarize(double beta, std::vector<TimedEpisodeResult> episodes) {
  SweepPoint pt;
  pt.beta = beta;
  long attacked = 0;
  long steps = 0;
  for (const TimedEpisodeResult& r : episodes) {
    pt.mean_attack_rate += r.schedule.attack_rate;
    pt.mean_return += r.record.total_return;
    pt.mean_clean_return += r.clean_return;
    attacked += r.schedule.attacks();
    steps += r.record.length;
  }
  if (!episodes.empty()) {
    const double n = static_cast<double>(episodes.size());
    pt.mean_attack_rate /= n;
    pt.mean_return /= n;
    pt.mean_clean_return /= n;
  }
  pt.pooled_attack_rate = steps ? static_cast<double>(attacked) / static_cast<double>(steps) : 0.0;
  pt.episodes = std::move(episodes);
  return pt;
}

}  // namespace

TimedEpisodeResult run_timed_episode(const AgentPolicy& agent, const EnvConfig& env, std::uint64_t seed, double beta,
                                     const CraftConfig& craft, std::optional<int> budget) {
  if (!(beta >= 0.0)) throw std::invalid_argument("beta must be non-negative");
  return run_attacked(agent, env, seed, Mode::timed, beta, craft, budget);
}

TimedEpisodeResult run_uniform_episode(const AgentPolicy& agent, const EnvConfig& env, std::uint64_t seed,
                                       const CraftConfig& craft) {
  return run_attacked(agent, env, seed, Mode::uniform, 0.0, craft, std::nullopt);
}

std::uint64_t sweep_episode_seed(std::uint64_t seed, std::size_t beta_index, int episode) {
  return derive_seed(derive_seed(seed, "timed.beta", beta_index), "episode", static_cast<std::uint64_t>(episode));
}

std::vector<SweepPoint> sweep_beta(const AgentPolicy& agent, const EnvConfig& env, const std::vector<double>& betas,
                                   int episodes_per_beta, const CraftConfig& craft, std::uint64_t seed,
                                   std::optional<int> budget) {
  if (betas.empty()) throw std::invalid_argument("sweep_beta: betas must be non-empty");
  if (episodes_per_beta < 1) throw std::invalid_argument("sweep_beta: episodes_per_beta must be positive");
  std::vector<SweepPoint> points;
  for (std::size_t i = 0; i < betas.size(); ++i) {
    std::vector<TimedEpisodeResult> eps;
    for (int e = 0; e < episodes_per_beta; ++e) {
      eps.push_back(run_timed_episode(agent, env, sweep_episode_seed(seed, i, e), betas[i], craft, budget));
    }
    points.push_back(summarize(betas[i], std::move(eps)));
  }
  return points;
}

SweepPoint uniform_baseline(const AgentPolicy& agent, const EnvConfig& env, int episodes, const CraftConfig& craft,
                            std::uint64_t seed) {
  std::vector<TimedEpisodeResult> eps;
  for (int e = 0; e < episodes; ++e) {
    eps.push_back(run_uniform_episode(agent, env, derive_seed(seed, "timed.uniform", static_cast<std::uint64_t>(e)),
                                      craft));
  }
  return summarize(0.0, std::move(eps));
}

}  // namespace rlattack
