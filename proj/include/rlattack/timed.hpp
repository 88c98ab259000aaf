#pragma once

// Strategically-timed attack: perturb the observation only at steps where the
// agent's relative action preference c(s) = max_a pi(s,a) - min_a pi(s,a)
// reaches the threshold beta, crafting toward the least-preferred action.
// Uniform (every step) and clean baselines share the same episode loop.

#include <cstdint>
#include <optional>
#include <vector>

#include "rlattack/craft.hpp"

namespace rlattack {

double preference(const AgentPolicy& agent, const Observation& obs);

inline bool should_attack(double c, double beta) { return c >= beta; }

struct AttackSchedule {
  std::vector<std::uint8_t> b;     // 1 where the observation was perturbed
  std::vector<double> preference;  // c on the clean observation at each step
  double beta = 0.0;
  std::optional<int> budget;
  double attack_rate = 0.0;

  int attacks() const;
};

struct TimedEpisodeResult {
  EpisodeRecord record;
  AttackSchedule schedule;
  std::vector<Perturbation> crafted;  // one per attacked step
  double clean_return = 0.0;
  std::uint64_t seed = 0;

  int crafts_succeeded() const;
};

EpisodeRecord run_clean_episode(const AgentPolicy& agent, const EnvConfig& env, std::uint64_t seed);

TimedEpisodeResult run_timed_episode(const AgentPolicy& agent, const EnvConfig& env, std::uint64_t seed, double beta,
                                     const CraftConfig& craft, std::optional<int> budget = std::nullopt);

TimedEpisodeResult run_uniform_episode(const AgentPolicy& agent, const EnvConfig& env, std::uint64_t seed,
                                       const CraftConfig& craft);

struct SweepPoint {
  double beta = 0.0;
  double mean_attack_rate = 0.0;    // mean of per-episode rates
  double pooled_attack_rate = 0.0;  // attacked steps / all steps
  double mean_return = 0.0;
  double mean_clean_return = 0.0;
  std::vector<TimedEpisodeResult> episodes;
};

// One point per beta, each over episodes_per_beta episodes with seeds drawn
// from a stream keyed by the beta's position in the list.
std::vector<SweepPoint> sweep_beta(const AgentPolicy& agent, const EnvConfig& env, const std::vector<double>& betas,
                                   int episodes_per_beta, const CraftConfig& craft, std::uint64_t seed,
                                   std::optional<int> budget = std::nullopt);

SweepPoint uniform_baseline(const AgentPolicy& agent, const EnvConfig& env, int episodes, const CraftConfig& craft,
                            std::uint64_t seed);

std::uint64_t sweep_episode_seed(std::uint64_t seed, std::size_t beta_index, int episode);

}  // namespace rlattack
