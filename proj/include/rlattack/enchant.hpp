#pragma once

// Enchanting attack: lure the agent to a target state by planning an action
// sequence with the cross-entropy method against a state predictor, crafting
// a perturbation that makes the agent take the plan's first action, stepping
// the real environment, and replanning from the state actually reached.

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "rlattack/craft.hpp"
#include "rlattack/dynamics.hpp"

namespace rlattack {

// Final-state predictor used by the planner. Implementations see only the
// current observation and a snapshot owned by the attacker, never the agent.
class StatePredictor {
 public:
  virtual ~StatePredictor() = default;
  virtual std::string_view name() const = 0;
  // Column j: predicted state after applying sequences[j] from the start.
  virtual Eigen::MatrixXd final_states(const Observation& start, const SnapshotBlob& blob,
                                       const std::vector<ActionSequence>& sequences) const = 0;
};

class OraclePredictor final : public StatePredictor {
 public:
  std::string_view name() const override { return "oracle"; }
  Eigen::MatrixXd final_states(const Observation& start, const SnapshotBlob& blob,
                               const std::vector<ActionSequence>& sequences) const override;
};

class LearnedPredictor final : public StatePredictor {
 public:
  explicit LearnedPredictor(DynamicsModel model) : model_(std::move(model)) {}
  std::string_view name() const override { return "learned"; }
  Eigen::MatrixXd final_states(const Observation& start, const SnapshotBlob& blob,
                               const std::vector<ActionSequence>& sequences) const override;
  const DynamicsModel& model() const { return model_; }

 private:
  DynamicsModel model_;
};

struct CEMConfig {
  int samples = 200;   // N
  int elites = 40;     // K
  int iterations = 5;  // J
  int horizon = 1;     // H
  bool exhaustive = false;
  double smoothing = 1.0;  // additive (Laplace) smoothing on elite counts

  void validate() const;
};

struct ActionPlan {
  ActionSequence actions;
  Observation predicted_final;
  double predicted_distance = 0.0;
  Eigen::MatrixXd sampler;  // [horizon x actions], each row a categorical
  std::vector<double> best_per_iteration;
  bool enumerated = false;
};

ActionPlan cem_plan(const StatePredictor& predictor, const Observation& start, const SnapshotBlob& blob,
                    const Observation& goal, const CEMConfig& cfg, int action_count, std::uint64_t seed);

struct TargetState {
  Observation obs;
  ActionSequence actions;  // the actions actually applied
  bool truncated = false;
};

// Restores the snapshot and applies H uniform-random actions. For noisy
// environments the noise stream is reseeded from `seed`, so the target is
// reached under a noise realisation independent of the attack's.
TargetState synthesize_target(const SnapshotBlob& blob, int horizon, std::uint64_t seed);

struct EnchantStep {
  int planned = 0;
  bool craft_success = false;
  int realized = 0;
  double predicted_distance = 0.0;
};

struct EnchantOutcome {
  std::vector<EnchantStep> steps;
  Observation final_obs;
  double final_distance = 0.0;
  bool success = false;
  bool truncated = false;
  int horizon = 0;
  int t_start = 0;

  double craft_success_rate() const;
};

// Runs for as many steps as the target took to reach (at most horizon),
// replanning each step with the remaining horizon.
EnchantOutcome run_enchant_attack(const AgentPolicy& agent, const SnapshotBlob& blob, const TargetState& target,
                                  int horizon, const StatePredictor& predictor, const CEMConfig& cem,
                                  const CraftConfig& craft, double tolerance, std::uint64_t seed);

struct EnchantTrial {
  int horizon = 0;
  double start_fraction = 0.0;
  int trial = 0;
  std::uint64_t seed = 0;
  EnchantOutcome outcome;
};

struct CurvePoint {
  int horizon = 0;
  int attempts = 0;
  int successes = 0;
  double success_rate() const { return attempts ? static_cast<double>(successes) / attempts : 0.0; }
};

struct SuccessCurve {
  double episode_length = 0.0;  // L
  std::vector<EnchantTrial> trials;
  std::vector<CurvePoint> points;
  std::vector<std::string> skipped;
};

struct CurveConfig {
  std::vector<int> horizons{1, 2, 4, 6, 8, 10, 12};
  std::vector<double> start_fractions{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  int trials = 4;
  int length_episodes = 10;
  CEMConfig cem;
  CraftConfig craft;
  double tolerance = 0.01;
};

double estimate_episode_length(const AgentPolicy& agent, const EnvConfig& env, int episodes, std::uint64_t seed);

// Advances a fresh episode under the agent's greedy policy for `steps` steps.
// Returns false when the episode ends first.
bool advance_to_start(const AgentPolicy& agent, const EnvConfig& env, std::uint64_t seed, int steps,
                      Environment& out);

SuccessCurve success_curve(const AgentPolicy& agent, const EnvConfig& env, const StatePredictor& predictor,
                           const CurveConfig& cfg, std::uint64_t seed);

// Tolerance calibration: the given quantile of the non-zero normalized
// distances between two independent random-action targets synthesized from
// the same start, over the curve's start grid and horizons.
double calibrate_tolerance(const AgentPolicy& agent, const EnvConfig& env, const CurveConfig& cfg, int pairs_per_cell,
                           double quantile, std::uint64_t seed);

std::uint64_t enchant_episode_seed(std::uint64_t seed, std::size_t start_index, int trial);
std::uint64_t enchant_target_seed(std::uint64_t seed, std::size_t start_index, std::size_t horizon_index, int trial);

}  // namespace rlattack
