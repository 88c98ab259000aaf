#pragma once

// Future-state prediction. A learned one-step model maps a frame stack plus a
// one-hot action to the next frame; rolling it out H steps (shifting each
// prediction into the stack) predicts the state reached by an action
// sequence. oracle_rollout answers the same question exactly by replaying
// the real environment from a snapshot.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "rlattack/agent.hpp"
#include "rlattack/env.hpp"
#include "rlattack/nn.hpp"

namespace rlattack {

using ActionSequence = std::vector<int>;

struct TransitionSample {
  Observation obs;
  int action = 0;
  Frame next;
};

struct TransitionDataset {
  EnvKind env_kind = EnvKind::catch_game;
  int frame_size = 0;
  int action_count = 0;
  std::vector<TransitionSample> samples;
};

// Even-indexed episodes follow a uniform-random policy; odd-indexed episodes
// follow the agent's greedy policy (all random when agent is null).
TransitionDataset collect_transitions(const EnvConfig& env, const AgentPolicy* agent, int episodes,
                                      std::uint64_t seed);

struct DynamicsTrainConfig {
  int hidden = 128;
  int epochs = 40;
  double lr = 0.05;
  int batch_size = 32;
  double heldout_fraction = 0.2;
  std::uint64_t seed = 1;

  void validate() const;
};

struct DynamicsModel {
  Network net;
  EnvKind env_kind = EnvKind::catch_game;
  int frame_size = 0;
  int action_count = 0;
  double heldout_mse = 0.0;
};

DynamicsModel train_dynamics(const TransitionDataset& data, const DynamicsTrainConfig& cfg);

// Mean squared per-pixel error of clipped one-step predictions.
double frame_mse(const DynamicsModel& model, const std::vector<TransitionSample>& samples);

Frame predict_next_frame(const DynamicsModel& model, const Observation& obs, int action);
Observation predict(const DynamicsModel& model, const Observation& start, const ActionSequence& actions);

// Batched rollout: column j is the predicted final state of sequences[j].
// All sequences must have the same length.
Eigen::MatrixXd predict_batch(const DynamicsModel& model, const Observation& start,
                              const std::vector<ActionSequence>& sequences);

struct RolloutResult {
  Observation obs;
  bool truncated = false;  // the episode ended before every action was applied
  int steps_applied = 0;
};

RolloutResult oracle_rollout(const SnapshotBlob& blob, const ActionSequence& actions);

double distance(const Observation& a, const Observation& b);
double normalized_distance(const Observation& a, const Observation& b);

void save_dynamics(const DynamicsModel& model, const std::filesystem::path& stem);
DynamicsModel load_dynamics(const std::filesystem::path& stem);

}  // namespace rlattack
