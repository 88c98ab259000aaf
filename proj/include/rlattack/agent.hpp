#pragma once

// The two attacked agent families.
//
// value_based:     network outputs Q(s, .) over action_count actions; the
//                  action distribution is softmax(Q / T).
// policy_gradient: network outputs action_count policy logits followed by one
//                  state-value scalar; the distribution is softmax(logits).

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "rlattack/env.hpp"
#include "rlattack/nn.hpp"

namespace rlattack {

enum class AgentKind { value_based, policy_gradient };

std::string_view to_string(AgentKind kind);
AgentKind parse_agent_kind(std::string_view name);

struct AgentPolicy {
  Network net;
  AgentKind kind = AgentKind::value_based;
  int action_count = 0;
  double temperature = 1.0;
  EnvKind env_kind = EnvKind::catch_game;
  std::uint64_t training_seed = 0;

  void validate(int observation_size) const;
};

struct TrainConfig {
  int episodes = 3000;
  double lr = 0.01;
  double gamma = 0.99;
  int hidden = 64;
  // value_based
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  int replay_capacity = 10000;
  int batch_size = 32;
  int target_sync = 250;
  int warmup = 256;
  // policy_gradient
  double entropy_weight = 0.01;
  double value_weight = 0.5;
  int episodes_per_update = 8;
  double gae_lambda = 0.9;
  std::uint64_t seed = 1;

  void validate() const;
};

// Raw head used for the distribution: Q for value agents, logits for policy agents.
Eigen::VectorXd action_scores(const AgentPolicy& agent, const Observation& obs);
Eigen::VectorXd action_dist(const AgentPolicy& agent, const Observation& obs);
int act_greedy(const AgentPolicy& agent, const Observation& obs);

// Gradient with respect to the observation of the cross-entropy between
// action_dist(agent, obs) and the one-hot target. The loss value is written
// to *loss when non-null.
Eigen::VectorXd target_loss_input_grad(const AgentPolicy& agent, const Observation& obs, int target,
                                       double* loss = nullptr);

AgentPolicy train_value_agent(const EnvConfig& env, const TrainConfig& cfg);
AgentPolicy train_pg_agent(const EnvConfig& env, const TrainConfig& cfg);

// An untrained network of the right shape for the kind.
AgentPolicy make_agent(const EnvConfig& env, AgentKind kind, int hidden, std::uint64_t seed);

struct EvalSummary {
  double mean_return = 0.0;
  double mean_length = 0.0;
  int episodes = 0;
};

EvalSummary evaluate_greedy(const AgentPolicy& agent, const EnvConfig& env, int episodes, std::uint64_t seed);

// <stem>.net holds the network; <stem>.meta holds key=value lines.
void save_agent(const AgentPolicy& agent, const std::filesystem::path& stem);
AgentPolicy load_agent(const std::filesystem::path& stem);

}  // namespace rlattack
