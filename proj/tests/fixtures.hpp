#pragma once

// Cheap agents for tests that need an attackable policy without training.

#include <random>
#include <vector>

#include "rlattack/agent.hpp"

namespace fixtures {

// Q(x) = W x + b with W, b drawn from N(0, scale^2).
inline rlattack::AgentPolicy linear_agent(int inputs, int actions, double scale, std::uint64_t seed,
                                          rlattack::AgentKind kind = rlattack::AgentKind::value_based) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, scale);
  const int outputs = kind == rlattack::AgentKind::value_based ? actions : actions + 1;
  rlattack::DenseLayer<double> layer;
  layer.weight = Eigen::MatrixXd::NullaryExpr(outputs, inputs, [&] { return n(rng); });
  layer.bias = Eigen::VectorXd::NullaryExpr(outputs, [&] { return n(rng); });
  layer.activation = rlattack::Activation::identity;
  rlattack::AgentPolicy agent;
  agent.net = rlattack::Network({layer});
  agent.kind = kind;
  agent.action_count = actions;
  return agent;
}

inline rlattack::AgentPolicy linear_agent_for(const rlattack::EnvConfig& env, double scale, std::uint64_t seed) {
  rlattack::AgentPolicy a = linear_agent(env.observation_size(), env.action_count(), scale, seed);
  a.env_kind = env.kind;
  return a;
}

inline Eigen::VectorXd uniform_obs(int size, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return Eigen::VectorXd::NullaryExpr(size, [&] { return u(rng); });
}

}  // namespace fixtures
