#pragma once

// L-infinity bounded adversarial perturbations of an agent's observation.
//
// The crafter runs signed-gradient descent on the cross-entropy between the
// agent's action distribution and a one-hot target action. After every step
// the perturbation is projected onto the epsilon box and the perturbed
// observation onto [0, 1]. It stops as soon as the greedy action equals the
// target.

#include <optional>

#include "rlattack/agent.hpp"

namespace rlattack {

struct CraftConfig {
  double epsilon = 0.007;
  int max_iters = 50;
  std::optional<double> step_size;  // defaults to epsilon / 10

  double effective_step() const { return step_size.value_or(epsilon / 10.0); }
  void validate() const;
};

struct Perturbation {
  Eigen::VectorXd delta;
  double linf = 0.0;
  bool success = false;
  int iters_used = 0;
  int target = 0;
};

// obs + delta, clamped to [0, 1] against rounding.
Observation apply_perturbation(const Observation& obs, const Perturbation& p);

Perturbation craft_targeted(const AgentPolicy& agent, const Observation& obs, int target, const CraftConfig& cfg);

// Targets the least-preferred action (lowest index on ties); success means the
// greedy action differs from the clean greedy action.
Perturbation craft_untargeted(const AgentPolicy& agent, const Observation& obs, const CraftConfig& cfg);

}  // namespace rlattack
