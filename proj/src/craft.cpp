#include "rlattack/craft.hpp"

#include <stdexcept>

namespace rlattack {

void CraftConfig::validate() const {
  if (!(epsilon >= 0.0)) throw std::invalid_argument("craft: epsilon must be non-negative");
  if (max_iters < 1) throw std::invalid_argument("craft: max_iters must be at least 1");
  if (step_size && !(*step_size > 0.0)) throw std::invalid_argument("craft: step_size must be positive");
}

Observation apply_perturbation(const Observation& obs, const Perturbation& p) {
  return (obs + p.delta).cwiseMax(0.0).cwiseMin(1.0);
}

namespace {

Perturbation finish(const AgentPolicy& agent, const Observation& obs, Perturbation p) {
  p.linf = p.delta.size() ? p.delta.cwiseAbs().maxCoeff() : 0.0;
  p.success = act_greedy(agent, apply_perturbation(obs, p)) == p.target;
  return p;
}

}  // namespace

Perturbation craft_targeted(const AgentPolicy& agent, const Observation& obs, int target, const CraftConfig& cfg) {
  cfg.validate();
  if (target < 0 || target >= agent.action_count) throw std::invalid_argument("craft: target action out of range");
  Perturbation p;
  p.target = target;
  p.delta = Eigen::VectorXd::Zero(obs.size());
  if (act_greedy(agent, obs) == target || cfg.epsilon == 0.0) return finish(agent, obs, std::move(p));

  const double eps = cfg.epsilon;
  const double step = cfg.effective_step();
  const Eigen::VectorXd lower = (-obs).cwiseMax(-eps);
  const Eigen::VectorXd upper = (Eigen::VectorXd::Ones(obs.size()) - obs).cwiseMin(eps);
  for (int it = 1; it <= cfg.max_iters; ++it) {
    const Eigen::VectorXd g = target_loss_input_grad(agent, obs + p.delta, target);
    if (g.isZero(0.0)) break;
    p.delta -= step * g.cwiseSign();
    p.delta = p.delta.cwiseMax(lower).cwiseMin(upper);
    p.iters_used = it;
    if (act_greedy(agent, apply_perturbation(obs, p)) == target) break;
  }
  return finish(agent, obs, std::move(p));
}

Perturbation craft_untargeted(const AgentPolicy& agent, const Observation& obs, const CraftConfig& cfg) {
  const Eigen::VectorXd dist = action_dist(agent, obs);
  const int clean = argmax_index(dist);
  const int least = argmin_index(dist);
  Perturbation p;
  if (least == clean) {
    cfg.validate();
    p.target = least;
    p.delta = Eigen::VectorXd::Zero(obs.size());
    p.success = false;
    return p;
  }
  p = craft_targeted(agent, obs, least, cfg);
  p.success = act_greedy(agent, apply_perturbation(obs, p)) != clean;
  return p;
}

}  // namespace rlattack
