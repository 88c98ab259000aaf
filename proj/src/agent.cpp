#include "rlattack/agent.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "rlattack/meta.hpp"
#include "rlattack/nn_io.hpp"
#include "rlattack/rng.hpp"

namespace rlattack {

std::string_view to_string(AgentKind kind) {
  return kind == AgentKind::value_based ? "value_based" : "policy_gradient";
}

AgentKind parse_agent_kind(std::string_view name) {
  if (name == "value_based") return AgentKind::value_based;
  if (name == "policy_gradient") return AgentKind::policy_gradient;
  throw std::invalid_argument("unknown agent kind '" + std::string(name) + "'");
}

void AgentPolicy::validate(int observation_size) const {
  if (action_count < 2) throw std::invalid_argument("agent needs at least two actions");
  if (net.input_dim() != observation_size) {
    throw std::invalid_argument("agent input dim does not match observation size");
  }
  const int expected = kind == AgentKind::value_based ? action_count : action_count + 1;
  if (net.output_dim() != expected) throw std::invalid_argument("agent output dim does not match its kind");
  if (!(temperature > 0.0)) throw std::invalid_argument("agent temperature must be positive");
}

void TrainConfig::validate() const {
  if (episodes < 0) throw std::invalid_argument("train: episodes must be non-negative");
  if (!(lr > 0.0)) throw std::invalid_argument("train: lr must be positive");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("train: gamma must be in (0, 1]");
  if (hidden < 1) throw std::invalid_argument("train: hidden must be positive");
  if (replay_capacity < batch_size || batch_size < 1) throw std::invalid_argument("train: bad replay sizes");
  if (target_sync < 1) throw std::invalid_argument("train: target_sync must be positive");
  if (entropy_weight < 0.0 || value_weight < 0.0) throw std::invalid_argument("train: negative loss weight");
  if (episodes_per_update < 1) throw std::invalid_argument("train: episodes_per_update must be positive");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw std::invalid_argument("train: gae_lambda must be in [0, 1]");
}

Eigen::VectorXd action_scores(const AgentPolicy& agent, const Observation& obs) {
  Eigen::VectorXd out = forward(agent.net, obs);
  return out.head(agent.action_count);
}

Eigen::VectorXd action_dist(const AgentPolicy& agent, const Observation& obs) {
  const double t = agent.kind == AgentKind::value_based ? agent.temperature : 1.0;
  return softmax(action_scores(agent, obs), t);
}

int act_greedy(const AgentPolicy& agent, const Observation& obs) { return argmax_index(action_dist(agent, obs)); }

Eigen::VectorXd target_loss_input_grad(const AgentPolicy& agent, const Observation& obs, int target,
                                       double* loss) {
  if (target < 0 || target >= agent.action_count) throw std::invalid_argument("target action out of range");
  const double t = agent.kind == AgentKind::value_based ? agent.temperature : 1.0;
  const Eigen::VectorXd p = softmax(action_scores(agent, obs), t);
  if (loss) *loss = -std::log(std::max(p(target), 1e-300));
  Eigen::VectorXd g = Eigen::VectorXd::Zero(agent.net.output_dim());
  g.head(agent.action_count) = p / t;
  g(target) -= 1.0 / t;
  return backward(agent.net, obs, g).input_grad;
}

AgentPolicy make_agent(const EnvConfig& env, AgentKind kind, int hidden, std::uint64_t seed) {
  const int actions = env.action_count();
  const std::vector<int> dims{env.observation_size(), hidden,
                              kind == AgentKind::value_based ? actions : actions + 1};
  const std::vector<Activation> acts{Activation::relu, Activation::identity};
  AgentPolicy agent;
  agent.net = init_network(std::span<const int>(dims), std::span<const Activation>(acts), seed);
  agent.kind = kind;
  agent.action_count = actions;
  agent.env_kind = env.kind;
  agent.training_seed = seed;
  return agent;
}

namespace {

struct Transition {
  Eigen::VectorXf obs;
  Eigen::VectorXf next;
  int action = 0;
  float reward = 0.0f;
  bool done = false;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) { items_.reserve(capacity); }

  void push(Transition t) {
    if (items_.size() < capacity_) {
      items_.push_back(std::move(t));
    } else {
      items_[next_] = std::move(t);
    }
    next_ = (next_ + 1) % capacity_;
  }
  std::size_t size() const { return items_.size(); }
  const Transition& operator[](std::size_t i) const { return items_[i]; }

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<Transition> items_;
};

void rethrow_with_episode(const std::exception& e, int episode) {
  throw std::runtime_error("training diverged at episode " + std::to_string(episode) + ": " + e.what());
}

int sample_categorical(const Eigen::VectorXd& p, Rng& rng) {
  const double u = uniform01(rng);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    acc += p(i);
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(p.size() - 1);
}

}  // namespace

// One-step Q-learning with uniform replay, a periodically synced target
// network and a Huber (clipped) TD error.
AgentPolicy train_value_agent(const EnvConfig& env_cfg, const TrainConfig& cfg) {
  env_cfg.validate();
  cfg.validate();
  AgentPolicy agent = make_agent(env_cfg, AgentKind::value_based, cfg.hidden, derive_seed(cfg.seed, "dqn.init"));
  agent.training_seed = cfg.seed;
  Network target = agent.net;
  ReplayBuffer replay(static_cast<std::size_t>(cfg.replay_capacity));
  Rng rng(derive_seed(cfg.seed, "dqn.explore"));
  const int obs_size = env_cfg.observation_size();
  const int batch = cfg.batch_size;
  const double half = std::max(1.0, cfg.episodes / 2.0);
  long updates = 0;

  Eigen::MatrixXd xs(obs_size, batch);
  Eigen::MatrixXd next_xs(obs_size, batch);
  std::vector<std::size_t> idx(static_cast<std::size_t>(batch));

  for (int ep = 0; ep < cfg.episodes; ++ep) {
    try {
      const double frac = std::min(1.0, ep / half);
      const double epsilon = cfg.epsilon_start + (cfg.epsilon_end - cfg.epsilon_start) * frac;
      Environment env = Environment::reset(env_cfg, derive_seed(cfg.seed, "dqn.env", static_cast<std::uint64_t>(ep)));
      Observation obs = env.observation();
      while (!env.done()) {
        int action;
        if (uniform01(rng) < epsilon) {
          action = uniform_int(rng, agent.action_count);
        } else {
          action = argmax_index(forward(agent.net, obs));
        }
        const StepResult sr = env.step(action);
        Observation next = env.observation();
        replay.push({obs.cast<float>(), next.cast<float>(), action, static_cast<float>(sr.reward), sr.done});
        obs = std::move(next);

        if (replay.size() < static_cast<std::size_t>(std::max(cfg.warmup, batch))) continue;
        for (int b = 0; b < batch; ++b) {
          idx[b] = static_cast<std::size_t>(uniform_int(rng, static_cast<int>(replay.size())));
          xs.col(b) = replay[idx[b]].obs.cast<double>();
          next_xs.col(b) = replay[idx[b]].next.cast<double>();
        }
        const Eigen::MatrixXd q_next = forward_batch(target, next_xs);
        const Eigen::MatrixXd q = forward_batch(agent.net, xs);
        Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(agent.action_count, batch);
        for (int b = 0; b < batch; ++b) {
          const Transition& tr = replay[idx[b]];
          const double bootstrap = tr.done ? 0.0 : cfg.gamma * q_next.col(b).maxCoeff();
          const double td = q(tr.action, b) - (tr.reward + bootstrap);
          grad(tr.action, b) = std::clamp(td, -1.0, 1.0) / batch;
        }
        BatchGradient<double> g = backward_batch(agent.net, xs, grad);
        sgd_step(agent.net, g.params, cfg.lr);
        if (++updates % cfg.target_sync == 0) target = agent.net;
      }
    } catch (const std::exception& e) {
      rethrow_with_episode(e, ep);
    }
  }
  return agent;
}

// Episodic advantage actor-critic: a shared trunk with a softmax policy head
// and a scalar value head. Advantages are generalised advantage estimates
// over whole episodes; one SGD step per batch of episodes.
AgentPolicy train_pg_agent(const EnvConfig& env_cfg, const TrainConfig& cfg) {
  env_cfg.validate();
  cfg.validate();
  AgentPolicy agent = make_agent(env_cfg, AgentKind::policy_gradient, cfg.hidden, derive_seed(cfg.seed, "a2c.init"));
  agent.training_seed = cfg.seed;
  Rng rng(derive_seed(cfg.seed, "a2c.sample"));
  const int actions = agent.action_count;

  struct StepSample {
    Observation obs;
    int action;
    double reward;
    bool last;
  };
  std::vector<StepSample> steps;
  for (int ep = 0; ep < cfg.episodes; ++ep) {
    try {
      Environment env = Environment::reset(env_cfg, derive_seed(cfg.seed, "a2c.env", static_cast<std::uint64_t>(ep)));
      while (!env.done()) {
        Observation obs = env.observation();
        const int a = sample_categorical(action_dist(agent, obs), rng);
        const StepResult sr = env.step(a);
        steps.push_back({std::move(obs), a, sr.reward, sr.done});
      }
      const bool flush = (ep + 1) % cfg.episodes_per_update == 0 || ep + 1 == cfg.episodes;
      if (!flush) continue;

      const int n = static_cast<int>(steps.size());
      Eigen::MatrixXd xs(env_cfg.observation_size(), n);
      for (int t = 0; t < n; ++t) xs.col(t) = steps[t].obs;
      const Eigen::MatrixXd out = forward_batch(agent.net, xs);

      Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(actions + 1, n);
      double ret = 0.0;
      double gae = 0.0;
      double next_value = 0.0;
      for (int t = n - 1; t >= 0; --t) {
        if (steps[t].last) {
          ret = 0.0;
          gae = 0.0;
          next_value = 0.0;
        }
        const double value = out(actions, t);
        ret = steps[t].reward + cfg.gamma * ret;
        const double td = steps[t].reward + cfg.gamma * next_value - value;
        gae = td + cfg.gamma * cfg.gae_lambda * gae;
        next_value = value;

        const Eigen::VectorXd p = softmax(Eigen::VectorXd(out.col(t).head(actions)), 1.0);
        const double entropy = -(p.array() * p.array().max(1e-300).log()).sum();
        for (int j = 0; j < actions; ++j) {
          const double pg = (p(j) - (j == steps[t].action ? 1.0 : 0.0)) * gae;
          const double ent = cfg.entropy_weight * p(j) * (std::log(std::max(p(j), 1e-300)) + entropy);
          grad(j, t) = (pg + ent) / n;
        }
        grad(actions, t) = cfg.value_weight * (value - ret) / n;
      }
      steps.clear();
      BatchGradient<double> g = backward_batch(agent.net, xs, grad);
      sgd_step(agent.net, g.params, cfg.lr);
    } catch (const std::exception& e) {
      rethrow_with_episode(e, ep);
    }
  }
  return agent;
}

EvalSummary evaluate_greedy(const AgentPolicy& agent, const EnvConfig& env, int episodes, std::uint64_t seed) {
  EvalSummary s;
  s.episodes = episodes;
  for (int i = 0; i < episodes; ++i) {
    EpisodeRecord rec = run_episode(env, derive_seed(seed, "eval", static_cast<std::uint64_t>(i)),
                                    [&](const Environment&, const Observation& o) { return act_greedy(agent, o); });
    s.mean_return += rec.total_return;
    s.mean_length += rec.length;
  }
  if (episodes > 0) {
    s.mean_return /= episodes;
    s.mean_length /= episodes;
  }
  return s;
}

void save_agent(const AgentPolicy& agent, const std::filesystem::path& stem) {
  save_network(agent.net, stem.string() + ".net");
  MetaMap meta{{"kind", std::string(to_string(agent.kind))},
               {"action_count", std::to_string(agent.action_count)},
               {"temperature", format_double(agent.temperature)},
               {"env_kind", std::string(to_string(agent.env_kind))},
               {"training_seed", std::to_string(agent.training_seed)}};
  save_meta(meta, stem.string() + ".meta");
}

AgentPolicy load_agent(const std::filesystem::path& stem) {
  AgentPolicy agent;
  agent.net = load_network(stem.string() + ".net");
  const MetaMap meta = load_meta(stem.string() + ".meta");
  agent.kind = parse_agent_kind(meta_get(meta, "kind"));
  agent.action_count = std::stoi(meta_get(meta, "action_count"));
  agent.temperature = parse_double(meta_get(meta, "temperature"));
  agent.env_kind = parse_env_kind(meta_get(meta, "env_kind"));
  agent.training_seed = std::stoull(meta_get(meta, "training_seed"));
  return agent;
}

}  // namespace rlattack
