#include "rlattack/dynamics.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "rlattack/meta.hpp"
#include "rlattack/nn_io.hpp"
#include "rlattack/rng.hpp"

namespace rlattack {

TransitionDataset collect_transitions(const EnvConfig& env_cfg, const AgentPolicy* agent, int episodes,
                                      std::uint64_t seed) {
  if (episodes < 1) throw std::invalid_argument("collect_transitions: episodes must be at least 1");
  TransitionDataset data;
  data.env_kind = env_cfg.kind;
  data.frame_size = env_cfg.frame_size;
  data.action_count = env_cfg.action_count();
  Rng rng(derive_seed(seed, "transitions.policy"));
  for (int ep = 0; ep < episodes; ++ep) {
    const bool random_policy = agent == nullptr || ep % 2 == 0;
    Environment env =
        Environment::reset(env_cfg, derive_seed(seed, "transitions.env", static_cast<std::uint64_t>(ep)));
    while (!env.done()) {
      Observation obs = env.observation();
      const int a = random_policy ? uniform_int(rng, env.action_count()) : act_greedy(*agent, obs);
      env.step(a);
      data.samples.push_back({std::move(obs), a, env.render()});
    }
  }
  return data;
}

void DynamicsTrainConfig::validate() const {
  if (hidden < 1 || epochs < 0 || batch_size < 1) throw std::invalid_argument("dynamics: bad sizes");
  if (!(lr > 0.0)) throw std::invalid_argument("dynamics: lr must be positive");
  if (!(heldout_fraction >= 0.0 && heldout_fraction < 1.0)) {
    throw std::invalid_argument("dynamics: heldout_fraction must be in [0, 1)");
  }
}

namespace {

void fill_input(Eigen::Ref<Eigen::VectorXd> col, const Observation& obs, int action, int action_count) {
  col.head(obs.size()) = obs;
  col.tail(action_count).setZero();
  col(obs.size() + action) = 1.0;
}

}  // namespace

DynamicsModel train_dynamics(const TransitionDataset& data, const DynamicsTrainConfig& cfg) {
  cfg.validate();
  if (data.samples.empty()) throw std::invalid_argument("train_dynamics: empty dataset");
  const int px = data.frame_size * data.frame_size;
  const int obs_size = kStackDepth * px;
  const int in_dim = obs_size + data.action_count;

  DynamicsModel model;
  model.env_kind = data.env_kind;
  model.frame_size = data.frame_size;
  model.action_count = data.action_count;
  const std::vector<int> dims{in_dim, cfg.hidden, px};
  const std::vector<Activation> acts{Activation::relu, Activation::identity};
  model.net = init_network(std::span<const int>(dims), std::span<const Activation>(acts),
                           derive_seed(cfg.seed, "dynamics.init"));

  std::vector<std::size_t> order(data.samples.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(cfg.seed, "dynamics.shuffle"));
  auto shuffle = [&](std::vector<std::size_t>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[static_cast<std::size_t>(uniform_int(rng, static_cast<int>(i)))]);
    }
  };
  shuffle(order);
  const std::size_t heldout =
      std::min(order.size() - 1, static_cast<std::size_t>(cfg.heldout_fraction * static_cast<double>(order.size())));
  std::vector<std::size_t> train(order.begin(), order.end() - static_cast<std::ptrdiff_t>(heldout));
  std::vector<TransitionSample> test;
  for (std::size_t i = order.size() - heldout; i < order.size(); ++i) test.push_back(data.samples[order[i]]);

  for (const TransitionSample& s : data.samples) {
    if (s.obs.size() != obs_size || s.next.size() != px || s.action < 0 || s.action >= data.action_count) {
      throw std::invalid_argument("train_dynamics: sample shape does not match dataset");
    }
  }

  Eigen::MatrixXd xs(in_dim, cfg.batch_size);
  Eigen::MatrixXd ys(px, cfg.batch_size);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle(train);
    for (std::size_t start = 0; start < train.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const int n = static_cast<int>(std::min<std::size_t>(cfg.batch_size, train.size() - start));
      if (xs.cols() != n) {
        xs.resize(in_dim, n);
        ys.resize(px, n);
      }
      for (int j = 0; j < n; ++j) {
        const TransitionSample& s = data.samples[train[start + static_cast<std::size_t>(j)]];
        fill_input(xs.col(j), s.obs, s.action, data.action_count);
        ys.col(j) = s.next;
      }
      const Eigen::MatrixXd pred = forward_batch(model.net, xs);
      const Eigen::MatrixXd grad = (pred - ys) / static_cast<double>(n);
      try {
        BatchGradient<double> g = backward_batch(model.net, xs, grad);
        sgd_step(model.net, g.params, cfg.lr);
      } catch (const std::exception& e) {
        throw std::runtime_error("dynamics training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
      }
    }
  }
  model.heldout_mse = frame_mse(model, test.empty() ? data.samples : test);
  return model;
}

double frame_mse(const DynamicsModel& model, const std::vector<TransitionSample>& samples) {
  if (samples.empty()) return 0.0;
  double total = 0.0;
  for (const TransitionSample& s : samples) {
    total += (predict_next_frame(model, s.obs, s.action) - s.next).squaredNorm();
  }
  return total / (static_cast<double>(samples.size()) * static_cast<double>(model.frame_size * model.frame_size));
}

Frame predict_next_frame(const DynamicsModel& model, const Observation& obs, int action) {
  if (action < 0 || action >= model.action_count) throw std::invalid_argument("predict: invalid action");
  Eigen::VectorXd x(obs.size() + model.action_count);
  fill_input(x, obs, action, model.action_count);
  return forward(model.net, x).cwiseMax(0.0).cwiseMin(1.0);
}

Observation predict(const DynamicsModel& model, const Observation& start, const ActionSequence& actions) {
  if (actions.empty()) throw std::invalid_argument("predict: action sequence must be non-empty");
  Observation s = start;
  for (int a : actions) s = shift_in(s, predict_next_frame(model, s, a), model.frame_size);
  return s;
}

Eigen::MatrixXd predict_batch(const DynamicsModel& model, const Observation& start,
                              const std::vector<ActionSequence>& sequences) {
  const Eigen::Index obs_size = start.size();
  const int px = model.frame_size * model.frame_size;
  const int n = static_cast<int>(sequences.size());
  Eigen::MatrixXd states = start.replicate(1, n);
  if (n == 0) return states;
  const std::size_t horizon = sequences.front().size();
  Eigen::MatrixXd xs(obs_size + model.action_count, n);
  for (std::size_t t = 0; t < horizon; ++t) {
    xs.topRows(obs_size) = states;
    xs.bottomRows(model.action_count).setZero();
    for (int j = 0; j < n; ++j) {
      if (sequences[static_cast<std::size_t>(j)].size() != horizon) {
        throw std::invalid_argument("predict_batch: sequences differ in length");
      }
      const int a = sequences[static_cast<std::size_t>(j)][t];
      if (a < 0 || a >= model.action_count) throw std::invalid_argument("predict_batch: invalid action");
      xs(obs_size + a, j) = 1.0;
    }
    const Eigen::MatrixXd next = forward_batch(model.net, xs).cwiseMax(0.0).cwiseMin(1.0);
    const Eigen::Index keep = obs_size - px;
    states.topRows(keep) = states.bottomRows(keep).eval();
    states.bottomRows(px) = next;
  }
  return states;
}

RolloutResult oracle_rollout(const SnapshotBlob& blob, const ActionSequence& actions) {
  Environment env = Environment::restore(blob);
  RolloutResult res;
  for (int a : actions) {
    if (env.done()) {
      res.truncated = true;
      break;
    }
    env.step(a);
    ++res.steps_applied;
  }
  res.obs = env.observation();
  return res;
}

double distance(const Observation& a, const Observation& b) {
  if (a.size() != b.size()) throw std::invalid_argument("distance: shape mismatch");
  return (a - b).norm();
}

double normalized_distance(const Observation& a, const Observation& b) {
  if (a.size() == 0) throw std::invalid_argument("normalized_distance: empty observation");
  return distance(a, b) / static_cast<double>(a.size());
}

void save_dynamics(const DynamicsModel& model, const std::filesystem::path& stem) {
  save_network(model.net, stem.string() + ".net");
  save_meta({{"env_kind", std::string(to_string(model.env_kind))},
             {"frame_size", std::to_string(model.frame_size)},
             {"action_count", std::to_string(model.action_count)},
             {"heldout_mse", format_double(model.heldout_mse)}},
            stem.string() + ".meta");
}

DynamicsModel load_dynamics(const std::filesystem::path& stem) {
  DynamicsModel model;
  model.net = load_network(stem.string() + ".net");
  const MetaMap meta = load_meta(stem.string() + ".meta");
  model.env_kind = parse_env_kind(meta_get(meta, "env_kind"));
  model.frame_size = std::stoi(meta_get(meta, "frame_size"));
  model.action_count = std::stoi(meta_get(meta, "action_count"));
  model.heldout_mse = parse_double(meta_get(meta, "heldout_mse"));
  const int px = model.frame_size * model.frame_size;
  if (model.net.input_dim() != kStackDepth * px + model.action_count || model.net.output_dim() != px) {
    throw std::runtime_error("dynamics model shape does not match its metadata");
  }
  return model;
}

}  // namespace rlattack
