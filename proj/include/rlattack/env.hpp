#pragma once

// Small pixel games with a 4-frame observation stack.
//
// catch:    a ball falls one row per step from a random top column with a
//           per-episode horizontal drift in {-1, 0, +1} (reflecting off the
//           side walls); a 3-pixel paddle sits on the bottom row. Reaching the
//           bottom row ends the episode with +1 if the paddle covers the ball,
//           -1 otherwise. Actions: 0 left, 1 stay, 2 right.
// gridgoal: an agent cell moves on the grid toward a goal cell. +1 and done on
//           reaching the goal, 0 and done at max_steps. Actions: 0 up, 1 down,
//           2 left, 3 right. With p_noise > 0 the chosen action is replaced by
//           a uniformly random one with probability p_noise.

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "rlattack/rng.hpp"

namespace rlattack {

using Frame = Eigen::VectorXd;        // F*F, row-major
using Observation = Eigen::VectorXd;  // 4*F*F, oldest frame first

inline constexpr int kStackDepth = 4;

enum class EnvKind { catch_game, gridgoal };

std::string_view to_string(EnvKind kind);
EnvKind parse_env_kind(std::string_view name);

struct EnvConfig {
  EnvKind kind = EnvKind::catch_game;
  int frame_size = 12;
  double p_noise = 0.0;  // gridgoal only
  int max_steps = 64;

  void validate() const;
  int action_count() const;
  int frame_pixels() const { return frame_size * frame_size; }
  int observation_size() const { return kStackDepth * frame_pixels(); }
};

struct SnapshotBlob {
  std::string bytes;
  friend bool operator==(const SnapshotBlob&, const SnapshotBlob&) = default;
};

struct StepResult {
  double reward = 0.0;
  bool done = false;
};

// Game variables. Fields not used by the active kind stay zero.
struct GameState {
  int ball_row = 0;
  int ball_col = 0;
  int drift = 0;
  int paddle = 0;  // paddle centre column; covers paddle-1 .. paddle+1
  int agent_row = 0;
  int agent_col = 0;
  int goal_row = 0;
  int goal_col = 0;
  friend bool operator==(const GameState&, const GameState&) = default;
};

class Environment {
 public:
  static Environment reset(const EnvConfig& config, std::uint64_t seed);
  static Environment restore(const SnapshotBlob& blob);

  const EnvConfig& config() const { return config_; }
  const GameState& game() const { return game_; }
  int action_count() const { return config_.action_count(); }
  int t() const { return t_; }
  bool done() const { return done_; }

  Frame render() const;
  Observation observation() const;
  StepResult step(int action);
  SnapshotBlob snapshot() const;

  // Replaces the noise stream; used to draw an independent noise realisation
  // from an otherwise identical state.
  void reseed_noise(std::uint64_t seed) { rng_.seed(seed); }

  friend bool operator==(const Environment& a, const Environment& b);

 private:
  Environment() = default;
  void push_frame(Frame frame);

  EnvConfig config_;
  GameState game_;
  int t_ = 0;
  bool done_ = false;
  Rng rng_;
  std::array<Frame, kStackDepth> frames_;
};

// Move the paddle toward the ball column.
int catch_chase_action(const Environment& env);

struct EpisodeRecord {
  std::vector<Observation> observations;  // observation seen before each action
  std::vector<int> actions;
  std::vector<double> rewards;
  double total_return = 0.0;
  int length = 0;
};

using PolicyFn = std::function<int(const Environment&, const Observation&)>;

EpisodeRecord run_episode(const EnvConfig& config, std::uint64_t seed, const PolicyFn& policy,
                          bool keep_observations = false);

// Frame view helpers.
Frame stack_frame(const Observation& obs, int index, int frame_size);
Observation shift_in(const Observation& obs, const Frame& next, int frame_size);

}  // namespace rlattack
