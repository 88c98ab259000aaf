#include "rlattack/env.hpp"

#include <algorithm>
#include <cstdlib>
#include <sstream>
#include <stdexcept>

#include "rlattack/bytes.hpp"

namespace rlattack {

namespace {

constexpr char kSnapshotMagic[] = "RLAL-ENV";
constexpr std::uint32_t kSnapshotVersion = 1;

std::uint64_t checksum(const std::string& bytes) { return fnv1a64(bytes); }

}  // namespace

std::string_view to_string(EnvKind kind) {
  switch (kind) {
    case EnvKind::catch_game:
      return "catch";
    case EnvKind::gridgoal:
      return "gridgoal";
  }
  return "unknown";
}

EnvKind parse_env_kind(std::string_view name) {
  if (name == "catch") return EnvKind::catch_game;
  if (name == "gridgoal") return EnvKind::gridgoal;
  throw std::invalid_argument("unknown environment kind '" + std::string(name) + "'");
}

void EnvConfig::validate() const {
  if (frame_size < 4 || frame_size > 64) throw std::invalid_argument("frame_size must be in [4, 64]");
  if (!(p_noise >= 0.0 && p_noise <= 1.0)) throw std::invalid_argument("p_noise must be in [0, 1]");
  if (max_steps < 1) throw std::invalid_argument("max_steps must be positive");
}

int EnvConfig::action_count() const { return kind == EnvKind::catch_game ? 3 : 4; }

Environment Environment::reset(const EnvConfig& config, std::uint64_t seed) {
  config.validate();
  Environment env;
  env.config_ = config;
  env.rng_.seed(seed);
  const int f = config.frame_size;
  if (config.kind == EnvKind::catch_game) {
    env.game_.ball_row = 0;
    env.game_.ball_col = uniform_int(env.rng_, f);
    env.game_.drift = uniform_int(env.rng_, 3) - 1;
    env.game_.paddle = f / 2;
  } else {
    const int agent = uniform_int(env.rng_, f * f);
    int goal = uniform_int(env.rng_, f * f - 1);
    if (goal >= agent) ++goal;
    env.game_.agent_row = agent / f;
    env.game_.agent_col = agent % f;
    env.game_.goal_row = goal / f;
    env.game_.goal_col = goal % f;
  }
  const Frame first = env.render();
  env.frames_.fill(first);
  return env;
}

Frame Environment::render() const {
  const int f = config_.frame_size;
  Frame frame = Frame::Zero(f * f);
  if (config_.kind == EnvKind::catch_game) {
    for (int c = game_.paddle - 1; c <= game_.paddle + 1; ++c) frame((f - 1) * f + c) = 1.0;
    frame(game_.ball_row * f + game_.ball_col) = 1.0;
  } else {
    frame(game_.goal_row * f + game_.goal_col) = 0.5;
    frame(game_.agent_row * f + game_.agent_col) = 1.0;
  }
  return frame;
}

Observation Environment::observation() const {
  const int px = config_.frame_pixels();
  Observation obs(kStackDepth * px);
  for (int i = 0; i < kStackDepth; ++i) obs.segment(i * px, px) = frames_[i];
  return obs;
}

void Environment::push_frame(Frame frame) {
  std::rotate(frames_.begin(), frames_.begin() + 1, frames_.end());
  frames_.back() = std::move(frame);
}

StepResult Environment::step(int action) {
  if (done_) throw std::logic_error("step called on a finished episode");
  if (action < 0 || action >= action_count()) {
    throw std::invalid_argument("invalid action " + std::to_string(action));
  }
  const int f = config_.frame_size;
  StepResult result;
  ++t_;
  if (config_.kind == EnvKind::catch_game) {
    game_.paddle = std::clamp(game_.paddle + action - 1, 1, f - 2);
    game_.ball_row += 1;
    game_.ball_col += game_.drift;
    if (game_.ball_col < 0) {
      game_.ball_col = -game_.ball_col;
      game_.drift = -game_.drift;
    } else if (game_.ball_col > f - 1) {
      game_.ball_col = 2 * (f - 1) - game_.ball_col;
      game_.drift = -game_.drift;
    }
    if (game_.ball_row == f - 1) {
      result.done = true;
      result.reward = std::abs(game_.ball_col - game_.paddle) <= 1 ? 1.0 : -1.0;
    }
  } else {
    if (config_.p_noise > 0.0 && uniform01(rng_) < config_.p_noise) {
      action = uniform_int(rng_, 4);
    }
    switch (action) {
      case 0:
        game_.agent_row = std::max(game_.agent_row - 1, 0);
        break;
      case 1:
        game_.agent_row = std::min(game_.agent_row + 1, f - 1);
        break;
      case 2:
        game_.agent_col = std::max(game_.agent_col - 1, 0);
        break;
      default:
        game_.agent_col = std::min(game_.agent_col + 1, f - 1);
        break;
    }
    if (game_.agent_row == game_.goal_row && game_.agent_col == game_.goal_col) {
      result.done = true;
      result.reward = 1.0;
    }
  }
  if (!result.done && t_ >= config_.max_steps) result.done = true;
  done_ = result.done;
  push_frame(render());
  return result;
}

SnapshotBlob Environment::snapshot() const {
  ByteWriter w;
  w.raw(kSnapshotMagic, sizeof(kSnapshotMagic));
  w.u32(kSnapshotVersion);
  w.u8(static_cast<std::uint8_t>(config_.kind));
  w.i32(config_.frame_size);
  w.f64(config_.p_noise);
  w.i32(config_.max_steps);
  w.i32(t_);
  w.u8(done_ ? 1 : 0);
  for (int v : {game_.ball_row, game_.ball_col, game_.drift, game_.paddle, game_.agent_row,
                game_.agent_col, game_.goal_row, game_.goal_col}) {
    w.i32(v);
  }
  std::ostringstream rng_text;
  rng_text << rng_;
  w.str(rng_text.str());
  for (const Frame& frame : frames_) {
    for (Eigen::Index i = 0; i < frame.size(); ++i) w.f64(frame(i));
  }
  std::string body = w.take();
  ByteWriter trailer;
  trailer.u64(checksum(body));
  return SnapshotBlob{body + trailer.take()};
}

Environment Environment::restore(const SnapshotBlob& blob) {
  if (blob.bytes.size() < 8) throw std::runtime_error("snapshot: truncated");
  const std::string body = blob.bytes.substr(0, blob.bytes.size() - 8);
  {
    const std::string tail = blob.bytes.substr(blob.bytes.size() - 8);
    ByteReader tr(tail);
    if (tr.u64() != checksum(body)) throw std::runtime_error("snapshot: checksum mismatch");
  }
  ByteReader r(body);
  if (r.raw(sizeof(kSnapshotMagic)) != std::string(kSnapshotMagic, sizeof(kSnapshotMagic))) {
    throw std::runtime_error("snapshot: bad magic");
  }
  if (r.u32() != kSnapshotVersion) throw std::runtime_error("snapshot: unsupported version");
  Environment env;
  const std::uint8_t kind = r.u8();
  if (kind > 1) throw std::runtime_error("snapshot: unknown environment kind");
  env.config_.kind = static_cast<EnvKind>(kind);
  env.config_.frame_size = r.i32();
  env.config_.p_noise = r.f64();
  env.config_.max_steps = r.i32();
  env.config_.validate();
  env.t_ = r.i32();
  env.done_ = r.u8() != 0;
  GameState& g = env.game_;
  for (int* field : {&g.ball_row, &g.ball_col, &g.drift, &g.paddle, &g.agent_row, &g.agent_col,
                     &g.goal_row, &g.goal_col}) {
    *field = r.i32();
  }
  std::istringstream rng_text(r.str());
  rng_text >> env.rng_;
  if (!rng_text) throw std::runtime_error("snapshot: corrupt rng state");
  const int px = env.config_.frame_pixels();
  for (Frame& frame : env.frames_) {
    frame.resize(px);
    for (int i = 0; i < px; ++i) frame(i) = r.f64();
  }
  if (r.remaining() != 0) throw std::runtime_error("snapshot: trailing bytes");
  return env;
}

bool operator==(const Environment& a, const Environment& b) {
  if (a.config_.kind != b.config_.kind || a.config_.frame_size != b.config_.frame_size ||
      a.config_.p_noise != b.config_.p_noise || a.config_.max_steps != b.config_.max_steps) {
    return false;
  }
  if (!(a.game_ == b.game_) || a.t_ != b.t_ || a.done_ != b.done_ || a.rng_ != b.rng_) return false;
  for (int i = 0; i < kStackDepth; ++i) {
    if (a.frames_[i] != b.frames_[i]) return false;
  }
  return true;
}

int catch_chase_action(const Environment& env) {
  const GameState& g = env.game();
  if (g.ball_col < g.paddle) return 0;
  if (g.ball_col > g.paddle) return 2;
  return 1;
}

EpisodeRecord run_episode(const EnvConfig& config, std::uint64_t seed, const PolicyFn& policy,
                          bool keep_observations) {
  Environment env = Environment::reset(config, seed);
  EpisodeRecord rec;
  while (!env.done()) {
    Observation obs = env.observation();
    const int action = policy(env, obs);
    if (keep_observations) rec.observations.push_back(std::move(obs));
    const StepResult sr = env.step(action);
    rec.actions.push_back(action);
    rec.rewards.push_back(sr.reward);
    rec.total_return += sr.reward;
  }
  rec.length = static_cast<int>(rec.actions.size());
  return rec;
}

Frame stack_frame(const Observation& obs, int index, int frame_size) {
  const int px = frame_size * frame_size;
  if (obs.size() != kStackDepth * px || index < 0 || index >= kStackDepth) {
    throw std::invalid_argument("stack_frame: bad observation shape or index");
  }
  return obs.segment(index * px, px);
}

Observation shift_in(const Observation& obs, const Frame& next, int frame_size) {
  const int px = frame_size * frame_size;
  if (obs.size() != kStackDepth * px || next.size() != px) {
    throw std::invalid_argument("shift_in: shape mismatch");
  }
  Observation out(obs.size());
  out.head((kStackDepth - 1) * px) = obs.tail((kStackDepth - 1) * px);
  out.tail(px) = next;
  return out;
}

}  // namespace rlattack
