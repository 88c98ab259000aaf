#pragma once

// Experiment orchestration: one JSON config describes the environment, the
// agents, the dynamics model and both attacks. Every command derives its
// random streams from the master seed and finishes by writing a manifest of
// SHA-256 checksums for the files it produced.
//
// Output layout under the run directory:
//   agents/<name>.{net,meta}      dynamics/model.{net,meta}
//   timed_<agent>.csv             timed_<agent>_summary.csv
//   enchant.csv                   enchant_summary.csv
//   report.txt, *.svg             manifest_<command>.json

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rlattack/enchant.hpp"
#include "rlattack/timed.hpp"

namespace rlattack {

inline constexpr const char* kToolVersion = "1.0.0";

// Bad or missing configuration; key() names the offending entry, e.g. "env.kind".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::runtime_error(key + ": " + what), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

// An agent or model below its configured quality bar.
class GateFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AgentSpec {
  std::string name;
  AgentKind kind = AgentKind::value_based;
  TrainConfig train;
};

struct DynamicsSpec {
  bool enabled = true;
  int episodes = 2000;
  DynamicsTrainConfig train;
  std::optional<double> max_mse;  // gate on held-out MSE
};

struct TimedSpec {
  std::vector<std::string> agents;  // empty: every configured agent
  std::vector<double> betas;
  int episodes_per_beta = 100;
  std::optional<int> budget;
};

enum class PredictorChoice { learned, oracle, both };

struct EnchantSpec {
  std::string agent;
  CurveConfig curve;
  bool calibrate = true;  // tolerance "calibrate" in the config
  int calibration_pairs = 4;
  double calibration_quantile = 0.1;
  PredictorChoice predictor = PredictorChoice::both;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "run";
  EnvConfig env;
  std::vector<AgentSpec> agents;
  double competence_min_return = 0.9;
  int competence_episodes = 100;
  DynamicsSpec dynamics;
  CraftConfig craft;
  TimedSpec timed;
  EnchantSpec enchant;
  std::string canonical;  // normalised JSON text, hashed into manifests

  const AgentSpec& agent(const std::string& name) const;
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);

// Stream keys for the master seed.
std::uint64_t agent_train_seed(const ExperimentConfig& cfg, const std::string& agent);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

std::string to_csv(const CsvTable& table);
// Throws std::runtime_error naming the file and line on malformed input.
CsvTable parse_csv(const std::string& text, const std::string& source);

inline const std::vector<std::string> kTimedColumns{"beta",         "episode", "seed",
                                                    "attack_rate",  "return",  "clean_return",
                                                    "crafts_attempted", "crafts_succeeded"};
inline const std::vector<std::string> kEnchantColumns{"H",          "start_fraction",     "trial",    "seed",
                                                      "final_distance", "success", "craft_success_rate", "predictor"};

CsvTable timed_csv(const std::vector<SweepPoint>& sweep, const std::vector<EpisodeRecord>& clean,
                   const std::vector<std::uint64_t>& clean_seeds, const SweepPoint& uniform);
CsvTable enchant_csv(const std::vector<std::pair<std::string, SuccessCurve>>& curves);

std::string sha256_hex(const std::string& bytes);

struct ManifestEntry {
  std::string path;  // relative to the run directory
  std::string sha256;
  std::uintmax_t bytes = 0;
};

struct Manifest {
  std::string command;
  std::string config_sha256;
  std::uint64_t seed = 0;
  bool valid = true;
  std::string error;
  std::vector<ManifestEntry> files;
  std::vector<std::pair<std::string, std::string>> notes;
};

void write_manifest(const Manifest& m, const std::filesystem::path& run_dir);

// Each command writes into out_dir and its manifest; GateFailure or other
// runtime errors still leave a manifest marked invalid before propagating.
void cmd_train(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, std::ostream& log);
void cmd_attack_timed(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, std::ostream& log);
void cmd_attack_enchant(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, std::ostream& log);
void cmd_report(const std::vector<std::filesystem::path>& csvs, const std::filesystem::path& out_dir,
                std::ostream& log);

struct CommandOptions {
  std::string command;
  std::optional<std::filesystem::path> config;
  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> predictor;
  std::vector<std::filesystem::path> inputs;  // report only
};

// Maps outcomes to exit codes: 0 success, 1 configuration error, 2 runtime
// or gate failure. Diagnostics go to `err`.
int run_command(const CommandOptions& opts, std::ostream& log, std::ostream& err);

}  // namespace rlattack
