#include "rlattack/harness.hpp"

#include <algorithm>
#include <memory>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include <openssl/evp.h>

#include "config_json.hpp"
#include "rlattack/bytes.hpp"
#include "rlattack/meta.hpp"

namespace rlattack {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_csv(const CsvTable& table) {
  std::string out;
  auto line = [&](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out += ',';
      out += fields[i];
    }
    out += '\n';
  };
  line(table.header);
  for (const auto& row : table.rows) {
    if (row.size() != table.header.size()) throw std::logic_error("csv row width does not match header");
    line(row);
  }
  return out;
}

CsvTable parse_csv(const std::string& text, const std::string& source) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  auto split = [](const std::string& s) {
    std::vector<std::string> f;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = s.find(',', start);
      f.push_back(s.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    return f;
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1) {
      if (line.empty()) throw std::runtime_error(source + ":1: missing header row");
      t.header = split(line);
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> row = split(line);
    if (row.size() != t.header.size()) {
      throw std::runtime_error(source + ":" + std::to_string(lineno) + ": expected " +
                               std::to_string(t.header.size()) + " fields, found " + std::to_string(row.size()));
    }
    t.rows.push_back(std::move(row));
  }
  if (lineno == 0) throw std::runtime_error(source + ":1: empty file");
  return t;
}

CsvTable timed_csv(const std::vector<SweepPoint>& sweep, const std::vector<EpisodeRecord>& clean,
                   const std::vector<std::uint64_t>& clean_seeds, const SweepPoint& uniform) {
  CsvTable t;
  t.header = kTimedColumns;
  auto add = [&](const std::string& beta, const SweepPoint& pt) {
    for (std::size_t e = 0; e < pt.episodes.size(); ++e) {
      const TimedEpisodeResult& r = pt.episodes[e];
      t.rows.push_back({beta, std::to_string(e), std::to_string(r.seed), format_double(r.schedule.attack_rate),
                        format_double(r.record.total_return), format_double(r.clean_return),
                        std::to_string(r.crafted.size()), std::to_string(r.crafts_succeeded())});
    }
  };
  for (const SweepPoint& pt : sweep) add(format_double(pt.beta), pt);
  for (std::size_t e = 0; e < clean.size(); ++e) {
    const std::string ret = format_double(clean[e].total_return);
    t.rows.push_back({"inf", std::to_string(e), std::to_string(clean_seeds[e]), "0", ret, ret, "0", "0"});
  }
  add("uniform", uniform);
  return t;
}

CsvTable enchant_csv(const std::vector<std::pair<std::string, SuccessCurve>>& curves) {
  CsvTable t;
  t.header = kEnchantColumns;
  for (const auto& [name, curve] : curves) {
    std::vector<const EnchantTrial*> trials;
    for (const EnchantTrial& tr : curve.trials) trials.push_back(&tr);
    std::stable_sort(trials.begin(), trials.end(), [](const EnchantTrial* a, const EnchantTrial* b) {
      if (a->horizon != b->horizon) return a->horizon < b->horizon;
      if (a->start_fraction != b->start_fraction) return a->start_fraction < b->start_fraction;
      return a->trial < b->trial;
    });
    for (const EnchantTrial* tr : trials) {
      t.rows.push_back({std::to_string(tr->horizon), format_double(tr->start_fraction), std::to_string(tr->trial),
                        std::to_string(tr->seed), format_double(tr->outcome.final_distance),
                        tr->outcome.success ? "1" : "0", format_double(tr->outcome.craft_success_rate()), name});
    }
  }
  return t;
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

void write_manifest(const Manifest& m, const fs::path& run_dir) {
  json files = json::array();
  std::vector<ManifestEntry> sorted = m.files;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.path < b.path; });
  for (const ManifestEntry& f : sorted) files.push_back({{"path", f.path}, {"sha256", f.sha256}, {"bytes", f.bytes}});
  json notes = json::object();
  for (const auto& [k, v] : m.notes) notes[k] = v;
  json j = {{"command", m.command},       {"tool_version", kToolVersion}, {"config_sha256", m.config_sha256},
            {"seed", m.seed},             {"valid", m.valid},             {"files", files},
            {"notes", notes}};
  if (!m.error.empty()) j["error"] = m.error;
  write_file(run_dir / ("manifest_" + m.command + ".json"), j.dump(2) + "\n");
}

namespace {

// Tracks the files a command writes and always leaves a manifest behind.
class Run {
 public:
  Run(std::string command, const std::string& config_text, std::uint64_t seed, fs::path dir)
      : dir_(std::move(dir)) {
    m_.command = std::move(command);
    m_.config_sha256 = sha256_hex(config_text);
    m_.seed = seed;
    fs::create_directories(dir_);
  }

  const fs::path& dir() const { return dir_; }

  void write(const std::string& rel, const std::string& bytes) {
    write_file(dir_ / rel, bytes);
    record(rel);
  }

  void record(const std::string& rel) {
    const std::string bytes = read_file(dir_ / rel);
    m_.files.push_back({rel, sha256_hex(bytes), bytes.size()});
  }

  void note(const std::string& k, const std::string& v) { m_.notes.emplace_back(k, v); }

  void fail(const std::string& what) {
    m_.valid = false;
    m_.error = what;
    write_manifest(m_, dir_);
  }

  void finish() { write_manifest(m_, dir_); }

  template <typename F>
  void guarded(F&& body) {
    try {
      body();
    } catch (const std::exception& e) {
      fail(e.what());
      throw;
    }
    finish();
  }

 private:
  fs::path dir_;
  Manifest m_;
};

std::string agent_stem(const std::string& name) { return "agents/" + name; }

AgentPolicy load_checked_agent(const ExperimentConfig& cfg, const fs::path& dir, const std::string& name) {
  const fs::path stem = dir / agent_stem(name);
  if (!fs::exists(stem.string() + ".net") || !fs::exists(stem.string() + ".meta")) {
    throw std::runtime_error("missing agent file " + stem.string() + ".net (run train first)");
  }
  AgentPolicy agent = load_agent(stem);
  if (agent.env_kind != cfg.env.kind) {
    throw std::runtime_error("agent '" + name + "' was trained on " + std::string(to_string(agent.env_kind)));
  }
  agent.validate(cfg.env.observation_size());
  return agent;
}

double competence(const ExperimentConfig& cfg, const AgentPolicy& agent, const std::string& name) {
  return evaluate_greedy(agent, cfg.env, cfg.competence_episodes, derive_seed(cfg.seed, "competence." + name))
      .mean_return;
}

void gate(const ExperimentConfig& cfg, double measured, const std::string& name) {
  if (measured < cfg.competence_min_return) {
    throw GateFailure("agent '" + name + "' mean return " + format_double(measured) + " over " +
                      std::to_string(cfg.competence_episodes) + " episodes is below the bar " +
                      format_double(cfg.competence_min_return));
  }
}

CsvTable timed_summary(const std::vector<SweepPoint>& sweep, double clean_mean, int clean_n,
                       const SweepPoint& uniform) {
  CsvTable t;
  t.header = {"beta", "mean_attack_rate", "pooled_attack_rate", "mean_return", "mean_clean_return", "episodes"};
  for (const SweepPoint& p : sweep) {
    t.rows.push_back({format_double(p.beta), format_double(p.mean_attack_rate), format_double(p.pooled_attack_rate),
                      format_double(p.mean_return), format_double(p.mean_clean_return),
                      std::to_string(p.episodes.size())});
  }
  t.rows.push_back({"inf", "0", "0", format_double(clean_mean), format_double(clean_mean), std::to_string(clean_n)});
  t.rows.push_back({"uniform", format_double(uniform.mean_attack_rate), format_double(uniform.pooled_attack_rate),
                    format_double(uniform.mean_return), format_double(uniform.mean_clean_return),
                    std::to_string(uniform.episodes.size())});
  return t;
}

}  // namespace

void cmd_train(const ExperimentConfig& cfg, const fs::path& out_dir, std::ostream& log) {
  Run run("train", cfg.canonical, cfg.seed, out_dir);
  run.guarded([&] {
    std::vector<std::pair<std::string, double>> below;
    const AgentPolicy* data_agent = nullptr;
    std::vector<AgentPolicy> trained;
    trained.reserve(cfg.agents.size());
    for (const AgentSpec& spec : cfg.agents) {
      TrainConfig tc = spec.train;
      tc.seed = agent_train_seed(cfg, spec.name);
      log << "training " << spec.name << " (" << to_string(spec.kind) << ", " << tc.episodes << " episodes)\n";
      trained.push_back(spec.kind == AgentKind::value_based ? train_value_agent(cfg.env, tc)
                                                            : train_pg_agent(cfg.env, tc));
      const AgentPolicy& agent = trained.back();
      save_agent(agent, out_dir / agent_stem(spec.name));
      run.record(agent_stem(spec.name) + ".net");
      run.record(agent_stem(spec.name) + ".meta");
      const double ret = competence(cfg, agent, spec.name);
      run.note("competence." + spec.name, format_double(ret));
      log << "  mean return " << format_double(ret) << " over " << cfg.competence_episodes << " episodes\n";
      if (ret < cfg.competence_min_return) below.emplace_back(spec.name, ret);
      if (spec.name == cfg.enchant.agent) data_agent = &agent;
    }
    if (cfg.dynamics.enabled) {
      DynamicsTrainConfig dc = cfg.dynamics.train;
      dc.seed = derive_seed(cfg.seed, "dynamics.train");
      log << "training dynamics model on " << cfg.dynamics.episodes << " episodes\n";
      const TransitionDataset data =
          collect_transitions(cfg.env, data_agent, cfg.dynamics.episodes, derive_seed(cfg.seed, "dynamics.data"));
      const DynamicsModel model = train_dynamics(data, dc);
      save_dynamics(model, out_dir / "dynamics/model");
      run.record("dynamics/model.net");
      run.record("dynamics/model.meta");
      run.note("dynamics.heldout_mse", format_double(model.heldout_mse));
      log << "  held-out per-pixel MSE " << format_double(model.heldout_mse) << "\n";
      if (cfg.dynamics.max_mse && model.heldout_mse > *cfg.dynamics.max_mse) {
        throw GateFailure("dynamics held-out MSE " + format_double(model.heldout_mse) + " exceeds " +
                          format_double(*cfg.dynamics.max_mse));
      }
    }
    for (const auto& [name, ret] : below) gate(cfg, ret, name);
  });
}

void cmd_attack_timed(const ExperimentConfig& cfg, const fs::path& out_dir, std::ostream& log) {
  Run run("attack-timed", cfg.canonical, cfg.seed, out_dir);
  run.guarded([&] {
    std::vector<std::string> names = cfg.timed.agents;
    if (names.empty()) {
      for (const AgentSpec& a : cfg.agents) names.push_back(a.name);
    }
    for (const std::string& name : names) {
      const AgentPolicy agent = load_checked_agent(cfg, out_dir, name);
      const double ret = competence(cfg, agent, name);
      run.note("competence." + name, format_double(ret));
      gate(cfg, ret, name);
      const std::uint64_t seed = derive_seed(cfg.seed, "timed." + name);
      log << "timed sweep for " << name << ": " << cfg.timed.betas.size() << " betas x "
          << cfg.timed.episodes_per_beta << " episodes\n";
      const std::vector<SweepPoint> sweep =
          sweep_beta(agent, cfg.env, cfg.timed.betas, cfg.timed.episodes_per_beta, cfg.craft, seed, cfg.timed.budget);
      std::vector<EpisodeRecord> clean;
      std::vector<std::uint64_t> clean_seeds;
      double clean_mean = 0.0;
      for (int e = 0; e < cfg.timed.episodes_per_beta; ++e) {
        clean_seeds.push_back(derive_seed(seed, "timed.clean", static_cast<std::uint64_t>(e)));
        clean.push_back(run_clean_episode(agent, cfg.env, clean_seeds.back()));
        clean_mean += clean.back().total_return;
      }
      clean_mean /= cfg.timed.episodes_per_beta;
      const SweepPoint uniform = uniform_baseline(agent, cfg.env, cfg.timed.episodes_per_beta, cfg.craft, seed);
      run.write("timed_" + name + ".csv", to_csv(timed_csv(sweep, clean, clean_seeds, uniform)));
      run.write("timed_" + name + "_summary.csv",
                to_csv(timed_summary(sweep, clean_mean, cfg.timed.episodes_per_beta, uniform)));
      log << "  clean " << format_double(clean_mean) << ", uniform " << format_double(uniform.mean_return) << "\n";
      for (const SweepPoint& p : sweep) {
        log << "  beta " << format_double(p.beta) << ": attack rate " << format_double(p.mean_attack_rate)
            << ", return " << format_double(p.mean_return) << "\n";
      }
    }
  });
}

void cmd_attack_enchant(const ExperimentConfig& cfg, const fs::path& out_dir, std::ostream& log) {
  Run run("attack-enchant", cfg.canonical, cfg.seed, out_dir);
  run.guarded([&] {
    const std::string& name = cfg.enchant.agent;
    const AgentPolicy agent = load_checked_agent(cfg, out_dir, name);
    const double ret = competence(cfg, agent, name);
    run.note("competence." + name, format_double(ret));
    gate(cfg, ret, name);

    std::vector<std::unique_ptr<StatePredictor>> predictors;
    if (cfg.enchant.predictor != PredictorChoice::learned) predictors.push_back(std::make_unique<OraclePredictor>());
    if (cfg.enchant.predictor != PredictorChoice::oracle) {
      const fs::path stem = out_dir / "dynamics/model";
      if (!fs::exists(stem.string() + ".net")) {
        throw std::runtime_error("missing dynamics model " + stem.string() + ".net (required by predictor=learned)");
      }
      predictors.push_back(std::make_unique<LearnedPredictor>(load_dynamics(stem)));
    }

    CurveConfig curve = cfg.enchant.curve;
    curve.craft = cfg.craft;
    if (cfg.enchant.calibrate) {
      curve.tolerance = calibrate_tolerance(agent, cfg.env, curve, cfg.enchant.calibration_pairs,
                                            cfg.enchant.calibration_quantile,
                                            derive_seed(cfg.seed, "enchant.calibrate"));
      log << "calibrated tolerance " << format_double(curve.tolerance) << "\n";
    }
    run.note("enchant.tolerance", format_double(curve.tolerance));

    std::vector<std::pair<std::string, SuccessCurve>> curves;
    CsvTable summary;
    summary.header = {"predictor", "H", "attempts", "successes", "success_rate"};
    for (const auto& p : predictors) {
      log << "enchanting attack with " << p->name() << " predictor\n";
      SuccessCurve c = success_curve(agent, cfg.env, *p, curve, derive_seed(cfg.seed, "enchant.curve"));
      for (const std::string& s : c.skipped) log << "  skipped " << s << "\n";
      for (const CurvePoint& pt : c.points) {
        summary.rows.push_back({std::string(p->name()), std::to_string(pt.horizon), std::to_string(pt.attempts),
                                std::to_string(pt.successes), format_double(pt.success_rate())});
        log << "  H=" << pt.horizon << ": " << pt.successes << "/" << pt.attempts << "\n";
      }
      run.note("enchant." + std::string(p->name()) + ".skipped", std::to_string(c.skipped.size()));
      curves.emplace_back(std::string(p->name()), std::move(c));
    }
    run.write("enchant.csv", to_csv(enchant_csv(curves)));
    run.write("enchant_summary.csv", to_csv(summary));
  });
}

int run_command(const CommandOptions& opts, std::ostream& log, std::ostream& err) {
  try {
    if (opts.command == "report") {
      if (opts.inputs.empty()) throw ConfigError("report", "no CSV files given");
      cmd_report(opts.inputs, opts.out.value_or("."), log);
      return 0;
    }
    if (!opts.config) throw ConfigError("--config", "required");
    std::string text;
    try {
      text = read_file(*opts.config);
    } catch (const std::exception&) {
      throw ConfigError("--config", "cannot read " + opts.config->string());
    }
    json root = parse_json_text(text);
    if (!root.is_object()) throw ConfigError("config", "expected an object");
    if (opts.seed) root["seed"] = *opts.seed;
    if (opts.predictor) {
      if (*opts.predictor != "learned" && *opts.predictor != "oracle") {
        throw ConfigError("--predictor", "expected learned or oracle");
      }
      if (!root.contains("enchant") || !root["enchant"].is_object()) root["enchant"] = json::object();
      root["enchant"]["predictor"] = *opts.predictor;
    }
    const ExperimentConfig cfg = parse_config_json(root);
    const fs::path out = opts.out.value_or(cfg.output_dir);
    if (opts.command == "train") cmd_train(cfg, out, log);
    else if (opts.command == "attack-timed") cmd_attack_timed(cfg, out, log);
    else if (opts.command == "attack-enchant") cmd_attack_enchant(cfg, out, log);
    else throw ConfigError("command", "unknown command '" + opts.command + "'");
    return 0;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 1;
  } catch (const GateFailure& e) {
    err << "gate failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace rlattack
