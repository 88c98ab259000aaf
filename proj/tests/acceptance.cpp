// End-to-end acceptance run: trains the desk-scale agents and models from
// configs/, runs both attacks through the harness commands, and prints one
// PASS/FAIL line per criterion. Exit status is the number of failures.
//
//   acceptance [WORK_DIR]

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include "attack_oracles.hpp"
#include "fixtures.hpp"
#include "json.hpp"
#include "oracles.hpp"
#include "rlattack/bytes.hpp"
#include "rlattack/harness.hpp"
#include "rlattack/meta.hpp"

using namespace rlattack;
namespace fs = std::filesystem;
using clk = std::chrono::steady_clock;

namespace {

const fs::path kConfigs = RLATTACK_CONFIG_DIR;

double seconds_since(clk::time_point t0) { return std::chrono::duration<double>(clk::now() - t0).count(); }

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Runner {
  int failures = 0;
  std::vector<std::string> lines;

  void run(int id, const std::string& name, const std::function<Outcome()>& body) {
    const auto t0 = clk::now();
    Outcome o;
    try {
      o = body();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    std::ostringstream line;
    line << (o.pass ? "PASS" : "FAIL") << " [" << std::setw(2) << id << "] " << name << ": " << o.detail << " ("
         << fmt(seconds_since(t0), 3) << " s)";
    failures += !o.pass;
    lines.push_back(line.str());
    std::cout << line.str() << std::endl;
  }
};

// Shared state between criteria; later criteria reuse earlier artifacts.
struct Workspace {
  fs::path root;
  ExperimentConfig catch_cfg;
  fs::path catch_dir;
  std::map<std::string, AgentPolicy> agents;
  std::map<std::string, double> train_seconds;
  std::optional<DynamicsModel> catch_model;
  std::map<std::string, CsvTable> timed_summary;
  std::map<std::string, double> timed_seconds;
  std::optional<double> gridgoal_mse, gridgoal_noisy_mse;
  std::optional<CsvTable> gridgoal_det_summary, gridgoal_noisy_summary;
  double gridgoal_enchant_seconds = 0.0;
};

ExperimentConfig load_at(const fs::path& config, const fs::path& out) {
  ExperimentConfig c = load_config(config);
  c.output_dir = out;
  return c;
}

// Mirrors cmd_train's dynamics stage so paired runs share data seeds and budget.
DynamicsModel train_dynamics_for(const ExperimentConfig& cfg, const AgentPolicy* agent) {
  DynamicsTrainConfig dc = cfg.dynamics.train;
  dc.seed = derive_seed(cfg.seed, "dynamics.train");
  const TransitionDataset data =
      collect_transitions(cfg.env, agent, cfg.dynamics.episodes, derive_seed(cfg.seed, "dynamics.data"));
  return train_dynamics(data, dc);
}

AgentPolicy train_agent(const ExperimentConfig& cfg, const AgentSpec& spec) {
  TrainConfig tc = spec.train;
  tc.seed = agent_train_seed(cfg, spec.name);
  return spec.kind == AgentKind::value_based ? train_value_agent(cfg.env, tc) : train_pg_agent(cfg.env, tc);
}

double summary_value(const CsvTable& t, const std::string& key, const std::string& col) {
  const auto c = static_cast<std::size_t>(std::find(t.header.begin(), t.header.end(), col) - t.header.begin());
  for (const auto& row : t.rows) {
    if (row[0] == key) return parse_double(row[c]);
  }
  throw std::runtime_error("summary has no row " + key);
}

// Pooled success rate for one predictor from enchant_summary.csv.
std::pair<double, int> pooled_success(const CsvTable& t, const std::string& predictor) {
  int attempts = 0, successes = 0;
  for (const auto& row : t.rows) {
    if (row[0] != predictor) continue;
    attempts += std::stoi(row[2]);
    successes += std::stoi(row[3]);
  }
  if (!attempts) throw std::runtime_error("no enchant trials for predictor " + predictor);
  return {static_cast<double>(successes) / attempts, attempts};
}

Network random_network(std::mt19937_64& rng, int trial) {
  const int depth = 1 + trial % 3;
  std::vector<int> dims{2 + static_cast<int>(rng() % 7)};
  for (int i = 0; i < depth; ++i) dims.push_back(2 + static_cast<int>(rng() % 6));
  std::vector<Activation> acts(dims.size() - 1, Activation::relu);
  acts.back() = Activation::identity;
  Network net = init_network(std::span<const int>(dims), std::span<const Activation>(acts), rng());
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (std::size_t i = 0; i < net.layer_count(); ++i) {
    for (Eigen::Index r = 0; r < net.bias(i).size(); ++r) net.bias(i)(r) = u(rng);
  }
  return net;
}

Outcome gradient_fidelity() {
  std::mt19937_64 rng(20240601);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int entries = 0, failures = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Network net = random_network(rng, trial);
    const Eigen::VectorXd x = Eigen::VectorXd::NullaryExpr(net.input_dim(), [&] { return u(rng); });
    const Eigen::VectorXd cot = Eigen::VectorXd::NullaryExpr(net.output_dim(), [&] { return u(rng); });
    const GradientBundle<double> g = backward(net, x, cot);
    const testing_oracles::FdReport rep = testing_oracles::check_gradients(net, x, cot, g, 1e-5, 1e-4, 1e-8);
    entries += rep.entries;
    failures += rep.failures;
    worst = std::max(worst, rep.worst_relative);
  }
  return {failures == 0, std::to_string(entries) + " gradient entries over 100 triples, " + std::to_string(failures) +
                             " outside 1e-4 relative" + (failures ? " (worst " + fmt(worst) + ")" : "")};
}

Outcome competence(Workspace& w) {
  const ExperimentConfig& cfg = w.catch_cfg;
  fs::create_directories(w.catch_dir);
  std::ostringstream detail;
  bool ok = true;
  for (const AgentSpec& spec : cfg.agents) {
    const auto t0 = clk::now();
    AgentPolicy agent = train_agent(cfg, spec);
    const double secs = seconds_since(t0);
    save_agent(agent, w.catch_dir / "agents" / spec.name);
    const double ret = evaluate_greedy(agent, cfg.env, 100, derive_seed(cfg.seed, "competence." + spec.name))
                           .mean_return;
    ok = ok && ret >= 0.9 && secs < 300.0;
    detail << spec.name << " (" << to_string(spec.kind) << ") mean return " << fmt(ret) << " trained in "
           << fmt(secs, 3) << " s; ";
    w.train_seconds[spec.name] = secs;
    w.agents.emplace(spec.name, std::move(agent));
  }
  detail << "bar 0.9 over 100 episodes, < 300 s each";
  return {ok, detail.str()};
}

void run_timed(Workspace& w) {
  if (!w.timed_summary.empty()) return;
  for (const auto& [name, agent] : w.agents) {
    ExperimentConfig cfg = w.catch_cfg;
    cfg.timed.agents = {name};
    std::ostringstream log;
    const auto t0 = clk::now();
    cmd_attack_timed(cfg, w.catch_dir, log);
    w.timed_seconds[name] = seconds_since(t0);
    const fs::path csv = w.catch_dir / ("timed_" + name + "_summary.csv");
    w.timed_summary[name] = parse_csv(read_file(csv), csv.string());
  }
}

Outcome uniform_effect(Workspace& w) {
  run_timed(w);
  bool ok = true;
  std::ostringstream detail;
  for (const auto& [name, t] : w.timed_summary) {
    const double attacked = summary_value(t, "uniform", "mean_return");
    const double clean = summary_value(t, "uniform", "mean_clean_return");
    ok = ok && clean - attacked >= 0.5;
    detail << name << ": clean " << fmt(clean) << " -> uniform " << fmt(attacked) << " (drop " << fmt(clean - attacked)
           << "); ";
  }
  detail << "need drop >= 0.5 at epsilon " << fmt(w.catch_cfg.craft.epsilon) << " over "
         << w.catch_cfg.timed.episodes_per_beta << " episodes";
  return {ok, detail.str()};
}

Outcome timed_efficiency(Workspace& w) {
  run_timed(w);
  bool ok = true;
  std::ostringstream detail;
  for (const auto& [name, t] : w.timed_summary) {
    const double uniform = summary_value(t, "uniform", "mean_return");
    // Among betas at or under the rate cap, report the one closest to uniform.
    bool found = false;
    double best_gap = INFINITY, best_beta = 0, best_rate = 0, best_ret = 0;
    for (const auto& row : t.rows) {
      if (row[0] == "inf" || row[0] == "uniform") continue;
      const double rate = parse_double(row[1]), ret = parse_double(row[3]);
      if (rate > 0.25) continue;
      const double gap = std::abs(ret - uniform);
      if (gap < best_gap) {
        best_gap = gap;
        best_beta = parse_double(row[0]);
        best_rate = rate;
        best_ret = ret;
      }
      found = found || gap <= 0.1;
    }
    const bool fast = w.timed_seconds[name] < 600.0;
    ok = ok && found && fast;
    detail << name << ": uniform " << fmt(uniform) << ", closest beta " << fmt(best_beta) << " rate " << fmt(best_rate)
           << " return " << fmt(best_ret) << " (gap " << fmt(best_gap) << ", sweep " << fmt(w.timed_seconds[name], 3)
           << " s); ";
  }
  detail << "need rate <= 0.25 with gap <= 0.1";
  return {ok, detail.str()};
}

Outcome threshold_laws(Workspace& w) {
  const EnvConfig& env = w.catch_cfg.env;
  const CraftConfig& craft = w.catch_cfg.craft;
  int identical = 0, schedules = 0, episodes = 0;
  for (const auto& [name, agent] : w.agents) {
    for (std::uint64_t s = 0; s < 50; ++s) {
      const std::uint64_t seed = derive_seed(777, name, s);
      ++episodes;
      const EpisodeRecord clean = run_clean_episode(agent, env, seed);
      const TimedEpisodeResult off = run_timed_episode(agent, env, seed, 1.01, craft);
      identical += off.record.actions == clean.actions && off.record.rewards == clean.rewards &&
                   off.record.total_return == clean.total_return && off.crafted.empty();
      const TimedEpisodeResult zero = run_timed_episode(agent, env, seed, 0.0, craft);
      const TimedEpisodeResult uni = run_uniform_episode(agent, env, seed, craft);
      // Both schedules attack every step; compare over the shorter episode.
      const std::size_t n = std::min(zero.schedule.b.size(), uni.schedule.b.size());
      schedules += std::equal(zero.schedule.b.begin(), zero.schedule.b.begin() + static_cast<long>(n),
                              uni.schedule.b.begin()) &&
                   std::all_of(zero.schedule.b.begin(), zero.schedule.b.end(), [](auto b) { return b == 1; }) &&
                   zero.schedule.preference.front() == uni.schedule.preference.front();
    }
  }
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.2);
  int violations = 0;
  for (int i = 0; i < 100000; ++i) {
    const double c = u(rng), b1 = u(rng), b2 = u(rng);
    if (should_attack(c, std::max(b1, b2)) && !should_attack(c, std::min(b1, b2))) ++violations;
  }
  const bool ok = identical == episodes && schedules == episodes && violations == 0;
  return {ok, "beta 1.01 identical to clean in " + std::to_string(identical) + "/" + std::to_string(episodes) +
                  ", beta 0 schedule equals uniform in " + std::to_string(schedules) + "/" + std::to_string(episodes) +
                  ", monotonicity violations " + std::to_string(violations) + "/100000"};
}

int oracle_greedy(const AgentPolicy& a, const Observation& x) {
  const std::vector<double> out = testing_oracles::loop_forward(a.net, x);
  return static_cast<int>(std::max_element(out.begin(), out.begin() + a.action_count) - out.begin());
}

Outcome crafting_soundness(Workspace& w) {
  const CraftConfig& craft = w.catch_cfg.craft;
  int checked = 0, unsound = 0, flag_mismatch = 0;
  auto check = [&](const AgentPolicy& a, const Observation& obs, const Perturbation& p, bool untargeted, int clean) {
    ++checked;
    const Eigen::VectorXd x = obs + p.delta;
    if (p.delta.size() != obs.size() || p.delta.cwiseAbs().maxCoeff() > craft.epsilon + 1e-12 || x.minCoeff() < 0.0 ||
        x.maxCoeff() > 1.0) {
      ++unsound;
    }
    const int got = oracle_greedy(a, x);
    const bool success = untargeted ? got != clean : got == p.target;
    flag_mismatch += success != p.success;
  };
  for (const auto& [name, agent] : w.agents) {
    for (std::uint64_t s = 0; s < 20; ++s) {
      const EpisodeRecord rec = run_episode(
          w.catch_cfg.env, derive_seed(555, name, s),
          [&](const Environment&, const Observation& o) { return act_greedy(agent, o); }, true);
      for (const Observation& obs : rec.observations) {
        const int clean = oracle_greedy(agent, obs);
        const int target = argmin_index(action_dist(agent, obs));
        check(agent, obs, craft_targeted(agent, obs, target, craft), false, clean);
        check(agent, obs, craft_untargeted(agent, obs, craft), true, clean);
      }
    }
  }
  std::mt19937_64 rng(2025);
  int agree = 0, successes = 0;
  const double eps_choices[] = {0.02, 0.05, 0.1, 0.2, 0.4};
  for (int inst = 0; inst < 50; ++inst) {
    const int d = 2 + inst % 7;
    const AgentPolicy a = fixtures::linear_agent(d, 2, 1.0, 9000 + static_cast<std::uint64_t>(inst));
    const Observation obs = fixtures::uniform_obs(d, rng);
    CraftConfig cfg;
    cfg.epsilon = eps_choices[inst % 5];
    const int target = 1 - testing_oracles::loop_greedy(a, obs);
    const Perturbation p = craft_targeted(a, obs, target, cfg);
    agree += p.success == testing_oracles::exhaustive_reachable(a, obs, target, cfg.epsilon);
    successes += p.success;
  }
  const bool ok = checked > 0 && unsound == 0 && flag_mismatch == 0 && agree == 50;
  return {ok, std::to_string(checked) + " perturbations on trained agents: " + std::to_string(unsound) +
                  " outside box/range, " + std::to_string(flag_mismatch) +
                  " success flags disagreeing with an independent forward pass; linear exhaustive oracle agrees on " +
                  std::to_string(agree) + "/50 (" + std::to_string(successes) + " reachable)"};
}

Outcome cem_optimality() {
  OraclePredictor oracle;
  int exact = 0, exact_total = 0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const int h = 1 + static_cast<int>(seed % 4);
    const testing_oracles::PlanInstance in = testing_oracles::catch_instance(3000 + seed, static_cast<int>(seed % 5), h);
    CEMConfig cfg;
    cfg.horizon = h;
    cfg.exhaustive = true;
    const ActionPlan plan = cem_plan(oracle, in.env.observation(), in.blob, in.goal, cfg, 3, seed);
    ++exact_total;
    exact += plan.enumerated &&
             std::abs(plan.predicted_distance - testing_oracles::brute_force_optimum(in.blob, in.goal, h, 3)) <= 1e-12;
  }
  int matches = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const testing_oracles::PlanInstance in =
        testing_oracles::catch_instance(5000 + seed, static_cast<int>(seed % 5), 5);
    CEMConfig cfg;  // N=200, K=40, J=5
    cfg.horizon = 5;
    const ActionPlan plan = cem_plan(oracle, in.env.observation(), in.blob, in.goal, cfg, 3, seed);
    matches += std::abs(plan.predicted_distance - testing_oracles::brute_force_optimum(in.blob, in.goal, 5, 3)) <= 1e-9;
  }
  return {exact == exact_total && matches >= 95,
          "exhaustive equals brute force on " + std::to_string(exact) + "/" + std::to_string(exact_total) +
              "; sampled CEM at H=5 within 1e-9 of the optimum on " + std::to_string(matches) + "/100 (need 95)"};
}

void train_catch_dynamics(Workspace& w) {
  if (w.catch_model) return;
  const AgentPolicy* agent = &w.agents.at(w.catch_cfg.enchant.agent);
  w.catch_model = train_dynamics_for(w.catch_cfg, agent);
  save_dynamics(*w.catch_model, w.catch_dir / "dynamics" / "model");
}

// Gridgoal with and without action noise: one agent, paired dynamics
// budgets and seeds, learned-model enchanting on each.
void run_gridgoal(Workspace& w) {
  if (w.gridgoal_det_summary) return;
  const fs::path det_dir = w.root / "gridgoal", noisy_dir = w.root / "gridgoal_noisy";
  const ExperimentConfig det = load_at(kConfigs / "gridgoal.json", det_dir);
  const ExperimentConfig noisy = load_at(kConfigs / "gridgoal_noisy.json", noisy_dir);
  if (noisy.env.p_noise <= 0.0 || det.env.p_noise != 0.0) throw std::runtime_error("gridgoal configs not paired");
  const AgentSpec& spec = det.agent(det.enchant.agent);
  const AgentPolicy agent = train_agent(det, spec);
  for (const auto& [cfg, dir] : {std::pair{&det, det_dir}, std::pair{&noisy, noisy_dir}}) {
    save_agent(agent, dir / "agents" / spec.name);
    const DynamicsModel m = train_dynamics_for(*cfg, &agent);
    save_dynamics(m, dir / "dynamics" / "model");
    (cfg == &det ? w.gridgoal_mse : w.gridgoal_noisy_mse) = m.heldout_mse;
    std::ostringstream log;
    const auto t0 = clk::now();
    cmd_attack_enchant(*cfg, dir, log);
    w.gridgoal_enchant_seconds += seconds_since(t0);
    const fs::path csv = dir / "enchant_summary.csv";
    (cfg == &det ? w.gridgoal_det_summary : w.gridgoal_noisy_summary) = parse_csv(read_file(csv), csv.string());
  }
}

Outcome enchanting(Workspace& w) {
  train_catch_dynamics(w);
  std::ostringstream log;
  const auto t0 = clk::now();
  cmd_attack_enchant(w.catch_cfg, w.catch_dir, log);
  double secs = seconds_since(t0);
  const fs::path csv = w.catch_dir / "enchant_summary.csv";
  const CsvTable t = parse_csv(read_file(csv), csv.string());
  const auto [oracle, n_oracle] = pooled_success(t, "oracle");
  const auto [learned, n_learned] = pooled_success(t, "learned");
  run_gridgoal(w);
  secs += w.gridgoal_enchant_seconds;
  const auto [det, n_det] = pooled_success(*w.gridgoal_det_summary, "learned");
  const auto [noisy, n_noisy] = pooled_success(*w.gridgoal_noisy_summary, "learned");
  const bool ok = oracle >= 0.7 && std::abs(learned - oracle) <= 0.2 && noisy < det && secs < 1200.0;
  return {ok, "catch oracle " + fmt(oracle) + " over " + std::to_string(n_oracle) + " trials (need >= 0.7), learned " +
                  fmt(learned) + " over " + std::to_string(n_learned) + " (need within 0.2); gridgoal learned " +
                  fmt(det) + " deterministic vs " + fmt(noisy) + " with p_noise 0.1 (need strictly lower); attack " +
                  fmt(secs, 3) + " s"};
}

Outcome model_quality(Workspace& w) {
  train_catch_dynamics(w);
  run_gridgoal(w);
  const double c = w.catch_model->heldout_mse;
  const bool ok = c <= 0.01 && *w.gridgoal_noisy_mse > *w.gridgoal_mse;
  return {ok, "catch held-out per-pixel MSE " + fmt(c) + " (need <= 0.01); gridgoal " + fmt(*w.gridgoal_mse) +
                  " deterministic vs " + fmt(*w.gridgoal_noisy_mse) + " with p_noise 0.1 (need strictly higher)"};
}

std::map<std::string, std::string> dir_bytes(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).generic_string()] = read_file(e.path());
  }
  return out;
}

Outcome reproducibility(Workspace& w) {
  const ExperimentConfig cfg = load_config(kConfigs / "smoke.json");
  std::vector<std::map<std::string, std::string>> runs;
  for (const char* name : {"repro_a", "repro_b"}) {
    const fs::path dir = w.root / name;
    fs::remove_all(dir);
    std::ostringstream log;
    cmd_train(cfg, dir, log);
    cmd_attack_timed(cfg, dir, log);
    cmd_attack_enchant(cfg, dir, log);
    std::vector<fs::path> csvs{dir / "enchant.csv"};
    for (const AgentSpec& a : cfg.agents) csvs.push_back(dir / ("timed_" + a.name + ".csv"));
    cmd_report(csvs, dir, log);
    runs.push_back(dir_bytes(dir));
  }
  int differing = 0, checksum_errors = 0, csvs = 0;
  for (const auto& [path, bytes] : runs[0]) {
    const auto it = runs[1].find(path);
    differing += it == runs[1].end() || it->second != bytes;
    csvs += path.ends_with(".csv");
    if (path.starts_with("manifest_")) {
      for (const auto& f : nlohmann::json::parse(bytes)["files"]) {
        const auto file = runs[0].find(f["path"].get<std::string>());
        checksum_errors += file == runs[0].end() || sha256_hex(file->second) != f["sha256"].get<std::string>();
      }
    }
  }
  differing += static_cast<int>(runs[1].size()) - static_cast<int>(runs[0].size());
  return {differing == 0 && checksum_errors == 0 && csvs > 0,
          std::to_string(runs[0].size()) + " files (" + std::to_string(csvs) + " CSVs) across train, attack-timed, " +
              "attack-enchant, report: " + std::to_string(differing) + " differ between reruns, " +
              std::to_string(checksum_errors) + " manifest checksum mismatches"};
}

}  // namespace

int main(int argc, char** argv) {
  Workspace w;
  w.root = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "rlattack_acceptance";
  fs::remove_all(w.root);
  fs::create_directories(w.root);
  w.catch_dir = w.root / "catch";
  w.catch_cfg = load_at(kConfigs / "catch.json", w.catch_dir);
  std::cout << "work directory " << w.root << std::endl;

  const auto t0 = clk::now();
  Runner r;
  r.run(1, "gradient fidelity", gradient_fidelity);
  r.run(2, "agent competence", [&] { return competence(w); });
  const bool have_agents = w.agents.size() == w.catch_cfg.agents.size();
  auto needs_agents = [&](const std::function<Outcome()>& f) {
    return [&, f] { return have_agents ? f() : Outcome{false, "no trained agents"}; };
  };
  r.run(3, "uniform-attack effect", needs_agents([&] { return uniform_effect(w); }));
  r.run(4, "strategically-timed efficiency", needs_agents([&] { return timed_efficiency(w); }));
  r.run(5, "threshold laws", needs_agents([&] { return threshold_laws(w); }));
  r.run(6, "crafting soundness", needs_agents([&] { return crafting_soundness(w); }));
  r.run(7, "CEM optimality", cem_optimality);
  r.run(8, "enchanting success", needs_agents([&] { return enchanting(w); }));
  r.run(9, "model-quality ordering", needs_agents([&] { return model_quality(w); }));
  r.run(10, "reproducibility", [&] { return reproducibility(w); });

  std::cout << "\nsummary (" << fmt(seconds_since(t0), 4) << " s)\n";
  for (const std::string& line : r.lines) std::cout << "  " << line << "\n";
  std::cout << 10 - r.failures << "/10 criteria passed" << std::endl;
  return r.failures;
}
