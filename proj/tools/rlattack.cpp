#include <iostream>

#include "CLI11.hpp"
#include "rlattack/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Adversarial attacks on deep RL agents: train, attack-timed, attack-enchant, report"};
  app.require_subcommand(1);
  rlattack::CommandOptions opts;
  std::string config, out, predictor;
  std::uint64_t seed = 0;
  std::vector<std::string> inputs;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config, "experiment config (JSON)")->required();
    sub->add_option("--out", out, "run directory (default: output_dir from the config)");
    sub->add_option("--seed", seed, "override the master seed");
  };
  CLI::App* train = app.add_subcommand("train", "train agents and the dynamics model");
  add_common(train);
  CLI::App* timed = app.add_subcommand("attack-timed", "strategically-timed attack sweep over beta");
  add_common(timed);
  CLI::App* enchant = app.add_subcommand("attack-enchant", "enchanting attack success curve");
  add_common(enchant);
  enchant->add_option("--predictor", predictor, "state predictor for planning")
      ->check(CLI::IsMember({"learned", "oracle"}));
  CLI::App* report = app.add_subcommand("report", "summarise CSV results into report.txt and SVG plots");
  report->add_option("csv", inputs, "timed_*.csv or enchant.csv files")->required();
  report->add_option("--out", out, "output directory")->default_val(".");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  CLI::App* chosen = app.get_subcommands().front();
  opts.command = chosen->get_name();
  if (!config.empty()) opts.config = config;
  if (!out.empty()) opts.out = out;
  for (CLI::App* sub : {train, timed, enchant}) {
    if (sub == chosen && sub->get_option("--seed")->count()) opts.seed = seed;
  }
  if (!predictor.empty()) opts.predictor = predictor;
  for (const std::string& p : inputs) opts.inputs.emplace_back(p);
  std::cout << std::unitbuf;
  return rlattack::run_command(opts, std::cout, std::cerr);
}
