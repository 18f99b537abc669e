#include <CLI11.hpp>

#include "tubewalk/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"tubewalk: quenched small-deviation estimates for random walks in random environments"};
  app.require_subcommand(1, 1);
  tubewalk::cli::Args args;

  for (const char* name : {"simulate", "gamma", "fit", "verify", "report"}) {
    static const std::map<std::string, std::string> help = {
        {"simulate", "survival probability estimates per n (survival.csv)"},
        {"gamma", "confinement rate table (gamma.csv)"},
        {"fit", "decay-rate fit against the predicted constant (fit.json, fit.csv)"},
        {"verify", "assumption flags and self-tests; exit 0 iff all pass"},
        {"report", "consolidate prior JSON outputs (report.json)"}};
    auto* sub = app.add_subcommand(name, help.at(name));
    sub->add_option("--config", args.config_path, "config file (YAML)")->required();
    sub->add_option("--seed", args.seed, "master seed");
    sub->add_option("--set", args.overrides, "override, key=value with a dotted key")->take_all();
    sub->add_option("--out", args.out, "output directory");
    sub->callback([&args, name] { args.subcommand = name; });
  }

  CLI11_PARSE(app, argc, argv);
  return tubewalk::cli::run(args);
}
