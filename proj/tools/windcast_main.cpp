#include <iostream>

#include <CLI11.hpp>

#include "windcast/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Probabilistic wind power forecasting from ensemble weather forecasts"};
  app.require_subcommand(1);

  std::string config;
  std::string method;
  int jobs = 0;
  for (const char* name : {"generate", "fit", "forecast", "evaluate", "report"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config, "run configuration (YAML)")->required();
    if (std::string_view(name) == "fit" || std::string_view(name) == "forecast")
      sub->add_option("--method", method, "restrict the stage to one method");
    sub->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : windcast::cli::kExitConfig;
  }
  windcast::cli::StageOptions opt;
  if (!method.empty()) opt.method = method;
  if (jobs > 0) opt.jobs = jobs;
  return windcast::cli::run_stage(app.get_subcommands().front()->get_name(), config, opt, std::cerr);
}
