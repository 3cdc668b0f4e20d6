// qfcsim <scenario> --config <path> [--seed N] [--out DIR] [--set key=value ...]
//
// Exit status: 0 success, 1 usage error, 2 configuration error, 3 scenario
// failure.

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qfcsim/qfcsim.hpp"

namespace {

constexpr int exit_usage = 1;
constexpr int exit_config = 2;
constexpr int exit_scenario = 3;

std::string scenario_list() {
  std::string s;
  for (auto n : qfcsim::scenario_names) {
    if (!s.empty()) s += ", ";
    s += n;
  }
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pulsed quantum frequency downconversion simulator"};
  std::string scenario;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::vector<std::string> overrides;
  app.add_option("scenario", scenario, "one of: " + scenario_list())->required();
  app.add_option("--config", config_path, "configuration file")->required();
  app.add_option("--seed", seed, "random seed (overrides config)");
  app.add_option("--out", out_dir, "output directory (overrides QFCSIM_OUT and config)");
  app.add_option("--set", overrides, "key=value configuration override")->take_all();
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : exit_usage;
  }
  if (!qfcsim::is_scenario(scenario)) {
    std::cerr << "unknown scenario '" << scenario << "' (expected one of: " << scenario_list()
              << ")\n";
    return exit_usage;
  }

  qfcsim::ExperimentConfig config;
  try {
    config = qfcsim::load_config(config_path);
    for (const auto& o : overrides) qfcsim::apply_override(config, o);
    if (seed) config.seed = *seed;
    if (!out_dir.empty())
      config.output_dir = out_dir;
    else if (const char* env = std::getenv("QFCSIM_OUT"); env && *env)
      config.output_dir = env;
    qfcsim::validate_config(config);
  } catch (const qfcsim::ConfigError& e) {
    std::cerr << e.what() << '\n';
    return exit_config;
  }

  try {
    const auto report = qfcsim::run_scenario(scenario, config, config.output_dir);
    std::cout << report.scenario << " -> " << report.directory.string() << '\n';
    for (const auto& m : report.metrics) {
      std::cout << "  " << m.name << " = " << qfcsim::format_number(m.value);
      if (!m.unit.empty()) std::cout << ' ' << m.unit;
      if (m.paper_value) std::cout << "  (paper " << qfcsim::format_number(*m.paper_value) << ')';
      std::cout << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return exit_scenario;
  }
  return 0;
}
