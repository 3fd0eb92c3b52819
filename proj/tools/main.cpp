#include <cstdint>
#include <exception>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "fedcore/commands.hpp"
#include "fedcore/error.hpp"

namespace {

int report_error(std::string_view kind, const std::string& message) {
  const nlohmann::ordered_json doc = {{"error", {{"kind", kind}, {"message", message}}}};
  std::cerr << doc.dump() << '\n';
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated coreset-selection simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::string log_level = "warn";

  using Command = std::function<std::string(const fedcore::RunConfig&)>;
  const std::map<std::string, std::pair<std::string, Command>> commands = {
      {"synth", {"write synthetic client and held-out archives", fedcore::cmd_synth}},
      {"partition", {"write the sample-to-client assignment", fedcore::cmd_partition}},
      {"select", {"run one selection pass and write coresets", fedcore::cmd_select}},
      {"run", {"run the federated simulation", fedcore::cmd_run}},
      {"report", {"emit CSV tables and embedding scatter data", fedcore::cmd_report}},
  };
  for (const auto& [name, entry] : commands) {
    auto* sub = app.add_subcommand(name, entry.first);
    sub->add_option("--config", config_path, "config document (JSON)")->required();
    sub->add_option("--seed", seed, "master seed, overrides the config");
    sub->add_option("--out", out_dir, "output directory, overrides the config");
    sub->add_option("--log-level", log_level, "error|warn|info|debug")
        ->check(CLI::IsMember({"error", "warn", "info", "debug"}));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("usage", e.what());
  }

  auto logger = spdlog::stderr_color_mt("fedcore");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    auto config = fedcore::RunConfig::load(config_path);
    if (seed) {
      config.seed = *seed;
      config.simulation.seed = *seed;
    }
    if (out_dir) config.output_dir = *out_dir;
    for (const auto& [name, entry] : commands) {
      if (app.got_subcommand(name)) {
        spdlog::info("{}", entry.second(config));
        return 0;
      }
    }
  } catch (const fedcore::Error& e) {
    return report_error(fedcore::to_string(e.kind()), e.what());
  } catch (const std::exception& e) {
    return report_error("internal", e.what());
  }
  return 1;
}
