#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>

#include "dechist/errors.hpp"
#include "dechist/invariant_suite.hpp"
#include "dechist/io.hpp"
#include "dechist/version.hpp"

namespace {

using dechist::Json;

void print_error(const char* kind, const std::string& code, const std::string& message) {
  Json j;
  j["error"] = kind;
  j["code"] = code;
  j["message"] = message;
  std::fprintf(stderr, "%s\n", j.dump().c_str());
}

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::string snapshot_format = "binary";
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;
  bool threads_set = false;
  bool strict = false;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required = false) {
  auto* opt = cmd->add_option("--config", args.config_path, "JSON config file");
  if (config_required) opt->required();
  cmd->add_option("--out", args.out_dir, "output directory (default: $DECHIST_OUT or ./out)");
  cmd->add_option("--snapshot-format", args.snapshot_format,
                  "density snapshot format: binary or csv");
  cmd->add_option("--seed", args.seed, "override RNG seed")->each([&](const std::string&) {
    args.seed_set = true;
  });
  cmd->add_option("--threads", args.threads, "worker threads (0 = auto)")
      ->each([&](const std::string&) { args.threads_set = true; });
  cmd->add_flag("--strict", args.strict, "promote warnings to errors");
}

std::string resolve_out_dir(const CommonArgs& args) {
  if (!args.out_dir.empty()) return args.out_dir;
  if (const char* env = std::getenv("DECHIST_OUT"); env != nullptr && env[0] != '\0') return env;
  return "out";
}

dechist::CliOverrides overrides_of(const CommonArgs& args) {
  dechist::CliOverrides o;
  if (args.seed_set) o.seed = args.seed;
  if (args.threads_set) o.threads = args.threads;
  return o;
}

Json load_config_or_empty(const CommonArgs& args) {
  if (args.config_path.empty()) return Json::object();
  return dechist::load_json_file(args.config_path);
}

int finalize(dechist::ScenarioReport report, const Json& config, const CommonArgs& args) {
  report.add_metadata("config_hash", dechist::config_hash(config));
  report.add_metadata("config_echo", config.dump());

  dechist::OutputOptions options;
  options.dir = resolve_out_dir(args);
  options.snapshot_format = args.snapshot_format;
  options.strict = args.strict;
  const dechist::RunManifest manifest = dechist::write_outputs(report, options);

  for (const auto& warning : report.warnings) {
    std::fprintf(stderr, "warning: %s\n", warning.c_str());
  }
  std::printf("wrote %zu files to %s\n", manifest.outputs.size(), options.dir.c_str());
  for (const auto& check : report.checks) {
    std::printf("[%s] %s = %.6g (%s)\n", check.pass ? "pass" : "FAIL", check.name.c_str(),
                check.value, check.constraint.c_str());
  }
  if (!report.all_passed()) {
    print_error("numerical", "check-failed", "one or more checks failed; see report");
    return 2;
  }
  if (args.strict && !report.warnings.empty()) {
    print_error("numerical", "strict-warnings", "warnings present and --strict given");
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"decoherent-histories quantum-to-classical simulator"};
  app.set_version_flag("--version", dechist::kVersion);
  app.require_subcommand(1);

  CommonArgs evolve_args, master_args, histories_args, classical_args, scenario_args, sweep_args,
      check_args;
  std::string scenario_name;

  auto* evolve_cmd = app.add_subcommand("evolve", "unitary wavefunction trajectory");
  add_common(evolve_cmd, evolve_args, true);
  auto* master_cmd = app.add_subcommand("master", "open-system density-matrix trajectory");
  add_common(master_cmd, master_args, true);
  auto* histories_cmd = app.add_subcommand("histories", "decoherence functional of a history spec");
  add_common(histories_cmd, histories_args, true);
  auto* classical_cmd = app.add_subcommand("classical", "Newton / Langevin reference trajectories");
  add_common(classical_cmd, classical_args, true);
  auto* scenario_cmd = app.add_subcommand("scenario", "run a named scenario");
  scenario_cmd->add_option("id", scenario_name, "scenario id")->required();
  add_common(scenario_cmd, scenario_args);
  auto* sweep_cmd = app.add_subcommand("sweep", "parameter grid over a scenario");
  add_common(sweep_cmd, sweep_args, true);
  auto* check_cmd = app.add_subcommand("check", "run the built-in invariant suite");
  add_common(check_cmd, check_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
    print_error("validation", "cli-arguments", e.what());
    return 1;
  }

  try {
    if (evolve_cmd->parsed()) {
      const Json config = load_config_or_empty(evolve_args);
      return finalize(dechist::run_evolve_command(config, overrides_of(evolve_args)), config,
                      evolve_args);
    }
    if (master_cmd->parsed()) {
      const Json config = load_config_or_empty(master_args);
      return finalize(dechist::run_master_command(config, overrides_of(master_args)), config,
                      master_args);
    }
    if (histories_cmd->parsed()) {
      const Json config = load_config_or_empty(histories_args);
      return finalize(dechist::run_histories_command(config, overrides_of(histories_args)), config,
                      histories_args);
    }
    if (classical_cmd->parsed()) {
      const Json config = load_config_or_empty(classical_args);
      return finalize(dechist::run_classical_command(config, overrides_of(classical_args)), config,
                      classical_args);
    }
    if (scenario_cmd->parsed()) {
      const Json config = load_config_or_empty(scenario_args);
      const dechist::ScenarioConfig cfg =
          dechist::parse_scenario_config(config, scenario_name, overrides_of(scenario_args));
      dechist::ScenarioReport report = dechist::run_scenario(cfg);
      report.add_metadata("config_echo_full", dechist::scenario_config_echo(cfg).dump());
      return finalize(std::move(report), config, scenario_args);
    }
    if (sweep_cmd->parsed()) {
      const Json config = load_config_or_empty(sweep_args);
      return finalize(dechist::run_sweep_command(config, overrides_of(sweep_args)), config,
                      sweep_args);
    }
    if (check_cmd->parsed()) {
      const auto results = dechist::run_invariant_suite(
          check_args.threads_set ? check_args.threads : 0);
      for (const auto& r : results) {
        std::printf("[%s] %-45s %.6g  (%s)\n", r.pass ? "pass" : "FAIL", r.name.c_str(), r.value,
                    r.constraint.c_str());
      }
      if (!dechist::all_passed(results)) {
        print_error("numerical", "invariant-failed", "invariant suite reported failures");
        return 2;
      }
      std::printf("all %zu invariants passed\n", results.size());
      return 0;
    }
  } catch (const dechist::ValidationError& e) {
    print_error("validation", e.code(), e.what());
    return 1;
  } catch (const dechist::NumericalError& e) {
    print_error("numerical", e.code(), e.what());
    return 2;
  } catch (const dechist::IoError& e) {
    print_error("io", e.code(), e.what());
    return 3;
  } catch (const std::exception& e) {
    print_error("internal", "unexpected", e.what());
    return 2;
  }
  return 1;
}
