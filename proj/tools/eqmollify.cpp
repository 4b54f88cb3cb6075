// eqmollify CLI: one subcommand per experiment kind.
// Exit codes: 0 all checks pass, 1 a check failed, 2 configuration error,
// 3 numerical abort.

#include "eqmollify/eqmollify.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

namespace {

struct Overrides {
  std::string config;
  std::string scenario;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> epsilon_steps;
  std::optional<int> grid;
  bool quiet = false;
};

void add_flags(CLI::App* sub, Overrides& o) {
  sub->add_option("--config", o.config, "JSON config file");
  sub->add_option("--scenario", o.scenario, "built-in scenario (used when no config is given)");
  sub->add_option("--out", o.out, "output directory");
  sub->add_option("--seed", o.seed, "random seed");
  sub->add_option("--epsilon-steps", o.epsilon_steps, "halving steps from the largest epsilon")->check(CLI::Range(1, 12));
  sub->add_option("--grid", o.grid, "lattice points per axis")->check(CLI::Range(3, 257));
  sub->add_flag("--quiet", o.quiet, "only print the exit status line");
}

eqmollify::ExperimentConfig resolve(const Overrides& o) {
  using namespace eqmollify;
  if (o.config.empty() && o.scenario.empty()) throw ConfigError("give --config PATH or --scenario NAME");
  ExperimentConfig c = o.config.empty() ? default_config(o.scenario) : load_config(o.config);
  if (!o.config.empty() && !o.scenario.empty() && o.scenario != c.scenario)
    throw ConfigError("--scenario '" + o.scenario + "' contradicts the config scenario '" + c.scenario + "'");
  if (o.seed) c.seed = *o.seed;
  if (o.epsilon_steps) c.epsilons = halving_schedule(c.epsilons.front(), *o.epsilon_steps);
  if (o.grid) c.grid = *o.grid;
  if (!o.out.empty()) c.output_dir = o.out;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Equivariant mollification of currents and metrics"};
  app.require_subcommand(1);
  Overrides o;
  std::string chosen;
  for (const auto& [name, kind] : eqmollify::experiment_kinds()) {
    CLI::App* sub = app.add_subcommand(name, "run the " + name + " experiment");
    add_flags(sub, o);
    sub->callback([&chosen, n = name] { chosen = n; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    const eqmollify::ExperimentConfig cfg = resolve(o);
    const auto result = eqmollify::run_experiment(eqmollify::parse_kind(chosen), cfg);
    eqmollify::write_outputs(result, cfg.output_dir);
    if (!o.quiet)
      for (const auto& c : result.checks)
        std::printf("%-4s %-44s value=%.6g tol=%.3g\n", c.pass ? "PASS" : "FAIL", c.name.c_str(), c.value,
                    c.tolerance);
    std::printf("%s %s %s -> %s\n", result.all_pass() ? "ok" : "FAILED", result.kind.c_str(),
                result.scenario.c_str(), cfg.output_dir.c_str());
    return result.all_pass() ? 0 : 1;
  } catch (const eqmollify::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const eqmollify::NumericalAbort& e) {
    std::fprintf(stderr, "numerical abort: %s\n", e.what());
    return 3;
  } catch (const eqmollify::InputError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}
