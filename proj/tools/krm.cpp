#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "krm/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Exact Kantorovich-Rubinshtein distances, invariant measures and Lipschitz constructions"};
  app.require_subcommand(1);
  krm::cli::RunConfig config;
  std::size_t budget = 0;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--out", config.out, "Write the result to this file instead of stdout");
    sub->add_option("--format", config.format, "Output format")->check(CLI::IsMember({"json", "csv"}));
    sub->add_option("--seed", config.seed, "Seed for randomized cross-checks");
  };
  auto iteration = [&](CLI::App* sub) {
    sub->add_option("--tol", config.tol, "Target a posteriori bound")->capture_default_str();
    sub->add_option("--cap", config.cap, "Atom cap for coarsening")->capture_default_str();
    sub->add_option("--chaos", config.chaos, "Chaos-game samples for a mean cross-check");
  };

  auto* dist = app.add_subcommand("dist", "Exact distance between two measures, with certificate");
  dist->add_option("inputs", config.inputs, "Two measure files")->required()->expected(2);
  common(dist);

  auto* invariant = app.add_subcommand("invariant", "Invariant measure of a contraction system");
  invariant->add_option("inputs", config.inputs, "System file and optional initial measure")->required()->expected(1, 2);
  common(invariant);
  iteration(invariant);

  auto* scenario = app.add_subcommand("scenario", "Built-in scenario");
  scenario->add_option("name", config.scenario, "Scenario name")
      ->required()
      ->check(CLI::IsMember(krm::cli::scenarios()));
  scenario->add_option("--horizon", config.horizon, "Largest sequence index")->capture_default_str();
  scenario->add_option("--dim", config.dim, "Dimension for example-5.1")->capture_default_str();
  scenario->add_option("--trunc", config.trunc, "Truncation N for example-5.1 (default: dim)");
  common(scenario);
  iteration(scenario);

  auto* env = app.add_subcommand("envelope", "Lipschitz envelope of a function");
  env->add_option("inputs", config.inputs, "Function file")->required()->expected(1);
  env->add_option("--n", config.n, "Envelope slope")->required();
  common(env);

  auto* extend = app.add_subcommand("extend", "Largest 1-Lipschitz extension of a partial function");
  extend->add_option("inputs", config.inputs, "Function file")->required()->expected(1);
  common(extend);

  auto* cover = app.add_subcommand("cover", "Ball cover leaving less than delta mass of every measure");
  cover->add_option("inputs", config.inputs, "Measure files")->required();
  cover->add_option("--eps", config.eps, "Ball radius")->required();
  cover->add_option("--delta", config.delta, "Mass threshold")->required();
  auto* budget_opt = cover->add_option("--budget", budget, "Largest number of balls");
  common(cover);

  auto* witness = app.add_subcommand("witness", "Oscillating witness function for a non-tight sequence");
  witness->add_option("--scenario", config.scenario, "escaping-dirac, lemma-3.7 or constant");
  witness->add_option("--eps", config.eps)->capture_default_str();
  witness->add_option("--delta", config.delta)->capture_default_str();
  witness->add_option("--k", config.k, "Number of stages")->capture_default_str();
  witness->add_option("--horizon", config.horizon, "Largest sequence index probed")->capture_default_str();
  common(witness);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : krm::cli::kExitError;
  }
  config.command = app.get_subcommands().front()->get_name();
  if (budget_opt->count() > 0) config.budget = budget;
  return krm::cli::run(config, std::cout, std::cerr);
}
