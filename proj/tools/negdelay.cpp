#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "negdelay/commands.hpp"

namespace {

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
};

void add_common(CLI::App* sub, Common& c, bool config_required = true) {
  auto* opt = sub->add_option("--config", c.config, "run configuration file");
  if (config_required) opt->required();
  sub->add_option("--out", c.out, "output directory")->required();
  sub->add_option("--seed", c.seed, "campaign seed (overrides campaign.seed)");
  sub->add_option("--jobs", c.jobs, "worker threads")->check(CLI::PositiveNumber);
}

negdelay::RunConfig config_of(const Common& c) {
  return c.config.empty() ? negdelay::RunConfig{} : negdelay::load_config(c.config);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"negdelay: excitation time of transmitted photons in a resonant atomic medium"};
  app.require_subcommand(1);
  Common common;
  bool truth = false;
  std::string kind = "signal";
  std::string log_path, theory_dir;

  auto* theory = app.add_subcommand("theory", "theory traces and tau_T / tau_0 summary");
  add_common(theory, common);

  auto* simulate = app.add_subcommand("simulate", "simulate a shot campaign into shots.bin");
  add_common(simulate, common);
  simulate->add_flag("--truth", truth, "store photon-number truth per shot");
  simulate->add_option("--kind", kind, "signal, no_atoms, bypass_atoms or no_signal");

  auto* analyze = app.add_subcommand("analyze", "post-select a shot log and estimate tau_T / tau_0");
  add_common(analyze, common, false);
  analyze->add_option("--log", log_path, "shot log written by simulate")->required();
  analyze->add_option("--theory", theory_dir, "directory with phiT_theory.csv and phi0_theory.csv")->required();

  auto* nullcheck = app.add_subcommand("nullcheck", "simulate and analyze a null dataset");
  add_common(nullcheck, common);
  nullcheck->add_option("--kind", kind, "no_atoms, bypass_atoms or no_signal")->required();

  auto* sweep = app.add_subcommand("sweep", "tau_T / tau_0 over the sweep grid");
  add_common(sweep, common);

  CLI11_PARSE(app, argc, argv);

  try {
    const negdelay::RunConfig cfg = config_of(common);
    const std::uint64_t seed = common.seed.value_or(cfg.campaign.seed);
    if (theory->parsed()) {
      negdelay::cmd_theory(cfg, common.out);
    } else if (simulate->parsed()) {
      const auto n = negdelay::cmd_simulate(
          cfg, {seed, common.jobs, truth, negdelay::parse_dataset_kind(kind)}, common.out);
      std::cerr << "wrote " << n << " shots\n";
    } else if (analyze->parsed()) {
      const auto a = negdelay::cmd_analyze(cfg, log_path, theory_dir, common.out);
      std::cerr << "ratio " << a.ratio.ratio << " +- " << a.ratio.sigma << '\n';
    } else if (nullcheck->parsed()) {
      const auto k = negdelay::parse_dataset_kind(kind);
      if (k == negdelay::DatasetKind::signal) throw negdelay::ConfigError("--kind must name a null dataset");
      const auto r = negdelay::cmd_nullcheck(cfg, k, seed, common.jobs, common.out);
      std::cerr << negdelay::to_string(k) << ": ratio " << r.outcome.ratio.ratio << " +- "
                << r.outcome.ratio.sigma << (r.pass ? " pass" : " FAIL") << '\n';
    } else if (sweep->parsed()) {
      negdelay::cmd_sweep(cfg, common.out);
    }
  } catch (const negdelay::Error& e) {
    std::cerr << "negdelay: " << e.what() << '\n';
    return negdelay::exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "negdelay: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
