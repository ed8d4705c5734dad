#pragma once

// Subcommand implementations behind the negdelay executable. Each writes
// its outputs into an existing or newly created directory and throws a
// negdelay::Error subclass on failure.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "negdelay/analysis.hpp"
#include "negdelay/config.hpp"
#include "negdelay/excitation.hpp"
#include "negdelay/io.hpp"
#include "negdelay/montecarlo.hpp"
#include "negdelay/oracle.hpp"

namespace negdelay {

namespace fs = std::filesystem;

struct TheoryResult {
  PerPhotonShapes shapes;
  ExcitationReport spectral;
  ExcitationReport oracle;
};

inline TheoryResult compute_theory(const RunConfig& cfg) {
  const MediumSpec& medium = cfg.medium;
  const PulseSpec pulse = cfg.pulse_spec();
  const BinGrid bins = cfg.shot.bins();

  const SampledSignal sig = gaussian_field(pulse, default_grid(pulse, medium.gamma), medium.gamma);
  TheoryResult out;
  out.spectral = spectral_report(sig, medium);
  auto phi0 = bin_average(phi0_trace(sig, medium), bins);

  const WaveguideModel model = build_model(medium.od, medium.gamma, cfg.oracle.n_atoms,
                                           static_cast<int>(cfg.oracle.checkpoint_interval));
  const WeakValueResult weak = weak_excitation_trace(model, oracle_input(pulse, medium.gamma));
  out.oracle.method = EstimatorMethod::oracle;
  out.oracle.tau0 = weak.tau0;
  out.oracle.tauT = weak.tauT;
  if (weak.tau0 > 0.0) out.oracle.ratio = weak.tauT / weak.tau0;

  out.shapes = derive_shapes(phiT_trace_theory(weak, medium, bins), std::move(phi0),
                             transmission_probability(sig, medium));
  return out;
}

namespace detail {

inline fs::path prepare_out(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw ConfigError("cannot create output directory '" + dir.string() + "'");
  return dir;
}

inline CsvCell ratio_cell(const std::optional<double>& r) {
  return r ? CsvCell{*r} : CsvCell{std::string("NA")};
}

inline void summary_row(CsvWriter& w, const ExcitationReport& r) {
  w.row({r.tau0 * 1e9, r.tauT * 1e9, ratio_cell(r.ratio), std::string(to_string(r.method))});
}

inline void write_analysis(const fs::path& out, std::uint64_t hash, const AnalysisOutcome& a, const Trace& axis,
                           std::optional<std::pair<DatasetKind, bool>> null_flag = std::nullopt) {
  {
    CsvWriter w(out / "phiT_measured.csv", hash, {"t_ns", "phi_urad", "sigma_urad"});
    for (Eigen::Index j = 0; j < a.post.phi_T.size(); ++j)
      w.row({axis.time(static_cast<std::size_t>(j)) * 1e9, a.post.phi_T[j] * 1e6,
             std::sqrt(std::max(0.0, a.post.cov(j, j))) * 1e6});
  }
  std::vector<std::string> header{"ratio", "sigma", "window_lo_ns", "window_hi_ns", "n_click", "n_noclick"};
  std::vector<CsvCell> row{a.ratio.ratio,
                           a.ratio.sigma,
                           axis.time(a.integral.window.lo) * 1e9,
                           axis.time(a.integral.window.hi) * 1e9,
                           static_cast<std::int64_t>(a.post.n_click),
                           static_cast<std::int64_t>(a.post.n_noclick)};
  if (null_flag) {
    header.insert(header.end(), {"kind", "pass"});
    row.emplace_back(std::string(to_string(null_flag->first)));
    row.emplace_back(std::string(null_flag->second ? "true" : "false"));
  }
  CsvWriter w(out / "ratio.csv", hash, header);
  w.row(row);
}

inline Trace bin_axis(const ShotConfig& shot) {
  const BinGrid b = shot.bins();
  return Trace{b.width, b.center(0), std::vector<double>(b.n, 0.0)};
}

}  // namespace detail

inline void cmd_theory(const RunConfig& cfg, const fs::path& out_dir) {
  const fs::path out = detail::prepare_out(out_dir);
  const TheoryResult th = compute_theory(cfg);
  const std::uint64_t hash = cfg.hash();
  const BinGrid bins = cfg.shot.bins();
  write_trace_csv(out / "phi0_theory.csv", hash, bins, th.shapes.phi_01);
  write_trace_csv(out / "phiT_theory.csv", hash, bins, th.shapes.phi_T1);
  CsvWriter w(out / "summary.csv", hash, {"tau0_ns", "tauT_ns", "ratio", "method"});
  detail::summary_row(w, th.spectral);
  detail::summary_row(w, th.oracle);
}

struct SimulateOptions {
  std::uint64_t seed = 1;
  int jobs = 1;
  bool truth = false;
  DatasetKind kind = DatasetKind::signal;
};

/// Writes shots.bin; returns the number of shots written.
inline std::uint64_t cmd_simulate(const RunConfig& cfg, const SimulateOptions& opt, const fs::path& out_dir) {
  const fs::path out = detail::prepare_out(out_dir);
  const TheoryResult th = compute_theory(cfg);
  const ShotModel model = make_shot_model(th.shapes, cfg.shot, opt.kind);
  ShotLogHeader h;
  h.n_samples = static_cast<std::uint32_t>(cfg.shot.n_samples);
  h.config_hash = cfg.hash();
  h.seed = opt.seed;
  h.has_truth = opt.truth;
  ShotLogWriter log(out / "shots.bin", h);

  // Cycles are simulated in parallel blocks and written in cycle order.
  constexpr std::size_t block = 16;
  const std::size_t n_cycles = cfg.campaign.n_cycles;
  const std::size_t wave = block * static_cast<std::size_t>(std::max(1, opt.jobs));
  for (std::size_t start = 0; start < n_cycles; start += wave) {
    const std::size_t stop = std::min(n_cycles, start + wave);
    const std::size_t n_blocks = (stop - start + block - 1) / block;
    std::vector<std::vector<ShotRecord>> parts(n_blocks);
    parallel_blocks(n_blocks, opt.jobs, [&](std::size_t b) {
      const std::size_t c0 = start + b * block, c1 = std::min(stop, c0 + block);
      parts[b].reserve((c1 - c0) * model.shots_per_cycle);
      for (std::size_t c = c0; c < c1; ++c) {
        Engine rng = cycle_engine(opt.seed, c);
        for (std::size_t i = 0; i < model.shots_per_cycle; ++i) parts[b].push_back(simulate_shot(rng, model, c));
      }
    });
    for (const auto& p : parts)
      for (const auto& s : p) log.write(s);
  }
  log.close();
  return log.count();
}

struct TheoryTraces {
  Trace phiT, phi0;
};

inline TheoryTraces load_theory(const fs::path& dir) {
  TheoryTraces t;
  for (const char* name : {"phiT_theory.csv", "phi0_theory.csv"})
    if (!fs::exists(dir / name))
      throw ConfigError("missing theory trace '" + (dir / name).string() + "' (run 'negdelay theory' first)");
  t.phiT = read_trace_csv(dir / "phiT_theory.csv");
  t.phi0 = read_trace_csv(dir / "phi0_theory.csv");
  if (t.phiT.size() != t.phi0.size()) throw ConfigError("theory traces differ in length");
  return t;
}

inline AnalysisOutcome cmd_analyze(const RunConfig& cfg, const fs::path& log_path, const fs::path& theory_dir,
                                   const fs::path& out_dir) {
  const TheoryTraces th = load_theory(theory_dir);
  ShotLogReader reader(log_path);
  const auto n = reader.header().n_samples;
  if (n != th.phiT.size())
    throw ConfigError("shot log has " + std::to_string(n) + " samples per shot, theory has " +
                      std::to_string(th.phiT.size()));
  std::map<std::uint64_t, CycleSummary> cycles;
  ShotRecord s;
  while (reader.next(s)) cycles.try_emplace(s.cycle, n).first->second.add(s);
  PostSelectionAccumulator acc(n);
  for (const auto& [c, summary] : cycles) acc.add(summary);

  const fs::path out = detail::prepare_out(out_dir);
  const AnalysisOutcome a =
      analyze(acc.result(), th.phiT.values, th.phi0.values, th.phiT.dt, cfg.analysis.window_fraction);
  detail::write_analysis(out, reader.header().config_hash, a, th.phiT);
  return a;
}

struct NullcheckResult {
  AnalysisOutcome outcome;
  bool pass = false;
};

/// Null dataset through the full analysis; passes when |ratio| < 2 sigma.
inline NullcheckResult run_nullcheck(const RunConfig& cfg, const TheoryResult& th, DatasetKind kind,
                                     std::uint64_t seed, int jobs) {
  const ShotModel model = make_shot_model(th.shapes, cfg.shot, kind);
  const PostSelectionAccumulator acc = accumulate_campaign(seed, cfg.campaign.n_cycles, model, jobs);
  NullcheckResult r;
  r.outcome = analyze(acc.result(), th.shapes.phi_T1, th.shapes.phi_01, cfg.shot.dt, cfg.analysis.window_fraction);
  r.pass = std::abs(r.outcome.ratio.ratio) < 2.0 * r.outcome.ratio.sigma;
  return r;
}

inline NullcheckResult cmd_nullcheck(const RunConfig& cfg, DatasetKind kind, std::uint64_t seed, int jobs,
                                     const fs::path& out_dir) {
  const fs::path out = detail::prepare_out(out_dir);
  const NullcheckResult r = run_nullcheck(cfg, compute_theory(cfg), kind, seed, jobs);
  detail::write_analysis(out, cfg.hash(), r.outcome, detail::bin_axis(cfg.shot), std::make_pair(kind, r.pass));
  return r;
}

inline void cmd_sweep(const RunConfig& cfg, const fs::path& out_dir) {
  const fs::path out = detail::prepare_out(out_dir);
  CsvWriter w(out / "sweep.csv", cfg.hash(), {"sigma_rms_ns", "od", "tau0_ns", "tauT_ns", "ratio", "method"});
  for (double od : cfg.sweep.od) {
    for (double sigma_ns : cfg.sweep.sigma_rms_ns) {
      RunConfig c = cfg;
      c.medium.od = od;
      c.pulse.sigma_rms = sigma_ns * 1e-9;
      c.validate();
      const TheoryResult th = compute_theory(c);
      for (const auto* r : {&th.spectral, &th.oracle})
        w.row({sigma_ns, od, r->tau0 * 1e9, r->tauT * 1e9, detail::ratio_cell(r->ratio),
               std::string(to_string(r->method))});
    }
  }
}

}  // namespace negdelay
