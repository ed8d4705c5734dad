#pragma once

// Post-selection averaging, covariance, windowed trapezoid integration with
// Jacobian error propagation, ratio estimation, Gaussian alignment and the
// photon-number calibration fit.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "negdelay/errors.hpp"
#include "negdelay/montecarlo.hpp"
#include "negdelay/trace.hpp"

namespace negdelay {

struct PostSelectedResult {
  Eigen::VectorXd phi_C, phi_NC, phi_T;
  Eigen::MatrixXd cov;  ///< covariance of phi_T (standard error of the mean)
  std::size_t n_click = 0, n_noclick = 0;
  std::size_t n_cycles = 0;  ///< cycles that contributed (both classes present)
};

/// Streaming reduction over cycles. Each cycle with both classes present
/// contributes its class means; phi_T and its covariance come from the
/// spread of the per-cycle differences. Partial accumulators merge exactly.
class PostSelectionAccumulator {
 public:
  explicit PostSelectionAccumulator(std::size_t n_samples = 36)
      : mean_c_(Eigen::VectorXd::Zero(n_samples)), mean_nc_(Eigen::VectorXd::Zero(n_samples)),
        mean_d_(Eigen::VectorXd::Zero(n_samples)), m2_(Eigen::MatrixXd::Zero(n_samples, n_samples)) {}

  [[nodiscard]] std::size_t n_samples() const { return static_cast<std::size_t>(mean_d_.size()); }
  [[nodiscard]] std::size_t n_cycles() const { return k_; }
  [[nodiscard]] std::size_t n_click() const { return n_click_; }
  [[nodiscard]] std::size_t n_noclick() const { return n_noclick_; }

  void add(const CycleSummary& c) {
    if (c.sum_click.size() != n_samples() || c.sum_noclick.size() != n_samples())
      throw AnalysisError("trace length mismatch in accumulator");
    n_click_ += c.n_click;
    n_noclick_ += c.n_noclick;
    if (c.n_click == 0 || c.n_noclick == 0) {
      ++skipped_;
      return;
    }
    const Eigen::Map<const Eigen::VectorXd> sc(c.sum_click.data(), c.sum_click.size());
    const Eigen::Map<const Eigen::VectorXd> snc(c.sum_noclick.data(), c.sum_noclick.size());
    const Eigen::VectorXd mc = sc / static_cast<double>(c.n_click);
    const Eigen::VectorXd mnc = snc / static_cast<double>(c.n_noclick);
    const Eigen::VectorXd d = mc - mnc;
    ++k_;
    const double inv = 1.0 / static_cast<double>(k_);
    mean_c_ += (mc - mean_c_) * inv;
    mean_nc_ += (mnc - mean_nc_) * inv;
    const Eigen::VectorXd delta = d - mean_d_;
    mean_d_ += delta * inv;
    m2_.noalias() += delta * (d - mean_d_).transpose();
  }

  void merge(const PostSelectionAccumulator& o) {
    if (o.n_samples() != n_samples()) throw AnalysisError("trace length mismatch in merge");
    n_click_ += o.n_click_;
    n_noclick_ += o.n_noclick_;
    skipped_ += o.skipped_;
    if (o.k_ == 0) return;
    if (k_ == 0) {
      mean_c_ = o.mean_c_;
      mean_nc_ = o.mean_nc_;
      mean_d_ = o.mean_d_;
      m2_ = o.m2_;
      k_ = o.k_;
      return;
    }
    const double na = static_cast<double>(k_), nb = static_cast<double>(o.k_), n = na + nb;
    const Eigen::VectorXd delta = o.mean_d_ - mean_d_;
    m2_ += o.m2_ + delta * delta.transpose() * (na * nb / n);
    mean_d_ += delta * (nb / n);
    mean_c_ += (o.mean_c_ - mean_c_) * (nb / n);
    mean_nc_ += (o.mean_nc_ - mean_nc_) * (nb / n);
    k_ += o.k_;
  }

  [[nodiscard]] PostSelectedResult result() const {
    if (n_click_ < 2 || n_noclick_ < 2) throw AnalysisError("post-selection class has fewer than 2 shots");
    if (k_ < 2) throw AnalysisError("fewer than 2 cycles with both click and no-click shots");
    PostSelectedResult r;
    r.phi_C = mean_c_;
    r.phi_NC = mean_nc_;
    r.phi_T = mean_c_ - mean_nc_;
    const double k = static_cast<double>(k_);
    r.cov = m2_ / (k * (k - 1.0));
    r.cov = 0.5 * (r.cov + r.cov.transpose()).eval();
    r.n_click = n_click_;
    r.n_noclick = n_noclick_;
    r.n_cycles = k_;
    return r;
  }

 private:
  Eigen::VectorXd mean_c_, mean_nc_, mean_d_;
  Eigen::MatrixXd m2_;
  std::size_t k_ = 0, skipped_ = 0, n_click_ = 0, n_noclick_ = 0;
};

/// Groups shots by cycle index; shot order within the span is irrelevant.
inline PostSelectionAccumulator accumulate_shots(std::span<const ShotRecord> shots) {
  if (shots.empty()) throw AnalysisError("no shots to accumulate");
  const std::size_t n = shots.front().phase_samples.size();
  std::map<std::uint64_t, CycleSummary> cycles;
  for (const auto& s : shots) {
    if (s.phase_samples.size() != n) throw AnalysisError("inconsistent trace length in shot stream");
    auto it = cycles.try_emplace(s.cycle, n).first;
    it->second.add(s);
  }
  PostSelectionAccumulator acc(n);
  for (const auto& [c, summary] : cycles) acc.add(summary);
  return acc;
}

inline PostSelectedResult accumulate(std::span<const ShotRecord> shots) { return accumulate_shots(shots).result(); }

/// Aggregated-sampler campaign. Cycles are reduced in fixed blocks merged in
/// block order, so the result does not depend on `jobs`.
inline PostSelectionAccumulator accumulate_campaign(std::uint64_t seed, std::size_t n_cycles, const ShotModel& m,
                                                    int jobs = 1, std::size_t block = 512) {
  const std::size_t n_blocks = (n_cycles + block - 1) / block;
  std::vector<PostSelectionAccumulator> parts(n_blocks, PostSelectionAccumulator(m.n_samples()));
  parallel_blocks(n_blocks, jobs, [&](std::size_t b) {
    const std::size_t end = std::min(n_cycles, (b + 1) * block);
    for (std::size_t c = b * block; c < end; ++c) {
      Engine rng = cycle_engine(seed, c);
      parts[b].add(simulate_cycle_summary(rng, m));
    }
  });
  PostSelectionAccumulator total(m.n_samples());
  for (const auto& p : parts) total.merge(p);
  return total;
}

struct IndexWindow {
  std::size_t lo = 0, hi = 0;  ///< inclusive
  [[nodiscard]] std::size_t size() const { return hi - lo + 1; }
};

/// Outermost samples where |trace| reaches fraction * max|trace|.
inline IndexWindow integration_window(std::span<const double> trace, double fraction = 0.3) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw AnalysisError("window fraction must lie in [0, 1]");
  double peak = 0.0;
  for (double v : trace) {
    if (!std::isfinite(v)) throw AnalysisError("non-finite value in theory trace");
    peak = std::max(peak, std::abs(v));
  }
  if (!(peak > 0.0)) throw AnalysisError("flat theory trace: no integration window");
  const double thr = fraction * peak;
  auto inside = [&](double v) { return std::abs(v) >= thr && std::abs(v) > 0.0; };
  IndexWindow w;
  while (!inside(trace[w.lo])) ++w.lo;
  w.hi = trace.size() - 1;
  while (!inside(trace[w.hi])) --w.hi;
  return w;
}

struct IntegralResult {
  double value = 0.0;
  double sigma = 0.0;
  IndexWindow window;
  Eigen::VectorXd jacobian;
};

inline IntegralResult integrate_trapz(std::span<const double> trace, IndexWindow window, double dt) {
  if (window.hi >= trace.size() || window.lo > window.hi) throw AnalysisError("integration window out of bounds");
  IntegralResult r;
  r.window = window;
  r.jacobian = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(trace.size()));
  for (std::size_t i = window.lo; i <= window.hi; ++i)
    r.jacobian[static_cast<Eigen::Index>(i)] = (i == window.lo || i == window.hi) ? 0.5 * dt : dt;
  if (window.lo == window.hi) r.jacobian.setZero();
  for (std::size_t i = 0; i < trace.size(); ++i) r.value += r.jacobian[static_cast<Eigen::Index>(i)] * trace[i];
  return r;
}

inline double propagate_error(const Eigen::VectorXd& jacobian, const Eigen::MatrixXd& cov) {
  if (cov.rows() != jacobian.size() || cov.cols() != jacobian.size())
    throw AnalysisError("jacobian and covariance dimensions differ");
  const double var = jacobian.dot(cov * jacobian);
  if (var < -1e-14) throw AnalysisError("negative variance in error propagation");
  return std::sqrt(std::max(0.0, var));
}

inline IntegralResult integrate(const PostSelectedResult& r, IndexWindow window, double dt) {
  std::span<const double> phi(r.phi_T.data(), static_cast<std::size_t>(r.phi_T.size()));
  IntegralResult out = integrate_trapz(phi, window, dt);
  out.sigma = propagate_error(out.jacobian, r.cov);
  return out;
}

struct RatioResult {
  double ratio = 0.0;
  double sigma = 0.0;
};

/// Ratio of the windowed phi_T integral to the integral of phi_0 over its
/// whole support. phi_0 is treated as exact.
inline RatioResult ratio_estimate(const IntegralResult& phiT, std::span<const double> phi0, double dt) {
  if (phi0.size() < 2) throw AnalysisError("phi_0 trace too short");
  const IntegralResult den = integrate_trapz(phi0, IndexWindow{0, phi0.size() - 1}, dt);
  double scale = 0.0;
  for (double v : phi0) scale = std::max(scale, std::abs(v));
  if (!(std::abs(den.value) > 1e-12 * scale * dt * static_cast<double>(phi0.size())) || den.value == 0.0)
    throw AnalysisError("phi_0 integral is zero: ratio undefined");
  return RatioResult{phiT.value / den.value, phiT.sigma / std::abs(den.value)};
}

struct GaussianFit {
  double amplitude = 0.0;
  double center = 0.0;
  double width = 0.0;
  int iterations = 0;
  double residual_rms = 0.0;
};

/// Levenberg-Marquardt fit of a*exp(-(t-c)^2/(2 w^2)) on t_j = t0 + j*dt.
inline GaussianFit fit_gaussian(std::span<const double> y, double dt, double t0 = 0.0) {
  const auto n = static_cast<Eigen::Index>(y.size());
  if (n < 4) throw AnalysisError("gaussian fit needs at least 4 samples");
  Eigen::VectorXd t(n), yv(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    t[j] = t0 + dt * static_cast<double>(j);
    yv[j] = y[static_cast<std::size_t>(j)];
  }
  Eigen::Index arg = 0;
  for (Eigen::Index j = 1; j < n; ++j)
    if (yv[j] > yv[arg]) arg = j;
  const double ymin = yv.minCoeff();
  if (!(yv[arg] > 0.0) || yv[arg] == ymin)
    throw AnalysisError("gaussian fit: flat or non-positive trace (max " + std::to_string(yv[arg]) + ")");

  Eigen::Vector3d p(yv[arg], t[arg], 0.0);
  {
    double s0 = 0.0, s2 = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double wgt = std::max(0.0, yv[j]);
      s0 += wgt;
      s2 += wgt * (t[j] - p[1]) * (t[j] - p[1]);
    }
    p[2] = std::max(std::sqrt(s2 / s0), 0.5 * dt);
  }

  auto residual = [&](const Eigen::Vector3d& q) {
    Eigen::VectorXd r(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const double u = (t[j] - q[1]) / q[2];
      r[j] = yv[j] - q[0] * std::exp(-0.5 * u * u);
    }
    return r;
  };

  Eigen::VectorXd r = residual(p);
  double cost = r.squaredNorm();
  double lambda = 1e-3;
  int it = 0;
  bool converged = false;
  for (; it < 200 && !converged; ++it) {
    Eigen::MatrixXd J(n, 3);
    for (Eigen::Index j = 0; j < n; ++j) {
      const double u = (t[j] - p[1]) / p[2];
      const double g = std::exp(-0.5 * u * u);
      J(j, 0) = g;
      J(j, 1) = p[0] * g * u / p[2];
      J(j, 2) = p[0] * g * u * u / p[2];
    }
    const Eigen::Matrix3d JtJ = J.transpose() * J;
    const Eigen::Vector3d g = J.transpose() * r;
    for (;;) {
      Eigen::Matrix3d A = JtJ;
      A.diagonal() *= (1.0 + lambda);
      const Eigen::Vector3d step = A.ldlt().solve(g);
      const Eigen::Vector3d q = p + step;
      if (q.allFinite() && q[2] > 0.0) {
        const Eigen::VectorXd rq = residual(q);
        const double cq = rq.squaredNorm();
        if (cq <= cost) {
          const Eigen::Vector3d scale(std::abs(q[0]), std::max(std::abs(q[1]), q[2]), q[2]);
          converged = (step.cwiseAbs().array() < 1e-8 * scale.array()).all() || cq == 0.0;
          p = q;
          r = rq;
          cost = cq;
          lambda = std::max(lambda / 3.0, 1e-12);
          break;
        }
      }
      lambda *= 4.0;
      if (lambda > 1e12) {
        converged = true;  // no further decrease possible at this precision
        break;
      }
    }
  }

  GaussianFit fit{p[0], p[1], p[2], it, std::sqrt(cost / static_cast<double>(n))};
  const double span = dt * static_cast<double>(n - 1);
  if (!p.allFinite() || !(p[0] > 0.0) || p[2] > 5.0 * span || p[1] < t[0] - span || p[1] > t[n - 1] + span)
    throw AnalysisError("gaussian fit did not converge: amplitude " + std::to_string(p[0]) + ", width " +
                        std::to_string(p[2]) + ", residual rms " + std::to_string(fit.residual_rms));
  return fit;
}

inline GaussianFit fit_gaussian(const Trace& tr) { return fit_gaussian(tr.values, tr.dt, tr.t0); }

/// Centre of the measured profile minus centre of the theory profile. Both
/// are oriented by the sign of the theory integral, so negative phase
/// profiles (red-detuned probe) align like positive ones.
inline double time_align(Trace measured, Trace theory) {
  if (theory.integral() < 0.0) {
    measured *= -1.0;
    theory *= -1.0;
  }
  return fit_gaussian(measured).center - fit_gaussian(theory).center;
}

struct SlopeFit {
  double slope = 0.0;
  double slope_stderr = 0.0;  ///< NaN with only two points
  double intercept = 0.0;
};

inline constexpr double kSaturationPhotonNumber = 2000.0;

/// OLS line through (photon number, peak phase) points.
inline SlopeFit calibration_slope(std::span<const std::pair<double, double>> points) {
  if (points.size() < 2) throw AnalysisError("calibration slope needs at least 2 points");
  for (const auto& [x, y] : points) {
    if (!(x < kSaturationPhotonNumber))
      throw AnalysisError("photon number " + std::to_string(x) + " is in the saturation domain (>= 2000)");
    if (!std::isfinite(y)) throw AnalysisError("non-finite phase in calibration points");
  }
  const double n = static_cast<double>(points.size());
  double mx = 0.0, my = 0.0;
  for (const auto& [x, y] : points) {
    mx += x;
    my += y;
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [x, y] : points) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
  }
  if (!(sxx > 0.0)) throw AnalysisError("calibration points share one photon number");
  SlopeFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (points.size() > 2) {
    double sse = 0.0;
    for (const auto& [x, y] : points) {
      const double e = y - f.intercept - f.slope * x;
      sse += e * e;
    }
    f.slope_stderr = std::sqrt(sse / (n - 2.0) / sxx);
  } else {
    f.slope_stderr = std::numeric_limits<double>::quiet_NaN();
  }
  return f;
}

/// Window, integral and ratio for one post-selected measurement.
struct AnalysisOutcome {
  PostSelectedResult post;
  IntegralResult integral;
  RatioResult ratio;
};

inline AnalysisOutcome analyze(const PostSelectedResult& post, std::span<const double> phiT_theory,
                               std::span<const double> phi0_theory, double dt, double window_fraction = 0.3) {
  if (phiT_theory.size() != static_cast<std::size_t>(post.phi_T.size()) || phi0_theory.size() != phiT_theory.size())
    throw AnalysisError("theory trace length does not match measured trace");
  AnalysisOutcome out;
  out.post = post;
  out.integral = integrate(post, integration_window(phiT_theory, window_fraction), dt);
  out.ratio = ratio_estimate(out.integral, phi0_theory, dt);
  return out;
}

}  // namespace negdelay
