#pragma once

// Numerical checks of the denoiser-as-planner equivalence in the closed-form
// Gaussian case: the posterior mean maximizes quadratic welfare, any affine
// perturbation loses by exactly the orthogonal-decomposition gap, and the
// optimal noise predictor reproduces the posterior mean pointwise.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "pamdp/errors.hpp"

namespace pamdp {

struct ScheduleEntry {
  double t = 0.0;
  double alpha = 1.0;  // signal coefficient
  double sigma = 0.0;  // noise level
};

// Isotropic Gaussian prior x0 ~ N(mu0 * 1, sigma0^2 I_d) pushed through the
// forward corruption x_t = alpha_t x0 + sigma_t eps.
struct GaussianDiffusionSpec {
  double mu0 = 0.0;
  double sigma0_sq = 1.0;
  int dim = 1;
  std::vector<ScheduleEntry> schedule;

  void validate() const {
    if (dim < 1) throw ConfigError("GaussianDiffusionSpec: dim must be >= 1");
    if (!(sigma0_sq >= 0.0)) throw ConfigError("GaussianDiffusionSpec: sigma0^2 must be >= 0");
    if (schedule.size() < 2) {
      throw ConfigError("GaussianDiffusionSpec: schedule needs at least the two endpoints");
    }
    for (const ScheduleEntry& e : schedule) {
      if (e.sigma < 0.0) throw ConfigError("GaussianDiffusionSpec: sigma_t must be >= 0");
    }
    const ScheduleEntry& first = schedule.front();
    const ScheduleEntry& last = schedule.back();
    if (std::abs(first.alpha - 1.0) > 1e-6 || std::abs(first.sigma) > 1e-6) {
      throw ConfigError("GaussianDiffusionSpec: schedule must start at alpha=1, sigma=0");
    }
    if (std::abs(last.alpha) > 1e-6 || std::abs(last.sigma - 1.0) > 1e-6) {
      throw ConfigError("GaussianDiffusionSpec: schedule must end at alpha~0, sigma~1");
    }
  }

  const ScheduleEntry& entry_at(double t) const {
    for (const ScheduleEntry& e : schedule) {
      if (std::abs(e.t - t) <= 1e-12) return e;
    }
    throw ConfigError("GaussianDiffusionSpec: t=" + std::to_string(t) + " not in the schedule");
  }

  // Variance-preserving cosine path sampled at `points` times in [0,1].
  static GaussianDiffusionSpec cosine(double mu0, double sigma0_sq, int dim, int points = 5) {
    if (points < 2) throw ConfigError("GaussianDiffusionSpec: need at least 2 schedule points");
    GaussianDiffusionSpec spec;
    spec.mu0 = mu0;
    spec.sigma0_sq = sigma0_sq;
    spec.dim = dim;
    constexpr double half_pi = 1.5707963267948966;
    for (int i = 0; i < points; ++i) {
      const double t = static_cast<double>(i) / (points - 1);
      spec.schedule.push_back({t, std::cos(half_pi * t), std::sin(half_pi * t)});
    }
    spec.schedule.front() = {0.0, 1.0, 0.0};
    spec.schedule.back() = {1.0, 0.0, 1.0};
    return spec;
  }
};

// Reconstruction rule x_hat(x_t) = gain * x_t + offset, applied per dimension.
struct AffineRule {
  double gain = 0.0;
  double offset = 0.0;
  double apply(double x) const { return gain * x + offset; }
};

// A reconstruction rule per schedule entry; the Bayes denoiser is one instance.
struct Estimator {
  std::vector<AffineRule> per_entry;  // aligned with spec.schedule

  const AffineRule& rule_at(const GaussianDiffusionSpec& spec, double t) const {
    for (std::size_t i = 0; i < spec.schedule.size(); ++i) {
      if (std::abs(spec.schedule[i].t - t) <= 1e-12) return per_entry[i];
    }
    throw ConfigError("Estimator: t not in the schedule");
  }
};

// Posterior mean under the linear-Gaussian model:
//   E[x0 | x_t] = mu0 + G (x_t - alpha_t mu0),  G = alpha_t s0 / (alpha_t^2 s0 + sigma_t^2).
inline AffineRule bayes_denoiser(const GaussianDiffusionSpec& spec, double t) {
  const ScheduleEntry& e = spec.entry_at(t);
  const double marginal_var = e.alpha * e.alpha * spec.sigma0_sq + e.sigma * e.sigma;
  if (marginal_var <= 0.0) {
    throw ConfigError("bayes_denoiser: degenerate spec, alpha^2 sigma0^2 + sigma^2 = 0");
  }
  const double gain = e.alpha * spec.sigma0_sq / marginal_var;
  return {gain, spec.mu0 * (1.0 - gain * e.alpha)};
}

inline Estimator bayes_estimator(const GaussianDiffusionSpec& spec) {
  Estimator est;
  for (const ScheduleEntry& e : spec.schedule) est.per_entry.push_back(bayes_denoiser(spec, e.t));
  return est;
}

struct ForwardSamples {
  int dim = 0;
  long long n = 0;
  std::vector<double> x0;  // n*dim, row major
  std::vector<double> xt;
};

inline ForwardSamples forward_sample(const GaussianDiffusionSpec& spec, double t,
                                     std::uint64_t seed, long long n) {
  const ScheduleEntry& e = spec.entry_at(t);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double sigma0 = std::sqrt(spec.sigma0_sq);
  ForwardSamples out;
  out.dim = spec.dim;
  out.n = n;
  out.x0.resize(static_cast<std::size_t>(n) * spec.dim);
  out.xt.resize(out.x0.size());
  for (std::size_t i = 0; i < out.x0.size(); ++i) {
    const double x0 = spec.mu0 + sigma0 * gauss(rng);
    out.x0[i] = x0;
    out.xt[i] = e.alpha * x0 + e.sigma * gauss(rng);
  }
  return out;
}

struct WelfareEstimate {
  double welfare = 0.0;  // -E||x0 - x_hat(x_t)||^2
  double std_error = 0.0;
};

namespace detail {

// Welfare of an affine rule over pre-drawn pairs; shared draws let dominance
// gaps be compared with common random numbers.
inline WelfareEstimate welfare_on_samples(const AffineRule& rule, const ForwardSamples& samples) {
  const long long n = samples.n;
  const int d = samples.dim;
  double sum = 0.0, sum_sq = 0.0;
  for (long long i = 0; i < n; ++i) {
    double sq = 0.0;
    for (int j = 0; j < d; ++j) {
      const std::size_t k = static_cast<std::size_t>(i) * d + j;
      const double diff = samples.x0[k] - rule.apply(samples.xt[k]);
      sq += diff * diff;
    }
    sum += sq;
    sum_sq += sq * sq;
  }
  const double mean = sum / static_cast<double>(n);
  const double var = std::max(0.0, sum_sq / static_cast<double>(n) - mean * mean);
  return {-mean, std::sqrt(var / static_cast<double>(n))};
}

}  // namespace detail

inline WelfareEstimate welfare_of(const Estimator& estimator, const GaussianDiffusionSpec& spec,
                                  double t, long long n, std::uint64_t seed) {
  if (n < 2) throw ConfigError("welfare_of: need at least 2 samples");
  return detail::welfare_on_samples(estimator.rule_at(spec, t), forward_sample(spec, t, seed, n));
}

inline WelfareEstimate welfare_of(const AffineRule& rule, const GaussianDiffusionSpec& spec,
                                  double t, long long n, std::uint64_t seed) {
  if (n < 2) throw ConfigError("welfare_of: need at least 2 samples");
  return detail::welfare_on_samples(rule, forward_sample(spec, t, seed, n));
}

// --- Planner dominance ---------------------------------------------------------

struct DominanceEntry {
  double delta_gain = 0.0;
  double delta_offset = 0.0;
  double welfare_gap = 0.0;       // welfare(Bayes) - welfare(perturbed), Monte Carlo
  double predicted_gap = 0.0;     // E||Bayes(x_t) - perturbed(x_t)||^2, closed form
  double gap_std_error = 0.0;     // of the paired-difference estimate
  double cross_covariance = 0.0;  // <x0 - Bayes, Bayes - perturbed>, should vanish
  double cross_std_error = 0.0;
  bool dominated = false;         // welfare(Bayes) >= welfare(perturbed) - 4 SE
  bool gap_matches = false;       // |gap - predicted| <= 4 SE
};

struct DominanceReport {
  double t = 0.0;
  WelfareEstimate bayes_welfare;
  std::vector<DominanceEntry> entries;
  bool all_dominated = true;
  bool all_gaps_match = true;
};

// Checks that the posterior mean beats every perturbed affine rule, that each
// welfare gap equals its orthogonal-decomposition prediction, and that the
// error-vs-difference cross term vanishes, all within 4 standard errors.
inline DominanceReport planner_dominance_check(const GaussianDiffusionSpec& spec, double t,
                                               const std::vector<std::pair<double, double>>&
                                                   perturbations,
                                               long long n, std::uint64_t seed) {
  const ScheduleEntry& e = spec.entry_at(t);
  const AffineRule bayes = bayes_denoiser(spec, t);
  const ForwardSamples samples = forward_sample(spec, t, seed, n);
  const double nd = static_cast<double>(n);

  DominanceReport report;
  report.t = t;
  report.bayes_welfare = detail::welfare_on_samples(bayes, samples);

  const double mean_xt = e.alpha * spec.mu0;
  const double var_xt = e.alpha * e.alpha * spec.sigma0_sq + e.sigma * e.sigma;

  for (const auto& [dg, db] : perturbations) {
    AffineRule other{bayes.gain + dg, bayes.offset + db};
    DominanceEntry entry;
    entry.delta_gain = dg;
    entry.delta_offset = db;
    // Per-sample paired difference of squared errors and the cross term.
    double diff_sum = 0.0, diff_sq = 0.0, cross_sum = 0.0, cross_sq = 0.0;
    for (long long i = 0; i < n; ++i) {
      double sq_b = 0.0, sq_o = 0.0, cross = 0.0;
      for (int j = 0; j < spec.dim; ++j) {
        const std::size_t k = static_cast<std::size_t>(i) * spec.dim + j;
        const double eb = samples.x0[k] - bayes.apply(samples.xt[k]);
        const double eo = samples.x0[k] - other.apply(samples.xt[k]);
        sq_b += eb * eb;
        sq_o += eo * eo;
        cross += eb * (bayes.apply(samples.xt[k]) - other.apply(samples.xt[k]));
      }
      const double diff = sq_o - sq_b;  // perturbed loss minus Bayes loss
      diff_sum += diff;
      diff_sq += diff * diff;
      cross_sum += cross;
      cross_sq += cross * cross;
    }
    entry.welfare_gap = diff_sum / nd;
    entry.gap_std_error =
        std::sqrt(std::max(0.0, diff_sq / nd - entry.welfare_gap * entry.welfare_gap) / nd);
    entry.cross_covariance = cross_sum / nd;
    entry.cross_std_error =
        std::sqrt(std::max(0.0, cross_sq / nd - entry.cross_covariance * entry.cross_covariance) /
                  nd);
    entry.predicted_gap =
        spec.dim * (dg * dg * (var_xt + mean_xt * mean_xt) + 2.0 * dg * db * mean_xt + db * db);
    entry.dominated = entry.welfare_gap >= -4.0 * entry.gap_std_error;
    entry.gap_matches =
        std::abs(entry.welfare_gap - entry.predicted_gap) <= 4.0 * entry.gap_std_error + 1e-12;
    report.all_dominated = report.all_dominated && entry.dominated;
    report.all_gaps_match = report.all_gaps_match && entry.gap_matches;
    report.entries.push_back(entry);
  }
  return report;
}

// --- Noise-predictor identity ----------------------------------------------------

struct NoiseIdentityReport {
  double t = 0.0;
  double max_error = 0.0;
  bool skipped = false;  // alpha_t = 0: the reconstruction formula divides by alpha
  std::string note;
};

// The optimal noise predictor E[eps | x_t] = sigma_t (x_t - alpha_t mu0) / Var(x_t)
// must reproduce the posterior mean through (x_t - sigma_t eps*) / alpha_t.
inline NoiseIdentityReport noise_identity_check(const GaussianDiffusionSpec& spec, double t,
                                                long long n, std::uint64_t seed) {
  const ScheduleEntry& e = spec.entry_at(t);
  NoiseIdentityReport report;
  report.t = t;
  if (e.alpha == 0.0) {
    report.skipped = true;
    report.note = "alpha_t = 0: reconstruction divides by alpha, identity skipped";
    return report;
  }
  const AffineRule bayes = bayes_denoiser(spec, t);
  const double var_xt = e.alpha * e.alpha * spec.sigma0_sq + e.sigma * e.sigma;
  const ForwardSamples samples = forward_sample(spec, t, seed, n);
  for (double xt : samples.xt) {
    const double eps_star = e.sigma * (xt - e.alpha * spec.mu0) / var_xt;
    const double via_noise = (xt - e.sigma * eps_star) / e.alpha;
    report.max_error = std::max(report.max_error, std::abs(via_noise - bayes.apply(xt)));
  }
  return report;
}

}  // namespace pamdp
