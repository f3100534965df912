#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "acr/blockwise.hpp"
#include "acr/combine.hpp"
#include "acr/errors.hpp"
#include "acr/kernel.hpp"
#include "acr/quantile.hpp"
#include "acr/random.hpp"

namespace acr {

enum class WeightMode { equal, optimal };
enum class AceVariant { r1, r2 };
//! How the bandwidth scale parameters are chosen in experiment 2: multiples
//! of the cross-validated bandwidth, or the fixed grid k/10.
enum class TauRule { cv_multiples, fixed_grid };

struct ExperimentConfig {
  int experiment = 1;
  std::size_t n = 100;
  std::size_t reps = 200;
  std::uint64_t seed = 1;
  WeightMode weight_mode = WeightMode::optimal;
  unsigned threads = 0;  // 0 = hardware concurrency; ACR_THREADS caps either way

  // experiment 1
  std::vector<double> taus;  // default 0.1 .. 0.9
  double qr_tau = 0.5;

  // experiment 2
  double eta = 0.2;
  AceVariant ace_variant = AceVariant::r1;
  TauRule tau_rule = TauRule::fixed_grid;
  std::vector<double> tau_multipliers{0.6, 0.8, 1.0, 1.2, 1.4};
  std::vector<double> h_grid;  // default geometric 0.04 .. 0.35

  // experiment 3
  int method = 1;
  double a = 0.1;
  double x_mean = 0.0;
  double theta3 = 0.0;  // 0 = method default (5 for method 1, 2.5 for method 2)
  double c = 0.0;       // 0 = method default (1/3 for method 1, 1/2 for method 2)
  std::vector<double> tau_cv_grid{0.4, 0.6, 0.8, 1.0};
  std::vector<double> tau_offsets{-0.2, -0.1, 0.0, 0.1, 0.2};
  std::optional<double> window_exponent;
  int keep_failures = -1;  // -1 = method default (true for method 2)

  // test hook: zero error scale
  bool noiseless = false;

  void validate() const {
    if (experiment < 1 || experiment > 3) throw Error("config: experiment must be 1..3");
    if (reps < 1) throw Error("config: reps must be >= 1");
    if (n < 10) throw Error("config: n must be >= 10");
    if (experiment == 3 && method != 1 && method != 2)
      throw Error("config: method must be 1 or 2");
    if (experiment == 3 && !(std::fabs(a) < 1.0)) throw Error("config: |a| < 1 required");
  }

  std::vector<double> exp1_taus() const {
    if (!taus.empty()) return taus;
    std::vector<double> t(9);
    for (int k = 1; k <= 9; ++k) t[k - 1] = k / 10.0;
    return t;
  }

  std::vector<double> exp2_h_grid() const {
    if (!h_grid.empty()) return h_grid;
    std::vector<double> g;
    for (double h = 0.04; h < 0.36; h *= 1.18) g.push_back(h);
    return g;
  }

  double exp3_theta() const { return theta3 != 0.0 ? theta3 : (method == 1 ? 5.0 : 2.5); }
  double exp3_c() const { return c != 0.0 ? c : (method == 1 ? 1.0 / 3.0 : 0.5); }
  bool exp3_use_s() const { return method == 1; }
  bool exp3_keep_failures() const { return keep_failures < 0 ? (method == 2) : keep_failures != 0; }
};

struct EstimatorSummary {
  std::string name;
  std::vector<double> bias;  // per coefficient (parametric experiments)
  std::vector<double> mse;
  double mise = 0.0;  // nonparametric experiment
  std::size_t failures = 0;
  std::size_t kept = 0;
};

struct MonteCarloReport {
  int experiment = 0;
  std::size_t n = 0;
  std::size_t reps = 0;
  std::vector<EstimatorSummary> estimators;
  //! Raw per-replication values: raw[e][r] is empty when the fit failed and
  //! was dropped. Kept for determinism checks and variance decompositions.
  std::vector<std::vector<Vector>> raw;
  double wall_seconds = 0.0;
};

// ---------------------------------------------------------------------------
// Data generators
// ---------------------------------------------------------------------------

inline const Matrix& experiment1_sigma_chol() {
  static const Matrix chol = [] {
    Matrix sigma(5, 5);
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 5; ++j)
        sigma(i, j) = std::pow(0.5, std::fabs(static_cast<double>(i) - static_cast<double>(j)));
    return cholesky(sigma);
  }();
  return chol;
}

inline const Vector& experiment1_beta() {
  static const Vector beta{3.0, 2.0, 1.0, -1.0, -2.0};
  return beta;
}

//! X ~ N(0, Sigma) with Sigma_ij = 0.5^|i-j|, error Gamma(1) = Exp(1).
inline DesignData gen_experiment1(std::size_t n, RngStream& rng, bool noiseless = false) {
  const Matrix& chol = experiment1_sigma_chol();
  const Vector& beta = experiment1_beta();
  Matrix x(n, 5);
  Vector y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vector xi = mvn_draw(chol, rng);
    double mean = 0.0;
    for (std::size_t j = 0; j < 5; ++j) {
      x(i, j) = xi[j];
      mean += xi[j] * beta[j];
    }
    const double eps = noiseless ? 0.0 : rng.exponential();
    y[i] = mean + eps;
  }
  return DesignData(std::move(x), std::move(y));
}

//! r(x) = sin(2 pi x), X ~ U(0,1), error N(0, 0.5^2).
inline RegressionSample gen_experiment2(std::size_t n, RngStream& rng, bool noiseless = false) {
  RegressionSample s;
  s.xs.resize(n);
  s.ys.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    s.xs[i] = rng.uniform01();
    const double eps = noiseless ? 0.0 : 0.5 * rng.normal();
    s.ys[i] = std::sin(2.0 * 3.14159265358979323846 * s.xs[i]) + eps;
  }
  return s;
}

//! X iid N(x_mean, 1); AR(1) errors started at the first innovation.
inline DependentSample gen_experiment3(std::size_t n, double a, double x_mean,
                                       RngStream& rng, double theta,
                                       double innovation_scale = 1.0) {
  DependentSample s;
  s.a = a;
  s.xs.resize(n);
  s.ys.resize(n);
  for (std::size_t i = 0; i < n; ++i) s.xs[i] = x_mean + rng.normal();
  double eps_prev = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double innov = innovation_scale * rng.normal();
    const double eps = (i == 0) ? innov : a * eps_prev + innov;
    s.ys[i] = theta * s.xs[i] + eps;
    eps_prev = eps;
  }
  return s;
}

// ---------------------------------------------------------------------------
// Monte Carlo driver
// ---------------------------------------------------------------------------

namespace detail {

inline double pairwise_sum(const std::vector<double>& v, std::size_t lo, std::size_t hi) {
  if (hi - lo <= 8) {
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += v[i];
    return s;
  }
  const std::size_t mid = lo + (hi - lo) / 2;
  return pairwise_sum(v, lo, mid) + pairwise_sum(v, mid, hi);
}

inline double pairwise_mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return pairwise_sum(v, 0, v.size()) / static_cast<double>(v.size());
}

inline unsigned resolve_threads(unsigned requested, std::size_t reps) {
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  unsigned t = requested == 0 ? hw : requested;
  if (const char* env = std::getenv("ACR_THREADS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap >= 1 && static_cast<unsigned>(cap) < t) t = static_cast<unsigned>(cap);
  }
  if (static_cast<std::size_t>(t) > reps) t = static_cast<unsigned>(reps);
  return t < 1 ? 1 : t;
}

//! One replication: estimate vectors per estimator, empty = failed.
using Replicate = std::vector<Vector>;

template <typename Fn>
inline std::vector<Replicate> run_replications(const ExperimentConfig& cfg, Fn&& one_rep) {
  std::vector<Replicate> out(cfg.reps);
  const unsigned workers = resolve_threads(cfg.threads, cfg.reps);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (;;) {
      const std::size_t r = next.fetch_add(1);
      if (r >= cfg.reps) return;
      out[r] = one_rep(r);
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned t = 0; t < workers; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  return out;
}

inline EstimatorSummary summarize(const std::string& name,
                                  const std::vector<Replicate>& reps, std::size_t which,
                                  const Vector& truth, bool integrated) {
  EstimatorSummary s;
  s.name = name;
  const std::size_t dim = integrated ? 1 : truth.size();
  std::vector<std::vector<double>> errs(dim);
  for (const Replicate& rep : reps) {
    const Vector& v = rep[which];
    if (v.empty()) {
      ++s.failures;
      continue;
    }
    ++s.kept;
    for (std::size_t j = 0; j < dim; ++j)
      errs[j].push_back(integrated ? v[j] : v[j] - truth[j]);
  }
  if (integrated) {
    s.mise = pairwise_mean(errs[0]);
  } else {
    s.bias.resize(dim);
    s.mse.resize(dim);
    for (std::size_t j = 0; j < dim; ++j) {
      s.bias[j] = pairwise_mean(errs[j]);
      std::vector<double> sq(errs[j].size());
      for (std::size_t i = 0; i < sq.size(); ++i) sq[i] = errs[j][i] * errs[j][i];
      s.mse[j] = pairwise_mean(sq);
    }
  }
  return s;
}

}  // namespace detail

inline MonteCarloReport run_monte_carlo(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  MonteCarloReport report;
  report.experiment = cfg.experiment;
  report.n = cfg.n;
  report.reps = cfg.reps;

  std::vector<std::string> names;
  Vector truth;
  bool integrated = false;

  if (cfg.experiment == 1) {
    names = {"ACE", "CQR", "QR"};
    truth = experiment1_beta();
    const std::vector<double> taus = cfg.exp1_taus();
    WeightVector w = WeightVector::equal(taus.size());
    if (cfg.weight_mode == WeightMode::optimal) {
      std::vector<double> fq(taus.size());
      for (std::size_t k = 0; k < taus.size(); ++k) fq[k] = 1.0 - taus[k];  // Exp(1)
      w = optimal_qr_weights(a0_matrix(taus, fq));
    }
    const ErrorDensity fe = ErrorDensity::exponential();
    auto one_rep = [&, w](std::size_t r) {
      RngStream rng(cfg.seed, r);
      const DesignData data = gen_experiment1(cfg.n, rng, cfg.noiseless);
      detail::Replicate rep(3);
      try {
        rep[0] = ace_quantile(data, taus, w, fe);
      } catch (const Error&) {
      }
      try {
        rep[1] = fit_cqr(data, taus).beta;
      } catch (const Error&) {
      }
      try {
        rep[2] = fit_quantile(data, cfg.qr_tau).beta;
      } catch (const Error&) {
      }
      return rep;
    };
    const auto reps = detail::run_replications(cfg, one_rep);
    report.raw.resize(3);
    for (std::size_t e = 0; e < 3; ++e) {
      report.estimators.push_back(detail::summarize(names[e], reps, e, truth, false));
      for (const auto& rep : reps) report.raw[e].push_back(rep[e]);
    }
  } else if (cfg.experiment == 2) {
    names = {"LC", "CLC", "ACE"};
    integrated = true;
    const KernelSpec kern = KernelSpec::epanechnikov();
    const std::vector<double> grid_h = cfg.exp2_h_grid();
    const double n_eta = std::pow(static_cast<double>(cfg.n), cfg.eta);

    // Optimal kernel weights are invariant to a common tau scale, so they can
    // be computed once from the multipliers (or the fixed grid).
    std::vector<double> tau_shape;
    if (cfg.tau_rule == TauRule::fixed_grid) {
      for (int k = 1; k <= 9; ++k) tau_shape.push_back(k / 10.0);
    } else {
      tau_shape = cfg.tau_multipliers;
    }
    WeightVector w = WeightVector::equal(tau_shape.size());
    if (cfg.weight_mode == WeightMode::optimal) {
      const KernelWeights kw = kernel_weight_vectors(tau_shape, kern);
      w = (cfg.ace_variant == AceVariant::r1) ? kw.w1_star : kw.w2_star;
    }

    auto one_rep = [&, w](std::size_t r) {
      RngStream rng(cfg.seed, r);
      const RegressionSample s = gen_experiment2(cfg.n, rng, cfg.noiseless);
      detail::Replicate rep(3);
      double h_cv;
      try {
        h_cv = cv_bandwidth(s, 2, grid_h, kern);
      } catch (const Error&) {
        return rep;  // all estimators fail together
      }
      std::vector<double> taus(tau_shape.size());
      for (std::size_t k = 0; k < taus.size(); ++k)
        taus[k] = (cfg.tau_rule == TauRule::fixed_grid) ? tau_shape[k]
                                                        : tau_shape[k] * h_cv * n_eta;
      BandwidthSchedule sched{cfg.eta, taus, cfg.n};
      std::vector<double> hs(taus.size());
      for (std::size_t k = 0; k < taus.size(); ++k) hs[k] = sched.bandwidth(k);

      double sse0 = 0.0, sse1 = 0.0, sse2 = 0.0;
      std::size_t count = 0;
      for (int gi = 1; gi <= 99; ++gi) {
        const double xg = gi / 100.0;
        const double rx = std::sin(2.0 * 3.14159265358979323846 * xg);
        double lc, clc, ace;
        try {
          lc = nw_estimate(s, xg, h_cv, kern);
          clc = clc_estimate(s, xg, hs, kern);
          ace = (cfg.ace_variant == AceVariant::r1) ? ace_r1(s, xg, sched, w, kern)
                                                    : ace_r2(s, xg, sched, w, kern);
        } catch (const EmptyWindow&) {
          continue;  // excluded for all estimators symmetrically
        }
        sse0 += (lc - rx) * (lc - rx);
        sse1 += (clc - rx) * (clc - rx);
        sse2 += (ace - rx) * (ace - rx);
        ++count;
      }
      if (count == 0) return rep;
      rep[0] = Vector{sse0 / static_cast<double>(count)};
      rep[1] = Vector{sse1 / static_cast<double>(count)};
      rep[2] = Vector{sse2 / static_cast<double>(count)};
      return rep;
    };
    const auto reps = detail::run_replications(cfg, one_rep);
    report.raw.resize(3);
    for (std::size_t e = 0; e < 3; ++e) {
      report.estimators.push_back(detail::summarize(names[e], reps, e, truth, true));
      for (const auto& rep : reps) report.raw[e].push_back(rep[e]);
    }
  } else {
    names = {"BELE", "ACE"};
    truth = {cfg.exp3_theta()};
    const double c3 = cfg.exp3_c();
    const bool use_s = cfg.exp3_use_s();
    const bool keep = cfg.exp3_keep_failures();

    auto one_rep = [&](std::size_t r) {
      RngStream rng(cfg.seed, r);
      const DependentSample s = gen_experiment3(cfg.n, cfg.a, cfg.x_mean, rng,
                                                cfg.exp3_theta(),
                                                cfg.noiseless ? 0.0 : 1.0);
      detail::Replicate rep(2);
      std::pair<double, double> bracket;
      double tau_star;
      try {
        bracket = default_bracket(s);
        tau_star = cv_tau(s, c3, cfg.tau_cv_grid, cfg.window_exponent);
      } catch (const Error&) {
        return rep;
      }
      auto clamp = [&bracket](double v) {
        return std::min(std::max(v, bracket.first), bracket.second);
      };
      try {
        const BlockMoments bm(s, make_blocks(cfg.n, c3, tau_star, cfg.window_exponent));
        rep[0] = Vector{bele_fit(bm, bracket, use_s)};
      } catch (const NoConvergence& e) {
        if (keep && !e.best.empty()) rep[0] = Vector{clamp(e.best[0])};
      } catch (const Error&) {
        if (keep) rep[0] = Vector{clamp(ols_slope(s))};
      }
      try {
        std::vector<double> ace_taus;
        for (double off : cfg.tau_offsets) {
          double t = std::min(1.0, std::max(0.2, tau_star + off));
          bool dup = false;
          for (double u : ace_taus) dup = dup || (u == t);
          if (!dup) ace_taus.push_back(t);
        }
        std::sort(ace_taus.begin(), ace_taus.end());
        if (ace_taus.size() < 2) ace_taus = {0.5 * tau_star, tau_star};
        AceBelOptions opt;
        opt.window_exponent = cfg.window_exponent;
        rep[1] = Vector{ace_bel(s, c3, ace_taus, WeightVector::equal(ace_taus.size()),
                                bracket, use_s, opt)};
      } catch (const Error&) {
        // Clamp mode keeps the run comparable: fall back to the single-tau
        // fit when the composite path fails.
        if (keep && !rep[0].empty()) rep[1] = rep[0];
      }
      for (std::size_t e = 0; e < 2; ++e)
        if (!rep[e].empty() && !std::isfinite(rep[e][0])) {
          if (keep)
            rep[e][0] = clamp(ols_slope(s));
          else
            rep[e].clear();
        }
      return rep;
    };
    const auto reps = detail::run_replications(cfg, one_rep);
    report.raw.resize(2);
    for (std::size_t e = 0; e < 2; ++e) {
      report.estimators.push_back(detail::summarize(names[e], reps, e, truth, false));
      for (const auto& rep : reps) report.raw[e].push_back(rep[e]);
    }
  }

  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace acr
