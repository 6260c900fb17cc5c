#pragma once

// Closed-loop verification: evaluate polynomial feedback laws on the reduced
// ODE, integrate the controlled system with an embedded Dormand-Prince 5(4)
// pair, accumulate the quadratic running cost, and compare the measured cost
// against the value-function prediction, either for a single initial state
// (compare_table) or over a randomized box of initial states (ic_sweep).

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "daekron/dae_reduction.hpp"
#include "daekron/energy_coeffs.hpp"
#include "daekron/kron_ops.hpp"
#include "daekron/types.hpp"

namespace daekron {

// ---------------------------------------------------------------------------
// Polynomial state feedback u(x) = sum_q K_q x^{(x)q}
// ---------------------------------------------------------------------------

struct FeedbackLaw {
  Index n = 0;
  Index m = 1;
  int degree = 1;  // highest monomial degree present
  double eta = 0.0;
  std::map<int, Mat> coeff;  // degree q -> m x n^q, rows symmetric in the q slots

  Vec eval(const Vec& x) const {
    if (x.size() != n) throw ValidationError("FeedbackLaw: state dimension mismatch");
    Vec u = Vec::Zero(m);
    Vec xq = x;
    int q = 1;
    for (const auto& [deg, K] : coeff) {
      while (q < deg) {
        xq = kron_vec(xq, x);
        ++q;
      }
      u += K * xq;
    }
    return u;
  }

  // d/dt u(x(t)) given xdot; uses the row symmetry: the derivative of a
  // symmetric q-form is q * <row, xdot (x) x^{(x)(q-1)}>.
  Vec time_derivative(const Vec& x, const Vec& xdot) const {
    if (x.size() != n || xdot.size() != n)
      throw ValidationError("FeedbackLaw: state dimension mismatch");
    Vec du = Vec::Zero(m);
    for (const auto& [q, K] : coeff) {
      for (Index r = 0; r < m; ++r) {
        Vec v = K.row(r).transpose();
        for (int c = 0; c < q - 1; ++c) {
          Eigen::Map<const Mat> M(v.data(), n, v.size() / n);
          v = M.transpose() * x;
        }
        du(r) += static_cast<double>(q) * v.dot(xdot);
      }
    }
    return du;
  }
};

inline FeedbackLaw build_feedback_law(const EnergyPolynomial& poly, const ReducedOdeSystem& red,
                                      int degree) {
  NormalizedSystem ns = NormalizedSystem::from_reduced(red);
  FeedbackLaw fb;
  fb.n = poly.n;
  fb.m = ns.m();
  fb.degree = degree;
  fb.eta = poly.eta;
  fb.coeff = feedback_coefficients(ns, poly, degree);
  return fb;
}

// Value of the energy polynomial, 1/2 sum_k <w_k, x^{(x)k}>.
inline double eval_energy(const EnergyPolynomial& poly, const Vec& x) {
  if (x.size() != poly.n) throw ValidationError("eval_energy: state dimension mismatch");
  double v = 0.0;
  Vec xk = x;
  int q = 1;
  for (const auto& [k, w] : poly.coeffs) {
    while (q < k) {
      xk = kron_vec(xk, x);
      ++q;
    }
    v += 0.5 * w.dot(xk);
  }
  return v;
}

// Feedback induced by a future energy polynomial, evaluated at one state.
inline Vec eval_feedback(const EnergyPolynomial& poly, const ReducedOdeSystem& red,
                         const Vec& x_d) {
  if (poly.kind != EnergyKind::future)
    throw ValidationError("eval_feedback: feedback laws are induced by future energies");
  return build_feedback_law(poly, red, poly.degree - 1).eval(x_d);
}

// ---------------------------------------------------------------------------
// Closed-loop integration
// ---------------------------------------------------------------------------

struct SimOptions {
  double horizon = 50.0;
  double rtol = 1e-8;
  double atol = 1e-10;
  double settle_norm = 1e-9;   // ||x_d|| below this ends the run as converged
  double blowup_norm = 1e3;    // ||x_d|| above this flags divergence
  bool store_trajectory = true;
  bool track_residuals = true;  // constraint/momentum residuals of the lifted state
};

struct ClosedLoopRun {
  std::vector<double> t;
  std::vector<Vec> x_d;      // reduced trajectory (when stored)
  std::vector<Vec> x1;       // lifted differential states (when stored)
  std::vector<Vec> control;  // feedback inputs (when stored)
  double cost = 0.0;         // 1/2 int ||C_d x_d||^2 + ||u||^2/eta dt
  bool diverged = false;
  bool settled = false;
  double final_time = 0.0;
  Vec final_state;
  double max_constraint_residual = 0.0;
  double max_momentum_residual = 0.0;
  Index accepted_steps = 0;
  Index rejected_steps = 0;
};

namespace detail {

// Right-hand side of the normalized closed loop with the cost as an extra
// state: z = [x; J], J' = (||C_d x||^2 + ||u||^2 / eta) / 2.
struct ClosedLoopField {
  const NormalizedSystem* ns;
  const FeedbackLaw* fb;
  const Mat* Cd;
  double eta;

  void operator()(const Vec& z, Vec& dz, Vec& u_out) const {
    const Index n = ns->n();
    Vec x = z.head(n);
    Vec u = fb->eval(x);
    Vec dx = ns->A * x + ns->b * u;
    if (ns->N.size() != 0) dx += ns->N * kron_vec(x, x);
    if (ns->G.size() != 0) dx += (ns->G * x) * u(0);
    if (ns->s.size() != 0) dx += ns->s * (u(0) * u(0));
    const double uu = u.squaredNorm();
    const double running = 0.5 * ((*Cd * x).squaredNorm() + (uu > 0.0 ? uu / eta : 0.0));
    dz.resize(n + 1);
    dz << dx, running;
    u_out = u;
  }
};

}  // namespace detail

inline ClosedLoopRun simulate_closed_loop(const ReducedOdeSystem& red, const FeedbackLaw& fb,
                                          const Vec& x0, const SimOptions& opts) {
  const Index n = red.r();
  if (x0.size() != n) throw ValidationError("simulate_closed_loop: initial state has wrong size");
  if (fb.n != n) throw ValidationError("simulate_closed_loop: feedback law has wrong state size");
  if (!fb.coeff.empty() && fb.eta <= 0.0)
    throw ValidationError("simulate_closed_loop: feedback requires eta > 0");
  if (!(opts.horizon > 0.0)) throw ValidationError("simulate_closed_loop: horizon must be positive");

  NormalizedSystem ns = NormalizedSystem::from_reduced(red);
  detail::ClosedLoopField f{&ns, &fb, &red.C_d, fb.eta};

  ClosedLoopRun run;
  const double T = opts.horizon;
  const double hmin = 1e-14 * std::max(1.0, T);

  Vec z(n + 1);
  z << x0, 0.0;
  double t = 0.0;

  Vec u_cur;
  Vec k1(n + 1), k2(n + 1), k3(n + 1), k4(n + 1), k5(n + 1), k6(n + 1), k7(n + 1);
  f(z, k1, u_cur);

  auto record = [&](double tc, const Vec& zc, const Vec& uc, const Vec& xdot) {
    Vec x = zc.head(n);
    if (opts.store_trajectory) {
      run.t.push_back(tc);
      run.x_d.push_back(x);
      run.control.push_back(uc);
    }
    if (opts.track_residuals) {
      Vec x1 = lift_state(red, x, uc);
      if (opts.store_trajectory) run.x1.push_back(x1);
      double cres = 0.0;
      if (red.source.n2() > 0) cres = (red.source.A12.transpose() * x1 + red.source.B2 * uc).norm();
      run.max_constraint_residual = std::max(run.max_constraint_residual, cres);
      Vec udot = fb.time_derivative(x, xdot);
      Vec x1dot = red.projectors.Theta_r * xdot - red.s * udot;
      AlgebraicRecovery rec = recover_algebraic(red.source, x1, x1dot, uc);
      run.max_momentum_residual = std::max(run.max_momentum_residual, rec.residual);
    } else if (opts.store_trajectory) {
      run.x1.push_back(lift_state(red, x, uc));
    }
  };

  record(t, z, u_cur, k1.head(n));

  double h = std::min(1e-2, T / 100.0);
  bool done = z.head(n).norm() < opts.settle_norm;
  if (done) run.settled = true;
  if (z.head(n).norm() > opts.blowup_norm) {
    run.diverged = true;
    done = true;
  }

  Vec utmp, zs(n + 1), znew(n + 1), z4(n + 1);
  while (!done && t < T) {
    h = std::min(h, T - t);

    zs = z + h * (1.0 / 5.0) * k1;
    f(zs, k2, utmp);
    zs = z + h * (3.0 / 40.0 * k1 + 9.0 / 40.0 * k2);
    f(zs, k3, utmp);
    zs = z + h * (44.0 / 45.0 * k1 - 56.0 / 15.0 * k2 + 32.0 / 9.0 * k3);
    f(zs, k4, utmp);
    zs = z + h * (19372.0 / 6561.0 * k1 - 25360.0 / 2187.0 * k2 + 64448.0 / 6561.0 * k3 -
                  212.0 / 729.0 * k4);
    f(zs, k5, utmp);
    zs = z + h * (9017.0 / 3168.0 * k1 - 355.0 / 33.0 * k2 + 46732.0 / 5247.0 * k3 +
                  49.0 / 176.0 * k4 - 5103.0 / 18656.0 * k5);
    f(zs, k6, utmp);
    znew = z + h * (35.0 / 384.0 * k1 + 500.0 / 1113.0 * k3 + 125.0 / 192.0 * k4 -
                    2187.0 / 6784.0 * k5 + 11.0 / 84.0 * k6);
    Vec unew;
    f(znew, k7, unew);
    z4 = z + h * (5179.0 / 57600.0 * k1 + 7571.0 / 16695.0 * k3 + 393.0 / 640.0 * k4 -
                  92097.0 / 339200.0 * k5 + 187.0 / 2100.0 * k6 + 1.0 / 40.0 * k7);

    if (!znew.allFinite()) {
      run.diverged = true;
      break;
    }

    double errsq = 0.0;
    for (Index i = 0; i < n + 1; ++i) {
      const double sc = opts.atol + opts.rtol * std::max(std::abs(z(i)), std::abs(znew(i)));
      const double e = (znew(i) - z4(i)) / sc;
      errsq += e * e;
    }
    const double err = std::sqrt(errsq / static_cast<double>(n + 1));

    if (err <= 1.0) {
      t += h;
      z = znew;
      k1 = k7;  // first-same-as-last
      u_cur = unew;
      ++run.accepted_steps;
      record(t, z, u_cur, k1.head(n));
      const double xn = z.head(n).norm();
      if (xn > opts.blowup_norm) {
        run.diverged = true;
        break;
      }
      if (xn < opts.settle_norm) {
        run.settled = true;
        break;
      }
    } else {
      ++run.rejected_steps;
    }

    const double factor =
        err > 0.0 ? std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0) : 5.0;
    h *= factor;
    if (h < hmin) {
      run.diverged = true;  // step controller stalled: treat as controller failure
      break;
    }
  }

  run.cost = z(n);
  run.final_time = t;
  run.final_state = z.head(n);
  return run;
}

// ---------------------------------------------------------------------------
// Prediction-vs-measurement table for one initial state
// ---------------------------------------------------------------------------

struct ComparisonRow {
  int degree = 1;           // feedback degree d (value degree d + 1)
  double value = 0.0;       // 1/2 sum_{k=2}^{d+1} <w_k, x0^{(x)k}>
  double integral = 0.0;    // measured closed-loop cost (NaN when diverged)
  double abs_err = 0.0;
  double rel_err_pct = 0.0;
  bool diverged = false;
  double max_constraint_residual = 0.0;
  double max_momentum_residual = 0.0;
};

inline std::vector<ComparisonRow> compare_table(const ReducedOdeSystem& red, double eta,
                                                const std::vector<int>& degrees, const Vec& x0,
                                                const SimOptions& opts = SimOptions{}) {
  if (degrees.empty()) return {};
  const int dmax = *std::max_element(degrees.begin(), degrees.end());
  if (*std::min_element(degrees.begin(), degrees.end()) < 1)
    throw ValidationError("compare_table: feedback degrees start at 1");
  EnergyPolynomial full = compute_future_energy(red, eta, dmax + 1);

  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<ComparisonRow> rows;
  rows.reserve(degrees.size());
  for (int d : degrees) {
    EnergyPolynomial poly = full.truncated(d + 1);
    FeedbackLaw fb = build_feedback_law(poly, red, d);
    SimOptions o = opts;
    o.store_trajectory = false;
    ClosedLoopRun run = simulate_closed_loop(red, fb, x0, o);
    ComparisonRow row;
    row.degree = d;
    row.value = eval_energy(poly, x0);
    row.diverged = run.diverged;
    row.max_constraint_residual = run.max_constraint_residual;
    row.max_momentum_residual = run.max_momentum_residual;
    if (run.diverged) {
      row.integral = nan;
      row.abs_err = nan;
      row.rel_err_pct = nan;
    } else {
      row.integral = run.cost;
      row.abs_err = std::abs(row.value - row.integral);
      row.rel_err_pct = row.integral != 0.0 ? 100.0 * row.abs_err / std::abs(row.integral) : nan;
    }
    rows.push_back(row);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Randomized initial-condition sweep
// ---------------------------------------------------------------------------

struct SweepDegreeSummary {
  int degree = 1;
  Index unstable = 0;            // diverged runs
  Index stable = 0;              // completed runs
  double mean_rel_err_pct = 0.0; // mean over stable runs
};

struct SweepSummary {
  std::uint64_t seed = 0;
  Index count = 0;
  std::vector<SweepDegreeSummary> per_degree;
  double max_constraint_residual = 0.0;  // over all non-divergent runs
  double max_momentum_residual = 0.0;
};

namespace detail {

inline int sweep_thread_count() {
  int threads = static_cast<int>(std::thread::hardware_concurrency());
  if (threads < 1) threads = 1;
  if (const char* env = std::getenv("DAEKRON_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && v >= 1) threads = static_cast<int>(std::min<long>(threads, v));
  }
  return threads;
}

// Index-parallel map with results stored by position, so the aggregate is
// independent of the thread count.
template <typename Fn>
void parallel_for(Index count, Fn&& fn) {
  const int threads = sweep_thread_count();
  if (threads <= 1 || count <= 1) {
    for (Index i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(threads));
  std::atomic<Index> next{0};
  for (int tix = 0; tix < threads; ++tix)
    pool.emplace_back([&]() {
      for (Index i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
    });
  for (auto& th : pool) th.join();
}

}  // namespace detail

inline SweepSummary ic_sweep(const ReducedOdeSystem& red, double eta,
                             const std::vector<int>& degrees, Index count, double box_lo,
                             double box_hi, std::uint64_t seed,
                             const SimOptions& opts = SimOptions{}) {
  if (count < 1) throw ValidationError("ic_sweep: count must be positive");
  if (!(box_hi >= box_lo)) throw ValidationError("ic_sweep: empty sample box");
  const Index n = red.r();

  // Draw every initial state up front, in run order, so the sample set is a
  // pure function of the seed.
  std::mt19937_64 rng(seed);
  auto unit = [&rng]() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  std::vector<Vec> ics(static_cast<size_t>(count));
  for (Index i = 0; i < count; ++i) {
    Vec x(n);
    for (Index j = 0; j < n; ++j) x(j) = box_lo + (box_hi - box_lo) * unit();
    ics[static_cast<size_t>(i)] = x;
  }

  const int dmax = *std::max_element(degrees.begin(), degrees.end());
  EnergyPolynomial full = compute_future_energy(red, eta, dmax + 1);

  SweepSummary out;
  out.seed = seed;
  out.count = count;

  for (int d : degrees) {
    EnergyPolynomial poly = full.truncated(d + 1);
    FeedbackLaw fb = build_feedback_law(poly, red, d);
    SimOptions o = opts;
    o.store_trajectory = false;

    std::vector<double> rel(static_cast<size_t>(count),
                            std::numeric_limits<double>::quiet_NaN());
    std::vector<char> bad(static_cast<size_t>(count), 0);
    std::vector<double> cres(static_cast<size_t>(count), 0.0);
    std::vector<double> mres(static_cast<size_t>(count), 0.0);

    detail::parallel_for(count, [&](Index i) {
      const Vec& x0 = ics[static_cast<size_t>(i)];
      ClosedLoopRun run = simulate_closed_loop(red, fb, x0, o);
      if (run.diverged) {
        bad[static_cast<size_t>(i)] = 1;
        return;
      }
      const double value = eval_energy(poly, x0);
      rel[static_cast<size_t>(i)] =
          run.cost != 0.0 ? 100.0 * std::abs(value - run.cost) / std::abs(run.cost) : 0.0;
      cres[static_cast<size_t>(i)] = run.max_constraint_residual;
      mres[static_cast<size_t>(i)] = run.max_momentum_residual;
    });

    SweepDegreeSummary s;
    s.degree = d;
    double sum = 0.0;
    for (Index i = 0; i < count; ++i) {
      if (bad[static_cast<size_t>(i)]) {
        ++s.unstable;
      } else {
        ++s.stable;
        sum += rel[static_cast<size_t>(i)];
        out.max_constraint_residual =
            std::max(out.max_constraint_residual, cres[static_cast<size_t>(i)]);
        out.max_momentum_residual =
            std::max(out.max_momentum_residual, mres[static_cast<size_t>(i)]);
      }
    }
    s.mean_rel_err_pct = s.stable > 0 ? sum / static_cast<double>(s.stable) : 0.0;
    out.per_degree.push_back(s);
  }
  return out;
}

}  // namespace daekron
