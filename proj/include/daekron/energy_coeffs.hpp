#pragma once

// Polynomial energy-function coefficients for the reduced quadratic ODE
//
//   x' = A x + N (x (x) x) + (b + G x) u + s u^2        (G, s nonzero only
//                                                         for single-input
//                                                         coupled systems)
//
// Future cost: 1/2 int_0^inf ||C x||^2 + ||u||^2/eta, value expanded as
// V(x) = 1/2 sum_k w_k^T x^{(x)k}.  Past energy analogous over (-inf, 0].
//
// Order-2 coefficients come from the Riccati solvers; each higher order k
// solves L_k(Acl^T) w_k = rhs with the closed-loop matrix of the quadratic
// approximation.  Without input coupling the right-hand side is the explicit
// two-term recursion; with coupling it is extracted degree-by-degree from the
// full HJB equation with the rational control term expanded as a (per-degree
// exact) truncated geometric series.

#include <map>
#include <optional>

#include "dae_reduction.hpp"
#include "kron_ops.hpp"
#include "lin_solvers.hpp"
#include "types.hpp"

namespace daekron {

enum class EnergyKind { past, future };

struct EnergyPolynomial {
  EnergyKind kind = EnergyKind::future;
  double eta = 0.0;
  int degree = 2;             // value-polynomial degree d (orders 2..d present)
  Index n = 0;                // state dimension
  std::map<int, Vec> coeffs;  // order k -> symmetrized coefficient, length n^k

  // Restriction to a lower value degree (shares the same coefficients).
  EnergyPolynomial truncated(int d) const {
    if (d < 2 || d > degree) throw ValidationError("EnergyPolynomial: bad truncation degree");
    EnergyPolynomial out;
    out.kind = kind;
    out.eta = eta;
    out.degree = d;
    out.n = n;
    for (const auto& [k, w] : coeffs)
      if (k <= d) out.coeffs.emplace(k, w);
    return out;
  }
};

// E-normalized system (the reduced ODE multiplied through by E_d^{-1}).
struct NormalizedSystem {
  Mat A;  // n x n
  Mat N;  // n x n^2; zero-size means no quadratic term
  Mat b;  // n x m
  Mat C;  // p x n
  Mat G;  // n x n input-coupling slope; zero-size means none (m = 1 only)
  Vec s;  // n, u^2 coefficient; zero-size means none (m = 1 only)

  Index n() const { return A.rows(); }
  Index m() const { return b.cols(); }
  bool has_coupling() const {
    return (G.size() != 0 && G.norm() > 0.0) || (s.size() != 0 && s.norm() > 0.0);
  }

  static NormalizedSystem from_reduced(const ReducedOdeSystem& red) {
    NormalizedSystem ns;
    Eigen::PartialPivLU<Mat> elu(red.E_d);
    ns.A = elu.solve(red.A_d);
    ns.N = red.N_d.size() != 0 && red.N_d.norm() > 0.0 ? Mat(elu.solve(red.N_d)) : Mat();
    ns.b = elu.solve(red.B_const);
    ns.C = red.C_d;
    if (red.G_lin.size() != 0 && red.G_lin.norm() > 0.0) ns.G = elu.solve(red.G_lin);
    if (red.s_d.size() != 0 && red.s_d.norm() > 0.0) {
      if (red.s_d.cols() != 1)
        throw ValidationError("NormalizedSystem: quadratic input term requires a single input");
      ns.s = elu.solve(red.s_d).col(0);
    }
    return ns;
  }
};

// ---------------------------------------------------------------------------
// Scalar polynomial with per-degree coefficient vectors (first Kronecker
// factor slowest, matching the global vec convention).
// ---------------------------------------------------------------------------

class Poly {
 public:
  explicit Poly(Index n) : n_(n) {}
  std::map<int, Vec> c;  // degree -> coefficient vector of length n^degree

  void add_deg(int deg, const Vec& v) {
    auto it = c.find(deg);
    if (it == c.end())
      c.emplace(deg, v);
    else
      it->second += v;
  }
  Poly scale(double a) const {
    Poly out(n_);
    for (const auto& [d, v] : c) out.c.emplace(d, a * v);
    return out;
  }
  Poly operator+(const Poly& o) const {
    Poly out = *this;
    for (const auto& [d, v] : o.c) out.add_deg(d, v);
    return out;
  }
  Poly mul(const Poly& o, int max_deg) const {
    Poly out(n_);
    for (const auto& [da, va] : c)
      for (const auto& [db, vb] : o.c) {
        if (da + db > max_deg) continue;
        out.add_deg(da + db, kron_vec(va, vb));
      }
    return out;
  }
  Poly truncate(int max_deg) const {
    Poly out(n_);
    for (const auto& [d, v] : c)
      if (d <= max_deg) out.c.emplace(d, v);
    return out;
  }
  Vec deg_vec(int k) const {
    auto it = c.find(k);
    if (it != c.end()) return it->second;
    return Vec::Zero(ipow(n_, k));
  }
  bool empty() const { return c.empty(); }
  double eval(const Vec& x) const {
    double total = 0.0;
    for (const auto& [d, v] : c) {
      Vec t = v;
      for (int i = 0; i < d; ++i) {
        Eigen::Map<const Mat> M(t.data(), n_, t.size() / n_);
        t = M.transpose() * x;
      }
      total += t(0);
    }
    return total;
  }

 private:
  Index n_;
};

namespace detail {

inline std::vector<Mat> front_factor(const Mat& M, Index n, int tail) {
  std::vector<Mat> facs;
  facs.reserve(tail + 1);
  facs.push_back(M);
  for (int i = 0; i < tail; ++i) facs.push_back(Mat::Identity(n, n));
  return facs;
}

// P(x) = Vx g(x) and Dhalf(x) = 2 Vx s as scalar polynomials built from the
// value coefficients available so far (single input when G/s present).
inline void build_P_Dhalf(const NormalizedSystem& ns, const std::map<int, Vec>& coeffs, Poly& P,
                          Poly& Dhalf) {
  const Index n = ns.n();
  for (const auto& [k, w] : coeffs) {
    P.add_deg(k - 1, 0.5 * k * kron_apply(front_factor(ns.b.transpose(), n, k - 1), w));
    if (ns.G.size() != 0 && ns.G.norm() > 0.0)
      P.add_deg(k, 0.5 * k * kron_apply(front_factor(ns.G.transpose(), n, k - 1), w));
    if (ns.s.size() != 0 && ns.s.norm() > 0.0)
      Dhalf.add_deg(k - 1,
                    static_cast<double>(k) *
                        kron_apply(front_factor(ns.s.transpose(), n, k - 1), w));
  }
}

// Degree-k coefficient vector of 2*(HJB equation) evaluated with the known
// value coefficients (orders 2..k-1) only.  The terms involving the unknown
// w_k are exactly L_k(Acl^T) w_k, so solving
//   L_k(Acl^T) w_k = -known_terms
// closes the order.
inline Vec hjb_known_terms(const NormalizedSystem& ns, const std::map<int, Vec>& coeffs,
                           double eta, int k, EnergyKind kind) {
  const Index n = ns.n();
  Poly Q(n);
  for (const auto& [j, w] : coeffs) {
    Q.add_deg(j, j * kron_apply(front_factor(ns.A.transpose(), n, j - 1), w));
    if (ns.N.size() != 0)
      Q.add_deg(j + 1, j * kron_apply(front_factor(ns.N.transpose(), n, j - 1), w));
  }
  Mat CtC = ns.C.transpose() * ns.C;
  Q.add_deg(2, (kind == EnergyKind::future ? 1.0 : -eta) *
                   Vec(Eigen::Map<const Vec>(CtC.data(), CtC.size())));

  Poly P(n), Dhalf(n);
  build_P_Dhalf(ns, coeffs, P, Dhalf);
  const double fac = kind == EnergyKind::future ? eta : 1.0;
  Poly D = Dhalf.scale(fac);
  Poly P2 = P.mul(P, k);
  // future: -eta P^2 / (1 + D);  past: + P^2 / (1 - D); both via geometric
  // series, exact per degree since D has minimum degree 1.
  Poly series(n), term(n);
  series.add_deg(0, Vec::Ones(1));
  term.add_deg(0, Vec::Ones(1));
  for (int t = 0; t < k; ++t) {
    term = term.mul(kind == EnergyKind::future ? D.scale(-1.0) : D, k);
    if (term.empty()) break;
    series = series + term;
  }
  Poly ctrl = P2.mul(series, k).scale(kind == EnergyKind::future ? -fac : 1.0);
  return (Q + ctrl).deg_vec(k);
}

// Explicit order-k right-hand side (no input coupling, any input count):
//   L_k(Acl^T) w_k = -L_{k-1}(N^T) w_{k-1} + fac sum_{i+j=k+2} ij vec(W_i^T B B^T W_j)
// with fac = eta/4 (future) or -1/4 (past).
inline Vec theorem_rhs(const NormalizedSystem& ns, const std::map<int, Vec>& coeffs, double eta,
                       int k, EnergyKind kind) {
  const Index n = ns.n();
  Vec rhs = Vec::Zero(ipow(n, k));
  if (ns.N.size() != 0) {
    Mat I = Mat::Identity(n, n);
    rhs = -apply_Lk(ns.N.transpose(), I, k - 1, coeffs.at(k - 1));
  }
  const double fac = kind == EnergyKind::future ? eta / 4.0 : -1.0 / 4.0;
  Mat BBt = ns.b * ns.b.transpose();
  for (int i = 3; i < k; ++i) {
    const int j = k + 2 - i;
    if (j <= 2 || !coeffs.count(i) || !coeffs.count(j)) continue;
    Eigen::Map<const Mat> Wi(coeffs.at(i).data(), n, ipow(n, i - 1));
    Eigen::Map<const Mat> Wj(coeffs.at(j).data(), n, ipow(n, j - 1));
    Mat Tm = Wi.transpose() * BBt * Wj;
    rhs += fac * static_cast<double>(i) * static_cast<double>(j) *
           Vec(Eigen::Map<const Vec>(Tm.data(), Tm.size()));
  }
  return rhs;
}

inline std::map<int, Vec> energy_recursion(const NormalizedSystem& ns, double eta, int deg,
                                           EnergyKind kind, RiccatiSolution* ric_out) {
  const Index n = ns.n();
  RiccatiSolution ric = kind == EnergyKind::future
                            ? solve_riccati_future(ns.A, ns.b, ns.C, std::nullopt, eta)
                            : solve_riccati_past(ns.A, ns.b, ns.C, eta);
  if (ric_out) *ric_out = ric;
  std::map<int, Vec> coeffs;
  coeffs.emplace(2, symmetrize_vec(Eigen::Map<const Vec>(ric.W.data(), ric.W.size()), n, 2));
  if (deg == 2) return coeffs;

  Mat BBt = ns.b * ns.b.transpose();
  Mat Acl = kind == EnergyKind::future ? Mat(ns.A - eta * BBt * ric.W)
                                       : Mat(ns.A + BBt * ric.W);
  KWaySolver solver(Acl);
  for (int k = 3; k <= deg; ++k) {
    Vec rhs = ns.has_coupling() ? Vec(-hjb_known_terms(ns, coeffs, eta, k, kind))
                                : theorem_rhs(ns, coeffs, eta, k, kind);
    Vec w = solver.solve(k, rhs);
    coeffs.emplace(k, symmetrize_vec(w, n, k));
  }
  return coeffs;
}

}  // namespace detail

inline EnergyPolynomial compute_future_energy(const ReducedOdeSystem& red, double eta, int d,
                                              RiccatiSolution* ric_out = nullptr) {
  if (d < 2) throw ValidationError("compute_future_energy: value degree must be >= 2");
  NormalizedSystem ns = NormalizedSystem::from_reduced(red);
  EnergyPolynomial poly;
  poly.kind = EnergyKind::future;
  poly.eta = eta;
  poly.degree = d;
  poly.n = ns.n();
  poly.coeffs = detail::energy_recursion(ns, eta, d, EnergyKind::future, ric_out);
  return poly;
}

inline EnergyPolynomial compute_past_energy(const ReducedOdeSystem& red, double eta, int d,
                                            RiccatiSolution* ric_out = nullptr) {
  if (d < 2) throw ValidationError("compute_past_energy: value degree must be >= 2");
  NormalizedSystem ns = NormalizedSystem::from_reduced(red);
  EnergyPolynomial poly;
  poly.kind = EnergyKind::past;
  poly.eta = eta;
  poly.degree = d;
  poly.n = ns.n();
  poly.coeffs = detail::energy_recursion(ns, eta, d, EnergyKind::past, ric_out);
  return poly;
}

// Gradient of V(x) = 1/2 sum_k w_k^T x^{(x)k} (symmetric coefficients).
inline Vec energy_gradient(const EnergyPolynomial& poly, const Vec& x) {
  const Index n = poly.n;
  Vec g = Vec::Zero(n);
  for (const auto& [k, w] : poly.coeffs) {
    Vec t = w;
    for (int i = 0; i < k - 1; ++i) {
      Eigen::Map<const Mat> M(t.data(), n, t.size() / n);
      t = M.transpose() * x;
    }
    g += 0.5 * k * t;
  }
  return g;
}

// Pointwise residual of the HJB equation with the polynomial gradient
// substituted (future: 0 = Vx f - (eta/2)(Vx g)^2/(1+2 eta Vx s) + ||Cx||^2/2;
// past: 0 = Vx f + (Vx g)^2/(2(1-2 Vx s)) - eta ||Cx||^2/2).
inline double hjb_residual(const EnergyPolynomial& poly, const NormalizedSystem& ns,
                           const Vec& x) {
  if (x.size() != poly.n || poly.n != ns.n())
    throw ValidationError("hjb_residual: dimension mismatch");
  Vec g = energy_gradient(poly, x);
  Vec f = ns.A * x;
  if (ns.N.size() != 0) f += ns.N * kron_vec(x, x);
  Vec Vxg = ns.b.transpose() * g;
  if (ns.G.size() != 0) Vxg(0) += g.dot(ns.G * x);
  const double Vxs = ns.s.size() != 0 ? g.dot(ns.s) : 0.0;
  Vec Cx = ns.C * x;
  if (poly.kind == EnergyKind::future)
    return g.dot(f) - 0.5 * poly.eta * Vxg.squaredNorm() / (1.0 + 2.0 * poly.eta * Vxs) +
           0.5 * Cx.squaredNorm();
  return g.dot(f) + 0.5 * Vxg.squaredNorm() / (1.0 - 2.0 * Vxs) - 0.5 * poly.eta * Cx.squaredNorm();
}

inline double hjb_residual(const EnergyPolynomial& poly, const ReducedOdeSystem& red,
                           const Vec& x) {
  return hjb_residual(poly, NormalizedSystem::from_reduced(red), x);
}

struct HjbResidualReport {
  std::vector<Vec> directions;
  std::vector<double> epsilons;          // descending scale ladder
  Mat ratios;                            // directions x epsilons: residual(eps x)/eps^{d+1}
  double max_ratio = 0.0;
  bool bounded = false;                  // no blow-up as eps decreases
};

// Residual-order check: with value degree d the HJB residual is O(||x||^{d+1}),
// so residual(eps x)/eps^{d+1} must stay bounded along a decreasing eps ladder.
inline HjbResidualReport hjb_residual_ladder(const EnergyPolynomial& poly,
                                             const NormalizedSystem& ns,
                                             const std::vector<Vec>& directions,
                                             const std::vector<double>& epsilons) {
  HjbResidualReport rep;
  rep.directions = directions;
  rep.epsilons = epsilons;
  rep.ratios = Mat::Zero(static_cast<Index>(directions.size()),
                         static_cast<Index>(epsilons.size()));
  const double p = poly.degree + 1;
  for (size_t i = 0; i < directions.size(); ++i)
    for (size_t j = 0; j < epsilons.size(); ++j) {
      const double eps = epsilons[j];
      rep.ratios(static_cast<Index>(i), static_cast<Index>(j)) =
          std::abs(hjb_residual(poly, ns, Vec(eps * directions[i]))) / std::pow(eps, p);
    }
  rep.max_ratio = rep.ratios.maxCoeff();
  // Bounded: later (smaller-eps) ratios may not exceed a fixed multiple of the
  // first-rung ratio per direction (floor absorbs exactly-zero residuals).
  rep.bounded = true;
  for (Index i = 0; i < rep.ratios.rows(); ++i) {
    const double head = rep.ratios(i, 0);
    for (Index j = 1; j < rep.ratios.cols(); ++j)
      if (rep.ratios(i, j) > 20.0 * head + 1e-9) rep.bounded = false;
  }
  return rep;
}

// Polynomial feedback coefficients of degree d (map degree -> m x n^degree,
// rows symmetrized).  future: u = -eta (Vx g)/(1 + 2 eta Vx s);
// past: u = +(Vx g)/(1 - 2 Vx s); both truncated to degree d.
inline std::map<int, Mat> feedback_coefficients(const NormalizedSystem& ns,
                                                const EnergyPolynomial& poly, int d) {
  const Index n = ns.n(), m = ns.m();
  const double eta = poly.eta;
  const EnergyKind kind = poly.kind;
  std::map<int, Mat> out;
  if (!ns.has_coupling()) {
    // degree q term: -(eta/2)(q+1) b^T W_{q+1} (future); +(1/2)(q+1) b^T W_{q+1} (past)
    const double sgn = kind == EnergyKind::future ? -eta : 1.0;
    for (int q = 1; q <= d; ++q) {
      auto it = poly.coeffs.find(q + 1);
      if (it == poly.coeffs.end()) continue;
      Vec row = kron_apply(detail::front_factor(ns.b.transpose(), n, q), it->second);
      // the leading (input) index of (b^T (x) I^q) w is the slowest-varying
      Mat Rm = Eigen::Map<const Mat>(row.data(), ipow(n, q), m).transpose();
      Mat Cq = sgn * 0.5 * (q + 1) * Rm;
      for (Index r = 0; r < m; ++r) Cq.row(r) = symmetrize_vec(Cq.row(r).transpose(), n, q);
      out.emplace(q, Cq);
    }
    return out;
  }
  if (m != 1)
    throw ValidationError("feedback_coefficients: input coupling requires a single input");
  Poly P(n), Dhalf(n);
  detail::build_P_Dhalf(ns, poly.coeffs, P, Dhalf);
  const double fac = kind == EnergyKind::future ? eta : 1.0;
  Poly D = Dhalf.scale(fac);
  Poly series(n), term(n);
  series.add_deg(0, Vec::Ones(1));
  term.add_deg(0, Vec::Ones(1));
  for (int t = 0; t < d; ++t) {
    term = term.mul(kind == EnergyKind::future ? D.scale(-1.0) : D, d);
    if (term.empty()) break;
    series = series + term;
  }
  Poly u = P.mul(series, d).scale(kind == EnergyKind::future ? -eta : 1.0).truncate(d);
  for (const auto& [q, v] : u.c) {
    if (q < 1) continue;
    Mat Cq(1, v.size());
    Cq.row(0) = symmetrize_vec(v, n, q);
    out.emplace(q, Cq);
  }
  return out;
}

}  // namespace daekron
