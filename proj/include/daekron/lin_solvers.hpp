#pragma once

// Dense Riccati/Lyapunov solvers and the structured k-way Lyapunov solve
//
//   L_k^{E^T}(F^T) w = rhs,
//
// computed from one (generalized) real Schur decomposition of (F^T, E^T) with
// recursive 1x1/2x2 blocked back-substitution.  No complex arithmetic is used
// in the solve path and the full n^k x n^k operator is never assembled.
//
// Riccati equations are solved by the invariant-subspace method on the
// Hamiltonian matrix followed by a Newton-Kleinman refinement pass that
// certifies the residual.

#include <algorithm>
#include <complex>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "kron_ops.hpp"
#include "types.hpp"

namespace daekron {

// ---------------------------------------------------------------------------
// KWaySolver: factorizes (F^T, E^T) once; solves L_k^{E^T}(F^T) w = rhs for
// any k >= 1.  The factorization is immutable and safe to share across
// concurrent solve() calls.
// ---------------------------------------------------------------------------

class KWaySolver {
 public:
  // E empty => E = I (plain real Schur path).
  KWaySolver(const Mat& F, const Mat& E = Mat()) {
    if (F.rows() != F.cols()) throw ValidationError("KWaySolver: F must be square");
    n_ = F.rows();
    generalized_ = E.size() != 0 && !E.isIdentity(0.0);
    if (generalized_ && (E.rows() != n_ || E.cols() != n_))
      throw ValidationError("KWaySolver: E shape mismatch");
    Ft_ = F.transpose();
    Et_ = generalized_ ? Mat(E.transpose()) : Mat(Mat::Identity(n_, n_));

    if (!generalized_) {
      Eigen::RealSchur<Mat> schur(F.transpose());
      if (schur.info() != Eigen::Success)
        throw NumericalError("KWaySolver: real Schur iteration failed");
      S_ = schur.matrixT();
      Q_ = schur.matrixU();
      Z_ = Q_.transpose();  // F^T = Q S Z with Z = Q^T
      T_ = Mat::Identity(n_, n_);
    } else {
      Eigen::RealQZ<Mat> qz(F.transpose(), E.transpose());
      if (qz.info() != Eigen::Success)
        throw NumericalError("KWaySolver: QZ iteration failed");
      S_ = qz.matrixS();
      T_ = qz.matrixT();
      Q_ = qz.matrixQ();
      Z_ = qz.matrixZ();  // F^T = Q S Z, E^T = Q T Z
    }
    compute_pencil_eigs();
  }

  Index dim() const { return n_; }
  const std::vector<std::complex<double>>& pencil_eigenvalues() const { return eigs_; }

  // Matrix-free application of L_k^{E^T}(F^T), for residual certification.
  Vec apply(int k, const Vec& v) const { return apply_Lk(Ft_, Et_, k, v); }

  Vec solve(int k, const Vec& rhs) const {
    if (k < 1) throw ValidationError("KWaySolver: k must be >= 1");
    if (static_cast<std::int64_t>(rhs.size()) != ipow(n_, k))
      throw ValidationError("KWaySolver: rhs length is not n^k");
    check_spectrum_sums(k);

    Vec y = rhs;
    for (int i = 0; i < k; ++i) y = detail::mode_apply_cycle(Q_.transpose(), y);
    Mat P0 = Mat::Zero(1, 1), Pn0 = Mat::Ones(1, 1);
    Vec c = tri_solve(P0, Pn0, k, y);
    for (int i = 0; i < k; ++i) c = detail::mode_apply_cycle(Z_.transpose(), c);

    const double rn = rhs.norm();
    if (rn > 0.0) {
      const double res = (apply(k, c) - rhs).norm();
      if (!(res <= 1e-9 * rn))
        throw NumericalError("KWaySolver: solution residual " + std::to_string(res / rn) +
                             " exceeds 1e-9 relative (ill-conditioned operator)");
    }
    return c;
  }

 private:
  Index n_ = 0;
  bool generalized_ = false;
  Mat Ft_, Et_;        // original transposed pencil, kept for residual checks
  Mat S_, T_, Q_, Z_;  // F^T = Q S Z, E^T = Q T Z
  std::vector<std::complex<double>> eigs_;

  void compute_pencil_eigs() {
    eigs_.clear();
    for (Index i = 0; i < n_;) {
      const bool pair = i + 1 < n_ && S_(i + 1, i) != 0.0;
      if (std::abs(T_(i, i)) < 1e-300 || (pair && std::abs(T_(i + 1, i + 1)) < 1e-300))
        throw NumericalError("KWaySolver: singular triangular mass factor (infinite pencil eigenvalue)");
      if (!pair) {
        eigs_.emplace_back(S_(i, i) / T_(i, i), 0.0);
        ++i;
      } else {
        Mat T2 = T_.block(i, i, 2, 2), S2 = S_.block(i, i, 2, 2);
        Mat M2 = T2.triangularView<Eigen::Upper>().solve(S2);
        const double tr = 0.5 * (M2(0, 0) + M2(1, 1));
        const double det = M2(0, 0) * M2(1, 1) - M2(0, 1) * M2(1, 0);
        const double disc = tr * tr - det;
        if (disc >= 0.0) {
          const double r = std::sqrt(disc);
          eigs_.emplace_back(tr + r, 0.0);
          eigs_.emplace_back(tr - r, 0.0);
        } else {
          const double im = std::sqrt(-disc);
          eigs_.emplace_back(tr, im);
          eigs_.emplace_back(tr, -im);
        }
        i += 2;
      }
    }
  }

  // Singularity pre-check: the operator spectrum consists of all k-fold sums
  // of pencil eigenvalues.  Enumerate multisets when affordable.
  void check_spectrum_sums(int k) const {
    double maxabs = 0.0;
    for (const auto& l : eigs_) maxabs = std::max(maxabs, std::abs(l));
    double count = 1.0;  // C(n+k-1, k)
    for (int i = 1; i <= k; ++i) count *= static_cast<double>(n_ + k - i) / i;
    if (count > 5e5) return;  // pivot guards in the base case still protect us

    double minsum = std::numeric_limits<double>::infinity();
    std::vector<Index> pick(k, 0);
    // iterate non-decreasing index multisets
    while (true) {
      std::complex<double> s = 0.0;
      for (int t = 0; t < k; ++t) s += eigs_[pick[t]];
      minsum = std::min(minsum, std::abs(s));
      int t = k - 1;
      while (t >= 0 && pick[t] == n_ - 1) --t;
      if (t < 0) break;
      const Index v = pick[t] + 1;
      for (int r = t; r < k; ++r) pick[r] = v;
    }
    const double scale = std::max(1e-300, static_cast<double>(k) * maxabs);
    if (minsum < 1e-12 * scale)
      throw NumericalError(
          "KWaySolver: k-way operator numerically singular (resonant spectrum): min |sum of " +
          std::to_string(k) + " pencil eigenvalues| = " + std::to_string(minsum));
  }

  // Solve (P (x) T^{(x)m} + Pn (x) Ltri_m) x = b where Ltri_m is the k-way sum
  // built from the triangular factors (S in one slot, T elsewhere) and the
  // small p x p parameter pair (P, Pn) owns the slowest index.
  Vec tri_solve(const Mat& P, const Mat& Pn, int m, Vec b) const {
    const Index p = P.rows();
    if (m == 0) {
      Eigen::FullPivLU<Mat> lu(P);
      lu.setThreshold(1e-13);
      if (!lu.isInvertible())
        throw NumericalError("KWaySolver: singular diagonal block (resonant spectrum)");
      return lu.solve(b);
    }
    const Index nm1 = ipow(n_, m - 1);
    const Index nm = nm1 * n_;
    Vec x = Vec::Zero(p * nm);

    Index j = n_ - 1;
    while (j >= 0) {
      const int beta = (j > 0 && S_(j, j - 1) != 0.0) ? 2 : 1;
      const Index jb = j - beta + 1;
      Mat Tblk = T_.block(jb, jb, beta, beta);
      Mat Sblk = S_.block(jb, jb, beta, beta);
      Mat Psub = kron_dense(Tblk, P) + kron_dense(Sblk, Pn);
      Mat Pnsub = kron_dense(Tblk, Pn);

      Vec bsub(beta * p * nm1);
      for (Index jj = 0; jj < beta; ++jj)
        for (Index a = 0; a < p; ++a)
          bsub.segment((jj * p + a) * nm1, nm1) = b.segment(a * nm + (jb + jj) * nm1, nm1);

      Vec xsub = tri_solve(Psub, Pnsub, m - 1, bsub);
      for (Index jj = 0; jj < beta; ++jj)
        for (Index a = 0; a < p; ++a)
          x.segment(a * nm + (jb + jj) * nm1, nm1) = xsub.segment((jj * p + a) * nm1, nm1);

      // Back-substitution updates for the rows above this block.
      if (jb > 0) {
        std::vector<Vec> u(p), w(p);
        for (Index jcol = jb; jcol <= j; ++jcol) {
          for (Index a = 0; a < p; ++a) {
            Vec xa = x.segment(a * nm + jcol * nm1, nm1);
            u[a] = generalized_ ? kron_pow_apply(T_, m - 1, xa) : xa;
            w[a] = apply_tri_sum(m - 1, xa);
          }
          for (Index jp = 0; jp < jb; ++jp) {
            const double ct = T_(jp, jcol), cs = S_(jp, jcol);
            if (ct == 0.0 && cs == 0.0) continue;
            for (Index ap = 0; ap < p; ++ap) {
              auto seg = b.segment(ap * nm + jp * nm1, nm1);
              for (Index a = 0; a < p; ++a) {
                const double c1 = ct * P(ap, a) + cs * Pn(ap, a);
                const double c2 = ct * Pn(ap, a);
                if (c1 != 0.0) seg -= c1 * u[a];
                if (c2 != 0.0) seg -= c2 * w[a];
              }
            }
          }
        }
      }
      j = jb - 1;
    }
    return x;
  }

  // Ltri_m v = sum_{i=1..m} (T^{(x)(i-1)} (x) S (x) T^{(x)(m-i)}) v.
  Vec apply_tri_sum(int m, const Vec& v) const {
    if (m == 0) return Vec::Zero(1);
    Vec out = Vec::Zero(v.size());
    for (int i = 1; i <= m; ++i) {
      Vec t = v;
      // factors applied fastest-first: positions m, m-1, ..., 1
      for (int pos = m; pos >= 1; --pos)
        t = detail::mode_apply_cycle(pos == i ? S_ : T_, t);
      out += t;
    }
    return out;
  }
};

// ---------------------------------------------------------------------------
// Lyapunov: A^T X + X A + Q = 0
// ---------------------------------------------------------------------------

inline Mat solve_lyapunov(const Mat& A, const Mat& Q) {
  if (A.rows() != A.cols() || Q.rows() != Q.cols() || Q.rows() != A.rows())
    throw ValidationError("solve_lyapunov: shape mismatch");
  const Index n = A.rows();
  KWaySolver solver(A);
  Vec q(Eigen::Map<const Vec>(Q.data(), Q.size()));
  Vec x = solver.solve(2, -q);
  Mat X = Eigen::Map<const Mat>(x.data(), n, n);
  X = 0.5 * (X + X.transpose()).eval();
  const double res = (A.transpose() * X + X * A + Q).norm();
  if (!(res <= 1e-11 * std::max(Q.norm(), 1e-300)) && Q.norm() > 0)
    throw NumericalError("solve_lyapunov: residual " + std::to_string(res) +
                         " exceeds contract (resonant spectrum?)");
  return X;
}

// ---------------------------------------------------------------------------
// Riccati equations
// ---------------------------------------------------------------------------

struct RiccatiSolution {
  Mat W;
  double residual_norm = 0.0;
  double closed_loop_spectrum_abscissa = 0.0;
};

namespace detail {

// Real basis of the n-dimensional invariant subspace of the 2n x 2n
// Hamiltonian H selected by eigenvalue real part; returns W = X2 * X1^{-1}.
inline Mat hamiltonian_subspace_solution(const Mat& H, bool want_stable, const char* label) {
  const Index n2 = H.rows(), n = n2 / 2;
  Eigen::EigenSolver<Mat> es(H);
  if (es.info() != Eigen::Success)
    throw NumericalError(std::string(label) + ": Hamiltonian eigenvalue iteration failed");
  Eigen::VectorXcd lam = es.eigenvalues();
  std::vector<Index> order(n2);
  for (Index i = 0; i < n2; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    if (lam(a).real() != lam(b).real()) return lam(a).real() < lam(b).real();
    return lam(a).imag() < lam(b).imag();
  });
  Eigen::MatrixXcd U(n2, n);
  for (Index c = 0; c < n; ++c) U.col(c) = es.eigenvectors().col(order[want_stable ? c : n + c]);
  Eigen::MatrixXcd X1 = U.topRows(n), X2 = U.bottomRows(n);
  Eigen::FullPivLU<Eigen::MatrixXcd> lu(X1);
  lu.setThreshold(1e-12);
  if (!lu.isInvertible())
    throw NumericalError(std::string(label) + ": no stabilizing solution (invariant subspace "
                         "has singular upper block)");
  Mat W = (X2 * lu.inverse()).real();
  return 0.5 * (W + W.transpose());
}

inline double spectral_abscissa(const Mat& A) {
  return A.eigenvalues().real().maxCoeff();
}

}  // namespace detail

// 0 = A^T W + W A + C^T C - eta W B B^T W  (stabilizing solution).
// With E supplied the equation reads
// 0 = A^T W E + E^T W A + C^T C - eta E^T W B B^T W E and is solved by the
// change of variable Wbar = E^T W E on the E-normalized system.
inline RiccatiSolution solve_riccati_future(const Mat& A, const Mat& B, const Mat& C,
                                            const std::optional<Mat>& E, double eta) {
  const Index n = A.rows();
  if (E && E->size() > 0 && !E->isIdentity(0.0)) {
    Eigen::PartialPivLU<Mat> elu(*E);
    Mat An = elu.solve(A), Bn = elu.solve(B);
    RiccatiSolution bar = solve_riccati_future(An, Bn, C, std::nullopt, eta);
    // W = E^{-T} Wbar E^{-1}
    Eigen::PartialPivLU<Mat> eluT(E->transpose());
    Mat W = eluT.solve(bar.W);                  // E^{-T} Wbar
    W = eluT.solve(W.transpose()).transpose();  // right-multiply by E^{-1}
    W = 0.5 * (W + W.transpose()).eval();
    RiccatiSolution out;
    out.W = W;
    out.residual_norm = (A.transpose() * W * (*E) + E->transpose() * W * A + C.transpose() * C -
                         eta * E->transpose() * W * B * B.transpose() * W * (*E))
                            .norm();
    out.closed_loop_spectrum_abscissa = bar.closed_loop_spectrum_abscissa;
    if (!(out.residual_norm <= 1e-10 * (1.0 + W.norm())))
      throw NumericalError("solve_riccati_future: E-weighted residual exceeds contract");
    return out;
  }

  const Mat BBt = B * B.transpose();
  const Mat CtC = C.transpose() * C;
  Mat W;
  if (eta == 0.0) {
    W = solve_lyapunov(A, CtC);  // observability Lyapunov equation
  } else {
    Mat H(2 * n, 2 * n);
    H << A, -eta * BBt, -CtC, -A.transpose();
    W = detail::hamiltonian_subspace_solution(H, /*want_stable=*/true, "solve_riccati_future");
    // Newton-Kleinman refinement to certifiable residual.
    double best = std::numeric_limits<double>::infinity();
    for (int it = 0; it < 40; ++it) {
      Mat R = A.transpose() * W + W * A + CtC - eta * W * BBt * W;
      const double rn = R.norm();
      if (rn >= best * 0.5 && rn <= 1e-12 * (1.0 + W.norm())) break;
      if (rn < 1e-15 * (1.0 + W.norm())) break;
      best = std::min(best, rn);
      Mat Acl = A - eta * BBt * W;
      Mat Wn = solve_lyapunov(Acl, CtC + eta * W * BBt * W);
      if ((Wn - W).norm() <= 1e-16 * (1.0 + W.norm())) break;
      W = 0.5 * (Wn + Wn.transpose());
    }
  }
  RiccatiSolution out;
  out.W = 0.5 * (W + W.transpose());
  out.residual_norm =
      (A.transpose() * out.W + out.W * A + CtC - eta * out.W * BBt * out.W).norm();
  out.closed_loop_spectrum_abscissa = detail::spectral_abscissa(A - eta * BBt * out.W);
  if (!(out.residual_norm <= 1e-10 * (1.0 + out.W.norm())))
    throw NumericalError("solve_riccati_future: Newton refinement stagnated at residual " +
                         std::to_string(out.residual_norm));
  if (eta > 0.0 && CtC.norm() > 0.0 && out.closed_loop_spectrum_abscissa >= 0.0)
    throw NumericalError("solve_riccati_future: no stabilizing solution (closed loop not stable)");
  return out;
}

// 0 = A^T V + V A - eta C^T C + V B B^T V with the antistabilizing closed
// loop: -(A + B B^T V) is stable.  For eta C^T C = 0 this selects the
// inverse-controllability-Gramian branch (V = 0 also satisfies the algebraic
// equation but not the spectral contract).
inline RiccatiSolution solve_riccati_past(const Mat& A, const Mat& B, const Mat& C, double eta) {
  const Index n = A.rows();
  const Mat BBt = B * B.transpose();
  const Mat CtC = C.transpose() * C;
  RiccatiSolution out;
  Mat H(2 * n, 2 * n);
  H << A, BBt, eta * CtC, -A.transpose();
  Mat V = detail::hamiltonian_subspace_solution(H, /*want_stable=*/false, "solve_riccati_past");
  double best = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 40; ++it) {
    Mat R = A.transpose() * V + V * A - eta * CtC + V * BBt * V;
    const double rn = R.norm();
    if (rn <= 1e-15 * (1.0 + V.norm())) break;
    if (rn >= best && rn <= 1e-12 * (1.0 + V.norm())) break;
    best = std::min(best, rn);
    Mat Acl = A + BBt * V;  // antistable => nonresonant Lyapunov operator
    Mat Vn = solve_lyapunov(Acl, Mat(-(eta * CtC + V * BBt * V)));
    if ((Vn - V).norm() <= 1e-16 * (1.0 + V.norm())) break;
    V = 0.5 * (Vn + Vn.transpose());
  }
  out.W = 0.5 * (V + V.transpose());
  out.residual_norm = (A.transpose() * out.W + out.W * A - eta * CtC + out.W * BBt * out.W).norm();
  out.closed_loop_spectrum_abscissa = detail::spectral_abscissa(-(A + BBt * out.W));
  if (!(out.residual_norm <= 1e-10 * (1.0 + out.W.norm())))
    throw NumericalError("solve_riccati_past: Newton refinement stagnated at residual " +
                         std::to_string(out.residual_norm));
  return out;
}

// Structured linear solve L_k^{E^T}(F^T) w = rhs (convenience wrapper; reuse a
// KWaySolver instance when solving for several orders k against one pencil).
inline Vec solve_kway(const Mat& F, const Mat& E, int k, const Vec& rhs) {
  return KWaySolver(F, E).solve(k, rhs);
}

}  // namespace daekron
