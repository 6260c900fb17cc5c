#pragma once

// Monolithic (bordered augmented) route for the energy coefficients, working
// in the original n1-dimensional variables of a Stokes-type DAE with B2 = 0.
//
// For each order k >= 3 the coefficient wh_k solves
//
//   [ L_k^{E11^T}(F)    M_k^{Itld}(A12) ] [wh_k]   [b]
//   [ M_k^{Itld}(A12)^T       0         ] [ Om ] = [0]
//
// with F the transposed closed-loop matrix built from the projected Riccati
// solution W2hat.  All operator blocks are assembled sparsely (Kronecker sums
// of sparse factors); the dense n1^k x n1^k operator is never materialized.
// Coefficients in reduced variables are recovered through the factored map
// w_k^T = wh_k^T (Pi E11 Theta_r)^{(x)k}.

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "dae_reduction.hpp"
#include "energy_coeffs.hpp"
#include "kron_ops.hpp"
#include "lin_solvers.hpp"
#include "types.hpp"

namespace daekron {

using SpMat = Eigen::SparseMatrix<double>;

inline constexpr Index kBorderedDirectSideLimit = 50'000;

namespace detail {

inline SpMat to_sparse(const Mat& A, double drop_tol = 0.0) {
  return A.sparseView(1.0, drop_tol);
}

inline SpMat sparse_kron(const SpMat& A, const SpMat& B) {
  SpMat out(A.rows() * B.rows(), A.cols() * B.cols());
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<size_t>(A.nonZeros()) * static_cast<size_t>(B.nonZeros()));
  for (int ja = 0; ja < A.outerSize(); ++ja)
    for (SpMat::InnerIterator a(A, ja); a; ++a)
      for (int jb = 0; jb < B.outerSize(); ++jb)
        for (SpMat::InnerIterator b(B, jb); b; ++b)
          trips.emplace_back(a.row() * B.rows() + b.row(), a.col() * B.cols() + b.col(),
                             a.value() * b.value());
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

inline SpMat sparse_kron_chain(const std::vector<const SpMat*>& factors) {
  SpMat acc(1, 1);
  acc.insert(0, 0) = 1.0;
  for (const SpMat* f : factors) acc = sparse_kron(acc, *f);
  return acc;
}

}  // namespace detail

// R = I - A12 A12^+ = Q1 Q1^T, the orthogonal projector onto range(A12)^perp.
struct OrthogonalComplement {
  Mat R;   // n1 x n1
  Mat Q1;  // n1 x (n1 - n2), orthonormal
};

inline OrthogonalComplement build_orthogonal_R(const Mat& A12) {
  const Index n2 = A12.cols();
  if (n2 > 0) {
    Eigen::JacobiSVD<Mat> svd(A12);
    if (!(svd.singularValues()(n2 - 1) > 1e-12 * svd.singularValues()(0)))
      throw ValidationError("build_orthogonal_R: A12 rank deficient");
  }
  OrthogonalComplement oc;
  oc.Q1 = detail::null_space_basis(A12);
  oc.R = oc.Q1 * oc.Q1.transpose();
  return oc;
}

// Identity columns at the non-pivot columns of A12^T under column-pivoted
// elimination (ties broken toward the lowest column index).
inline Mat build_Itilde(const Mat& A12) {
  const Index n1 = A12.rows(), n2 = A12.cols();
  if (n2 == 0) return Mat::Identity(n1, n1);
  Mat R = A12.transpose();
  const double tol = 1e-12 * std::max(R.cwiseAbs().maxCoeff(), 1e-300);
  std::vector<bool> pivot(n1, false);
  Index r = 0;
  for (Index c = 0; c < n1 && r < n2; ++c) {
    Index imax = r;
    for (Index i = r + 1; i < n2; ++i)
      if (std::abs(R(i, c)) > std::abs(R(imax, c))) imax = i;
    if (std::abs(R(imax, c)) <= tol) continue;
    R.row(r).swap(R.row(imax));
    R.row(r) /= R(r, c);
    for (Index rr = 0; rr < n2; ++rr)
      if (rr != r) R.row(rr) -= R(rr, c) * R.row(r);
    pivot[c] = true;
    ++r;
  }
  Mat It = Mat::Zero(n1, n1 - r);
  Index col = 0;
  for (Index c = 0; c < n1; ++c)
    if (!pivot[c]) It(c, col++) = 1.0;
  return It;
}

struct ProjectedRiccatiResult {
  Mat W2hat;                        // n1 x n1, Theta_r Wtilde2 Theta_r^T
  double projected_residual = 0.0;  // ||Theta_r^T Ric(W2hat) Theta_r||
  ReducedOdeSystem reduced;
  RiccatiSolution reduced_riccati;  // E_d-normalized reduced solution
};

inline ProjectedRiccatiResult solve_projected_riccati_sparse(const StokesDaeSystem& sys,
                                                             double eta,
                                                             EnergyKind kind = EnergyKind::future) {
  if (sys.B2.size() != 0 && sys.B2.norm() > 0.0)
    throw ValidationError("monolithic route requires B2 = 0");
  ProjectedRiccatiResult out;
  out.reduced = reduce_system(sys);
  NormalizedSystem ns = NormalizedSystem::from_reduced(out.reduced);
  out.reduced_riccati = kind == EnergyKind::future
                            ? solve_riccati_future(ns.A, ns.b, ns.C, std::nullopt, eta)
                            : solve_riccati_past(ns.A, ns.b, ns.C, eta);
  const Mat& Th = out.reduced.projectors.Theta_r;
  Eigen::PartialPivLU<Mat> edlu(out.reduced.E_d);
  Eigen::PartialPivLU<Mat> edluT(out.reduced.E_d.transpose());
  Mat Wt = edluT.solve(out.reduced_riccati.W);       // E_d^{-T} W2
  Wt = edlu.solve(Wt.transpose()).transpose();       // ... E_d^{-1}
  out.W2hat = Th * Wt * Th.transpose();
  out.W2hat = 0.5 * (out.W2hat + out.W2hat.transpose()).eval();

  const Mat& W = out.W2hat;
  Mat Ric = sys.A11.transpose() * W * sys.E11 + sys.E11.transpose() * W * sys.A11;
  Mat quad = sys.E11.transpose() * W * sys.B1 * sys.B1.transpose() * W * sys.E11;
  if (kind == EnergyKind::future)
    Ric += sys.C1.transpose() * sys.C1 - eta * quad;
  else
    Ric += quad - eta * sys.C1.transpose() * sys.C1;
  out.projected_residual = (Th.transpose() * Ric * Th).norm();
  if (!(out.projected_residual <= 1e-9 * (1.0 + W.norm())))
    throw NumericalError("solve_projected_riccati_sparse: projected residual " +
                         std::to_string(out.projected_residual) + " exceeds contract");
  return out;
}

// Transposed closed-loop operator entering L_k on the monolithic side.
inline Mat monolithic_closed_loop_op(const StokesDaeSystem& sys, const Mat& W2hat, double eta,
                                     EnergyKind kind) {
  Mat low = sys.E11.transpose() * W2hat * sys.B1 * sys.B1.transpose();
  return kind == EnergyKind::future ? Mat(sys.A11.transpose() - eta * low)
                                    : Mat(sys.A11.transpose() + low);
}

// Theorem-3 right-hand side for order k:
//   b = -L_{k-1}^{E11^T}(N^T) wh_{k-1}
//       + fac * sum_{i+j=k+2, i,j>2} ij vec((E^{(x)(i-1)})^T W_i^T B1 B1^T W_j E^{(x)(j-1)})
// with the E-powers applied factor-wise (never assembled).
inline Vec assemble_rhs_b(int k, const StokesDaeSystem& sys, const std::map<int, Vec>& whats,
                          double eta, EnergyKind kind) {
  const Index n1 = sys.n1(), m = sys.m();
  Vec b = Vec::Zero(ipow(n1, k));
  if (sys.N.size() != 0 && sys.N.norm() > 0.0)
    b = -apply_Lk(sys.N.transpose(), sys.E11.transpose(), k - 1, whats.at(k - 1));
  const double fac = kind == EnergyKind::future ? eta / 4.0 : -1.0 / 4.0;
  auto U_factor = [&](int i) {
    // (E11^T)^{(x)(i-1)} (W_i^T B1), columns built matrix-free
    const Vec& wh = whats.at(i);
    Mat U(ipow(n1, i - 1), m);
    Eigen::Map<const Mat> Wi(wh.data(), n1, ipow(n1, i - 1));
    for (Index c = 0; c < m; ++c)
      U.col(c) = kron_pow_apply(sys.E11.transpose(), i - 1, Wi.transpose() * sys.B1.col(c));
    return U;
  };
  for (int i = 3; i < k; ++i) {
    const int j = k + 2 - i;
    if (j <= 2 || !whats.count(i) || !whats.count(j)) continue;
    Mat Ui = U_factor(i), Uj = U_factor(j);
    Mat M = Ui * Uj.transpose();
    b += fac * static_cast<double>(i) * static_cast<double>(j) *
         Vec(Eigen::Map<const Vec>(M.data(), M.size()));
  }
  return b;
}

struct MonolithicSolveResult {
  Vec what;       // symmetrized wh_k
  Vec omega;      // multiplier block (opaque)
  Index side = 0; // bordered-system dimension
  Index operator_nonzeros = 0;
  double eq1_relative = 0.0;  // ||L wh + M Om - b|| / ||b||
  double eq2_norm = 0.0;      // ||M^T wh||
};

inline MonolithicSolveResult solve_monolithic_k(int k, const StokesDaeSystem& sys,
                                                const Mat& W2hat, double eta, const Vec& b,
                                                EnergyKind kind = EnergyKind::future) {
  if (k < 2) throw ValidationError("solve_monolithic_k: order must be >= 2");
  const Index n1 = sys.n1(), n2 = sys.n2();
  const Index nk = ipow(n1, k);
  const Index mcols = nk - ipow(n1 - n2, k);  // block-count identity
  const Index side = nk + mcols;
  if (side > kBorderedDirectSideLimit)
    throw NumericalError("solve_monolithic_k: bordered side " + std::to_string(side) +
                         " exceeds the direct-solve limit " +
                         std::to_string(kBorderedDirectSideLimit));
  if (b.size() != nk) throw ValidationError("solve_monolithic_k: rhs length mismatch");

  Mat F = monolithic_closed_loop_op(sys, W2hat, eta, kind);
  SpMat Fs = detail::to_sparse(F), Es = detail::to_sparse(Mat(sys.E11.transpose()));
  SpMat L(nk, nk);
  for (int slot = 1; slot <= k; ++slot) {
    std::vector<const SpMat*> facs;
    for (int pos = 1; pos <= k; ++pos) facs.push_back(pos == slot ? &Fs : &Es);
    L += detail::sparse_kron_chain(facs);
  }
  Mat Itld = build_Itilde(sys.A12);
  SpMat A12s = detail::to_sparse(sys.A12), Is = detail::to_sparse(Mat::Identity(n1, n1)),
        Itlds = detail::to_sparse(Itld);
  std::vector<SpMat> mblocks;
  for (int j = 1; j <= k; ++j) {
    std::vector<const SpMat*> facs;
    for (int pos = 1; pos < j; ++pos) facs.push_back(&Itlds);
    facs.push_back(&A12s);
    for (int pos = j + 1; pos <= k; ++pos) facs.push_back(&Is);
    mblocks.push_back(detail::sparse_kron_chain(facs));
  }

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<size_t>(L.nonZeros()) + 2 * static_cast<size_t>(k) * nk);
  for (int jc = 0; jc < L.outerSize(); ++jc)
    for (SpMat::InnerIterator it(L, jc); it; ++it)
      trips.emplace_back(it.row(), it.col(), it.value());
  Index c0 = nk;
  for (const SpMat& Mb : mblocks) {
    for (int jc = 0; jc < Mb.outerSize(); ++jc)
      for (SpMat::InnerIterator it(Mb, jc); it; ++it) {
        trips.emplace_back(it.row(), c0 + it.col(), it.value());
        trips.emplace_back(c0 + it.col(), it.row(), it.value());
      }
    c0 += Mb.cols();
  }
  if (c0 != side)
    throw NumericalError("solve_monolithic_k: selection width " + std::to_string(c0 - nk) +
                         " violates the block-count identity " + std::to_string(mcols));
  SpMat S(side, side);
  S.setFromTriplets(trips.begin(), trips.end());
  S.makeCompressed();

  Eigen::SparseLU<SpMat> lu;
  lu.analyzePattern(S);
  lu.factorize(S);
  if (lu.info() != Eigen::Success) {
    std::string msg = "solve_monolithic_k: bordered matrix singular (expected rank " +
                      std::to_string(2 * nk - ipow(n1 - n2, k)) + " of side " +
                      std::to_string(side) + ")";
    if (side <= 4000) {
      Eigen::ColPivHouseholderQR<Mat> qr((Mat(S)));
      qr.setThreshold(1e-10);
      msg += "; numerical rank " + std::to_string(qr.rank());
    }
    throw NumericalError(msg);
  }
  Vec rhs = Vec::Zero(side);
  rhs.head(nk) = b;
  Vec sol = lu.solve(rhs);

  MonolithicSolveResult out;
  out.side = side;
  out.operator_nonzeros = S.nonZeros();
  Vec raw = sol.head(nk);
  out.omega = sol.tail(mcols);
  // certify both block equations on the raw solution, then symmetrize
  Vec eq1 = L * raw - b;
  {
    Index r0 = 0;
    for (const SpMat& Mb : mblocks) {
      eq1 += Mb * out.omega.segment(r0, Mb.cols());
      r0 += Mb.cols();
    }
  }
  double eq2 = 0.0;
  for (const SpMat& Mb : mblocks) eq2 = std::max(eq2, (Mb.transpose() * raw).norm());
  out.eq1_relative = eq1.norm() / std::max(b.norm(), 1e-300);
  out.eq2_norm = eq2;
  const double scale = std::max(1.0, raw.norm());
  if (b.norm() > 0.0 && !(out.eq1_relative <= 1e-9))
    throw NumericalError("solve_monolithic_k: first block equation residual " +
                         std::to_string(out.eq1_relative) + " exceeds 1e-9 relative");
  if (!(eq2 <= 1e-9 * scale))
    throw NumericalError("solve_monolithic_k: constraint block residual " + std::to_string(eq2) +
                         " exceeds contract");
  out.what = symmetrize_vec(raw, n1, k);
  return out;
}

// w_k^T = wh_k^T (Pi E11 Theta_r)^{(x)k}, applied factor-wise.
inline Vec recover_dense_coeff(const Vec& what, const StokesDaeSystem& sys,
                               const ProjectorPair& projectors, int k) {
  if (what.size() != ipow(sys.n1(), k))
    throw ValidationError("recover_dense_coeff: coefficient length is not n1^k");
  Mat map = (projectors.Pi * sys.E11 * projectors.Theta_r).transpose();
  std::vector<Mat> facs(static_cast<size_t>(k), map);
  return kron_apply(facs, what);
}

// u = -(eta/2) B1^T sum_{i=2}^{d+1} i Pi^T W_i (Pi E11 x1)^{(x)(i-1)},
// evaluated matrix-free (W_i = unfolding of the symmetrized wh_i).
inline Vec direct_feedback_eval(const std::map<int, Vec>& whats, const StokesDaeSystem& sys,
                                const Mat& Pi, double eta, const Vec& x1, int d) {
  const Index n1 = sys.n1(), m = sys.m();
  Vec z = Pi * (sys.E11 * x1);
  Vec u = Vec::Zero(m);
  for (int i = 2; i <= d + 1; ++i) {
    auto it = whats.find(i);
    if (it == whats.end()) continue;
    Vec t = it->second;
    for (int c = 0; c < i - 1; ++c) {
      Eigen::Map<const Mat> M(t.data(), n1, t.size() / n1);
      t = M.transpose() * z;
    }
    u -= 0.5 * eta * i * (sys.B1.transpose() * (Pi.transpose() * t));
  }
  return u;
}

struct MonolithicCoefficients {
  Mat W2hat;
  std::map<int, Vec> whats;  // k -> symmetrized wh_k, orders 2..d
  Mat Itilde;
  ReducedOdeSystem reduced;
  double projected_riccati_residual = 0.0;
  std::vector<MonolithicSolveResult> solves;  // one per order 3..d
};

inline MonolithicCoefficients monolithic_energy(const StokesDaeSystem& sys, double eta, int d,
                                                EnergyKind kind = EnergyKind::future) {
  if (d < 2) throw ValidationError("monolithic_energy: value degree must be >= 2");
  MonolithicCoefficients out;
  ProjectedRiccatiResult pr = solve_projected_riccati_sparse(sys, eta, kind);
  out.W2hat = pr.W2hat;
  out.reduced = pr.reduced;
  out.projected_riccati_residual = pr.projected_residual;
  out.Itilde = build_Itilde(sys.A12);
  const Index n1 = sys.n1();
  out.whats.emplace(2, symmetrize_vec(Eigen::Map<const Vec>(pr.W2hat.data(), pr.W2hat.size()),
                                      n1, 2));
  for (int k = 3; k <= d; ++k) {
    Vec b = assemble_rhs_b(k, sys, out.whats, eta, kind);
    MonolithicSolveResult res = solve_monolithic_k(k, sys, out.W2hat, eta, b, kind);
    out.whats.emplace(k, res.what);
    out.solves.push_back(std::move(res));
  }
  return out;
}

// Reduced-variable coefficients recovered from the monolithic set (orders 2..d).
inline std::map<int, Vec> recover_all(const MonolithicCoefficients& mono,
                                      const StokesDaeSystem& sys) {
  std::map<int, Vec> out;
  for (const auto& [k, wh] : mono.whats)
    out.emplace(k, recover_dense_coeff(wh, sys, mono.reduced.projectors, k));
  return out;
}

struct RankIdentityReport {
  Index n1 = 0, n2 = 0;
  int k = 0;
  Index rank_Mk_full = 0;      // rank of M_k(A12) with B = I
  Index rank_Mk_selected = 0;  // rank of M_k^{Itld}(A12)
  Index formula = 0;           // n1^k - (n1 - r2)^k
  bool block_count_ok = false; // Lemma-1 column-count identity
  double lemma5_error = 0.0;   // ||prod (I - Z_i Z_i^+) - R^{(x)k}||_max
  bool ok = false;
};

// Lemma 1: r2 sum_{i=1..k} n1^{k-i} (n1-r2)^{i-1} = n1^k - (n1-r2)^k.
inline bool block_count_identity(Index n1, Index r2, int k) {
  std::int64_t lhs = 0;
  for (int i = 1; i <= k; ++i) lhs += ipow(n1, k - i) * ipow(n1 - r2, i - 1);
  return r2 * lhs == ipow(n1, k) - ipow(n1 - r2, k);
}

inline RankIdentityReport rank_identities_check(const Mat& A12, int k) {
  RankIdentityReport rep;
  rep.n1 = A12.rows();
  rep.n2 = A12.cols();
  rep.k = k;
  Index r2 = 0;
  if (rep.n2 > 0) {
    Eigen::ColPivHouseholderQR<Mat> aqr(A12);
    aqr.setThreshold(1e-10);
    r2 = aqr.rank();
  }
  rep.formula = ipow(rep.n1, k) - ipow(rep.n1 - r2, k);
  rep.block_count_ok = block_count_identity(rep.n1, r2, k);

  Mat Mfull = build_Mk(A12, Mat::Identity(rep.n1, rep.n1), k).assembled();
  Mat Msel = build_Mk(A12, build_Itilde(A12), k).assembled();
  auto dense_rank = [](const Mat& M) {
    if (M.cols() == 0 || M.rows() == 0) return Index(0);
    Eigen::ColPivHouseholderQR<Mat> qr(M);
    qr.setThreshold(1e-10);
    return Index(qr.rank());
  };
  rep.rank_Mk_full = dense_rank(Mfull);
  rep.rank_Mk_selected = dense_rank(Msel);

  OrthogonalComplement oc = build_orthogonal_R(A12);
  const Index nk = ipow(rep.n1, k);
  Mat P = Mat::Identity(nk, nk);
  BlockKroneckerMatrix hat = build_Mk(A12, oc.R, k);
  for (int j = 1; j <= k; ++j) {
    Mat Z = hat.block(j);
    if (Z.cols() == 0) continue;  // I - Z Z^+ degenerates to the identity
    Eigen::CompleteOrthogonalDecomposition<Mat> cod(Z);
    cod.setThreshold(1e-12);
    P = P * (Mat::Identity(nk, nk) - Z * cod.pseudoInverse());
  }
  Mat Rk = Mat::Ones(1, 1);
  for (int j = 0; j < k; ++j) Rk = kron_dense(Rk, oc.R);
  rep.lemma5_error = (P - Rk).cwiseAbs().maxCoeff();

  rep.ok = rep.rank_Mk_full == rep.formula && rep.rank_Mk_selected == rep.formula &&
           rep.block_count_ok && rep.lemma5_error <= 1e-10;
  return rep;
}

}  // namespace daekron
