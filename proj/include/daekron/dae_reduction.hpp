#pragma once

// Stokes-type DAE structure validation, discrete projector construction, and
// the strangeness-free reduction to an ODE on the constraint manifold.
//
// System form (quadratic dynamics, linear algebraic constraint):
//
//   E11 x1' = A11 x1 + N (x1 (x) x1) + A12 x2 + B1 u
//         0 = A12^T x1 + B2 u
//
// The reduced ODE lives in R^{n1-n2} with basis Theta_r of null(A12^T) and
// lift x1 = Theta_r x_d - s u, s = E11^{-1} A12 (A12^T E11^{-1} A12)^{-1} B2.

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kron_ops.hpp"
#include "types.hpp"

namespace daekron {

struct StokesDaeSystem {
  Mat E11;  // n1 x n1, invertible
  Mat A11;  // n1 x n1
  Mat A12;  // n1 x n2, full column rank
  Mat N;    // n1 x n1^2, quadratic coefficient (columns indexed j*n1+k)
  Mat B1;   // n1 x m
  Mat B2;   // n2 x m
  Mat C1;   // p x n1

  Index n1() const { return E11.rows(); }
  Index n2() const { return A12.cols(); }
  Index m() const { return B1.cols(); }
  Index p() const { return C1.rows(); }
};

struct ProjectorPair {
  Mat Pi;       // n1 x n1 oblique projector, Pi A12 = 0
  Mat Theta_l;  // n1 x (n1-n2), Pi = Theta_l Theta_r^T
  Mat Theta_r;  // n1 x (n1-n2), orthonormal basis of null(A12^T)
};

struct ReducedOdeSystem {
  Mat E_d;      // r x r, invertible (r = n1-n2)
  Mat A_d;      // r x r
  Mat N_d;      // r x r^2
  Mat B_const;  // r x m
  Mat G_lin;    // r x r, coefficient of u * x_d (single-input coupling only)
  Mat s_d;      // r x m^2, coefficient of u (x) u
  Mat s;        // n1 x m drift vector of the lift
  Mat C_d;      // p x r
  Mat D_d;      // p x m
  ProjectorPair projectors;
  StokesDaeSystem source;  // originating DAE, kept for residual checks

  Index r() const { return E_d.rows(); }
  Index m() const { return B_const.cols(); }
};

struct StokesValidationReport {
  bool ok = true;
  std::vector<std::string> issues;
  double e11_sv_ratio = 0.0;    // smallest/largest singular value of E11
  double a12_sv_ratio = 0.0;    // smallest/largest singular value of A12
  double schur_sv_ratio = 0.0;  // same for A12^T E11^{-1} A12
};

namespace detail {

// Orthonormal basis of null(A12^T) = range(A12)^perp, deterministic sign:
// the first entry of each column with magnitude > 1e-12 is made positive.
inline Mat null_space_basis(const Mat& A12) {
  const Index n1 = A12.rows(), n2 = A12.cols();
  Mat Theta;
  if (n2 == 0) {
    Theta = Mat::Identity(n1, n1);
  } else {
    Eigen::HouseholderQR<Mat> qr(A12);
    Mat Qfull = qr.householderQ() * Mat::Identity(n1, n1);
    Theta = Qfull.rightCols(n1 - n2);
  }
  for (Index c = 0; c < Theta.cols(); ++c) {
    for (Index i = 0; i < n1; ++i) {
      if (std::abs(Theta(i, c)) > 1e-12) {
        if (Theta(i, c) < 0.0) Theta.col(c) = -Theta.col(c);
        break;
      }
    }
  }
  return Theta;
}

}  // namespace detail

inline StokesValidationReport validate_stokes_dae(const StokesDaeSystem& sys) {
  StokesValidationReport rep;
  const Index n1 = sys.n1(), n2 = sys.n2();
  auto fail = [&rep](const std::string& msg) {
    rep.ok = false;
    rep.issues.push_back(msg);
  };

  if (sys.A11.rows() != n1 || sys.A11.cols() != n1) fail("A11 shape mismatch");
  if (sys.A12.rows() != n1) fail("A12 row count mismatch");
  if (sys.N.size() != 0 && (sys.N.rows() != n1 || sys.N.cols() != n1 * n1))
    fail("N must be n1 x n1^2");
  if (sys.B1.rows() != n1) fail("B1 row count mismatch");
  if (sys.B2.size() != 0 && (sys.B2.rows() != n2 || sys.B2.cols() != sys.B1.cols()))
    fail("B2 must be n2 x m");
  if (sys.C1.cols() != n1) fail("C1 column count mismatch");
  if (!rep.ok) return rep;

  Eigen::JacobiSVD<Mat> esvd(sys.E11);
  rep.e11_sv_ratio = esvd.singularValues()(n1 - 1) / esvd.singularValues()(0);
  if (!(rep.e11_sv_ratio > 1e-12)) fail("E11 numerically singular");

  if (n2 > 0) {
    Eigen::JacobiSVD<Mat> asvd(sys.A12);
    rep.a12_sv_ratio = asvd.singularValues()(n2 - 1) / asvd.singularValues()(0);
    if (!(rep.a12_sv_ratio > 1e-12)) fail("A12 rank deficient");
    if (rep.ok) {
      Eigen::PartialPivLU<Mat> elu(sys.E11);
      Mat S = sys.A12.transpose() * elu.solve(sys.A12);
      Eigen::JacobiSVD<Mat> ssvd(S);
      rep.schur_sv_ratio = ssvd.singularValues()(n2 - 1) / ssvd.singularValues()(0);
      if (!(rep.schur_sv_ratio > 1e-12)) fail("projector Schur complement singular");
    }
  } else {
    rep.a12_sv_ratio = 1.0;
    rep.schur_sv_ratio = 1.0;
  }
  return rep;
}

// Pi = I - A12 (A12^T E11^{-1} A12)^{-1} A12^T E11^{-1}
inline Mat build_projector(const Mat& E11, const Mat& A12) {
  const Index n1 = E11.rows(), n2 = A12.cols();
  if (n2 == 0) return Mat::Identity(n1, n1);
  Eigen::PartialPivLU<Mat> elu(E11);
  Eigen::PartialPivLU<Mat> eluT(E11.transpose());
  Mat S = A12.transpose() * elu.solve(A12);
  Eigen::JacobiSVD<Mat> ssvd(S);
  if (!(ssvd.singularValues()(n2 - 1) > 1e-12 * ssvd.singularValues()(0)))
    throw NumericalError("build_projector: ill-conditioned Schur complement A12^T E11^{-1} A12");
  Mat At_Einv = eluT.solve(A12).transpose();  // A12^T E11^{-1}
  return Mat::Identity(n1, n1) - A12 * Eigen::PartialPivLU<Mat>(S).solve(At_Einv);
}

inline ProjectorPair factor_projector(const Mat& Pi, const Mat& A12) {
  ProjectorPair pp;
  pp.Pi = Pi;
  pp.Theta_r = detail::null_space_basis(A12);
  pp.Theta_l = Pi * pp.Theta_r;
  return pp;
}

inline ReducedOdeSystem reduce_system(const StokesDaeSystem& sys) {
  StokesValidationReport rep = validate_stokes_dae(sys);
  if (!rep.ok) {
    std::string msg = "reduce_system: invalid Stokes-type system:";
    for (const auto& s : rep.issues) msg += " " + s + ";";
    throw ValidationError(msg);
  }
  const Index n1 = sys.n1(), n2 = sys.n2(), m = sys.m();
  const Index r = n1 - n2;
  const bool has_N = sys.N.size() != 0 && sys.N.norm() > 0.0;
  const bool has_B2 = sys.B2.size() != 0 && sys.B2.norm() > 0.0;
  if (has_B2 && has_N && m > 1)
    throw ValidationError(
        "reduce_system: state-dependent input coupling (B2 != 0 with quadratic dynamics) is "
        "supported for single-input systems only");

  ReducedOdeSystem red;
  red.source = sys;
  red.projectors = factor_projector(build_projector(sys.E11, sys.A12), sys.A12);
  const Mat& Th = red.projectors.Theta_r;

  Eigen::PartialPivLU<Mat> elu(sys.E11);
  Mat s = Mat::Zero(n1, m);
  if (n2 > 0 && sys.B2.size() != 0) {
    Mat S = sys.A12.transpose() * elu.solve(sys.A12);
    s = elu.solve(sys.A12 * Eigen::PartialPivLU<Mat>(S).solve(sys.B2));
  }
  red.s = s;
  red.E_d = Th.transpose() * sys.E11 * Th;
  red.A_d = Th.transpose() * sys.A11 * Th;
  red.N_d = has_N ? Mat(Th.transpose() * sys.N * kron_dense(Th, Th)) : Mat(Mat::Zero(r, r * r));
  red.B_const = Th.transpose() * (sys.B1 - sys.A11 * s);
  red.C_d = sys.C1 * Th;
  red.D_d = -sys.C1 * s;

  red.G_lin = Mat::Zero(r, r);
  red.s_d = Mat::Zero(r, m * m);
  if (has_B2 && has_N) {
    Vec sv = s.col(0);
    for (Index j = 0; j < r; ++j) {
      Vec th = Th.col(j);
      red.G_lin.col(j) =
          Th.transpose() * (-sys.N * kron_vec(sv, th) - sys.N * kron_vec(th, sv));
    }
    red.s_d = Th.transpose() * (sys.N * kron_dense(s, s));
  }
  return red;
}

inline Vec lift_state(const ReducedOdeSystem& red, const Vec& x_d, const Vec& u) {
  if (x_d.size() != red.r() || u.size() != red.m())
    throw ValidationError("lift_state: dimension mismatch");
  return red.projectors.Theta_r * x_d - red.s * u;
}

struct AlgebraicRecovery {
  Vec x2;
  double residual = 0.0;  // out-of-range part of the momentum balance
  bool consistent = true;
};

// Least-squares solve of A12 x2 = E11 x1' - A11 x1 - N (x1 (x) x1) - B1 u.
// Exact on trajectories; a large out-of-range residual flags inconsistency.
inline AlgebraicRecovery recover_algebraic(const StokesDaeSystem& sys, const Vec& x1,
                                           const Vec& x1dot, const Vec& u) {
  Vec rhs = sys.E11 * x1dot - sys.A11 * x1 - sys.B1 * u;
  if (sys.N.size() != 0) rhs -= sys.N * kron_vec(x1, x1);
  AlgebraicRecovery out;
  if (sys.n2() == 0) {
    out.x2 = Vec::Zero(0);
    out.residual = rhs.norm();
  } else {
    out.x2 = sys.A12.colPivHouseholderQr().solve(rhs);
    out.residual = (sys.A12 * out.x2 - rhs).norm();
  }
  out.consistent = out.residual <= 1e-6 * std::max(1.0, rhs.norm());
  return out;
}

}  // namespace daekron
