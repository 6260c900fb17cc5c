#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "daekron/benchmarks.hpp"
#include "daekron/dae_reduction.hpp"

using namespace daekron;

namespace {

std::mt19937_64 rng(2024);

double unit() { return static_cast<double>(rng() >> 11) * 0x1.0p-52 - 1.0; }

Mat random_mat(Index r, Index c) {
  Mat M(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) M(i, j) = unit();
  return M;
}

Vec random_vec(Index n) {
  Vec v(n);
  for (Index i = 0; i < n; ++i) v(i) = unit();
  return v;
}

StokesDaeSystem random_system(Index n1, Index n2, Index m, bool with_quadratic) {
  StokesDaeSystem sys;
  Mat R = random_mat(n1, n1);
  sys.E11 = R * R.transpose() + Mat::Identity(n1, n1);
  sys.A11 = random_mat(n1, n1);
  sys.A12 = random_mat(n1, n2);
  if (with_quadratic) {
    sys.N = random_mat(n1, n1 * n1);
    for (Index a = 0; a < n1; ++a)  // make the two slots symmetric
      for (Index b = 0; b < a; ++b) {
        Vec avg = 0.5 * (sys.N.col(a * n1 + b) + sys.N.col(b * n1 + a));
        sys.N.col(a * n1 + b) = avg;
        sys.N.col(b * n1 + a) = avg;
      }
  }
  sys.B1 = random_mat(n1, m);
  sys.B2 = Mat::Zero(n2, m);
  sys.C1 = random_mat(1, n1);
  return sys;
}

}  // namespace

TEST_CASE("validation accepts the scalar example and reports clean ratios") {
  StokesValidationReport rep = validate_stokes_dae(build_scalar_example());
  CHECK(rep.ok);
  CHECK(rep.issues.empty());
  CHECK(rep.e11_sv_ratio > 1e-12);
  CHECK(rep.a12_sv_ratio > 1e-12);
  CHECK(rep.schur_sv_ratio > 1e-12);
}

TEST_CASE("validation flags singular mass and rank-deficient constraint blocks") {
  StokesDaeSystem sys = build_scalar_example();
  sys.E11(0, 0) = 0.0;
  sys.E11(1, 1) = 0.0;
  StokesValidationReport rep = validate_stokes_dae(sys);
  CHECK_FALSE(rep.ok);
  bool mentions_e11 = false;
  for (const auto& s : rep.issues) mentions_e11 = mentions_e11 || s.find("E11") != std::string::npos;
  CHECK(mentions_e11);

  StokesDaeSystem sys2 = random_system(3, 2, 1, false);
  sys2.A12.col(1) = sys2.A12.col(0);
  StokesValidationReport rep2 = validate_stokes_dae(sys2);
  CHECK_FALSE(rep2.ok);
  bool mentions_a12 = false;
  for (const auto& s : rep2.issues) mentions_a12 = mentions_a12 || s.find("A12") != std::string::npos;
  CHECK(mentions_a12);
}

TEST_CASE("projector for the scalar example matches the closed form") {
  StokesDaeSystem sys = build_scalar_example();
  Mat Pi = build_projector(sys.E11, sys.A12);
  Mat expected(2, 2);
  expected << 0.5, -0.5, -0.5, 0.5;
  CHECK((Pi - expected).norm() <= 1e-12);
}

TEST_CASE("projector is idempotent and annihilates the constraint range") {
  StokesDaeSystem sys = random_system(5, 2, 1, false);
  Mat Pi = build_projector(sys.E11, sys.A12);
  CHECK((Pi * Pi - Pi).norm() <= 1e-10 * (1.0 + Pi.norm()));
  CHECK((Pi * sys.A12).norm() <= 1e-10 * sys.A12.norm());
  // A12^T E11^{-1} is a left annihilator of the projector
  CHECK((sys.A12.transpose() * sys.E11.inverse() * Pi).norm() <= 1e-9 * (1.0 + Pi.norm()));
}

TEST_CASE("null-space factor is orthonormal with a deterministic sign") {
  StokesDaeSystem sys = build_scalar_example();
  ProjectorPair pp = factor_projector(build_projector(sys.E11, sys.A12), sys.A12);
  REQUIRE(pp.Theta_r.cols() == 1);
  CHECK(pp.Theta_r(0, 0) == Catch::Approx(1.0 / std::sqrt(2.0)).margin(1e-12));
  CHECK(pp.Theta_r(1, 0) == Catch::Approx(-1.0 / std::sqrt(2.0)).margin(1e-12));
  CHECK((pp.Theta_r.transpose() * pp.Theta_r - Mat::Identity(1, 1)).norm() <= 1e-12);
  CHECK((pp.Theta_l - pp.Pi * pp.Theta_r).norm() <= 1e-12);
}

TEST_CASE("scalar example reduces to the known one-state quadratic ODE") {
  ReducedOdeSystem red = reduce_system(build_scalar_example());
  REQUIRE(red.r() == 1);
  CHECK(red.E_d(0, 0) == Catch::Approx(1.0).margin(1e-12));
  CHECK(red.A_d(0, 0) == Catch::Approx(-0.5).margin(1e-12));
  CHECK(red.N_d(0, 0) == Catch::Approx(3.0 / (2.0 * std::sqrt(2.0))).margin(1e-12));
  CHECK(red.B_const(0, 0) == Catch::Approx(1.0 / std::sqrt(2.0)).margin(1e-12));
  CHECK(red.C_d(0, 0) == Catch::Approx(-1.0 / std::sqrt(2.0)).margin(1e-12));
  CHECK(red.D_d.norm() <= 1e-14);   // B2 = 0: no feedthrough
  CHECK(red.s.norm() <= 1e-14);     // B2 = 0: no input shift
  CHECK(red.G_lin.norm() <= 1e-14);
  CHECK(red.s_d.norm() <= 1e-14);
}

TEST_CASE("no constraints means the reduction is the identity") {
  StokesDaeSystem sys = random_system(4, 0, 2, true);
  ReducedOdeSystem red = reduce_system(sys);
  REQUIRE(red.r() == 4);
  CHECK((red.projectors.Theta_r - Mat::Identity(4, 4)).norm() <= 1e-14);
  CHECK((red.E_d - sys.E11).norm() <= 1e-13 * sys.E11.norm());
  CHECK((red.A_d - sys.A11).norm() <= 1e-13 * (1.0 + sys.A11.norm()));
  CHECK((red.N_d - sys.N).norm() <= 1e-13 * (1.0 + sys.N.norm()));
}

TEST_CASE("reduced dynamics agree with the projected original dynamics") {
  // With B2 = 0: Theta_r^T [E11, A11, N, B1] Theta_r reproduces the reduced
  // blocks; checked on a random system to guard the assembly wiring.
  StokesDaeSystem sys = random_system(5, 2, 2, true);
  ReducedOdeSystem red = reduce_system(sys);
  const Mat& Th = red.projectors.Theta_r;
  CHECK((red.E_d - Th.transpose() * sys.E11 * Th).norm() <= 1e-12 * (1.0 + sys.E11.norm()));
  CHECK((red.A_d - Th.transpose() * sys.A11 * Th).norm() <= 1e-12 * (1.0 + sys.A11.norm()));
  CHECK((red.N_d - Th.transpose() * sys.N * kron_dense(Th, Th)).norm() <=
        1e-12 * (1.0 + sys.N.norm()));
  CHECK((red.B_const - Th.transpose() * sys.B1).norm() <= 1e-12 * (1.0 + sys.B1.norm()));
  CHECK((red.C_d - sys.C1 * Th).norm() <= 1e-12 * (1.0 + sys.C1.norm()));
}

TEST_CASE("lifted states satisfy the constraint for any reduced state and input") {
  StokesDaeSystem sys = build_fisher(FisherConfig{8, 0.1, 3.0, 30.0});
  ReducedOdeSystem red = reduce_system(sys);
  for (int t = 0; t < 5; ++t) {
    Vec x_d = random_vec(red.r());
    Vec u = random_vec(red.m());
    Vec x1 = lift_state(red, x_d, u);
    CHECK((sys.A12.transpose() * x1 + sys.B2 * u).norm() <= 1e-12 * (1.0 + x1.norm()));
  }
}

TEST_CASE("algebraic recovery inverts the momentum balance on consistent data") {
  StokesDaeSystem sys = random_system(5, 2, 1, true);
  // Manufacture a consistent point: pick x1, u, x2 and define x1dot from the
  // momentum equation.
  Vec x1 = random_vec(5), u = random_vec(1), x2 = random_vec(2);
  Vec rhs = sys.A11 * x1 + sys.N * kron_vec(x1, x1) + sys.A12 * x2 + sys.B1 * u;
  Vec x1dot = sys.E11.lu().solve(rhs);
  AlgebraicRecovery rec = recover_algebraic(sys, x1, x1dot, u);
  CHECK(rec.consistent);
  CHECK(rec.residual <= 1e-9 * (1.0 + rhs.norm()));
  CHECK((rec.x2 - x2).norm() <= 1e-9 * (1.0 + x2.norm()));

  AlgebraicRecovery bad = recover_algebraic(sys, x1, Vec(x1dot + random_vec(5)), u);
  CHECK_FALSE(bad.consistent);
}

TEST_CASE("state-dependent coupling with several inputs is rejected") {
  StokesDaeSystem sys = random_system(4, 1, 2, true);
  sys.B2 = Mat::Ones(1, 2);
  CHECK_THROWS_AS(reduce_system(sys), ValidationError);
}

TEST_CASE("constraint block equal to a unit vector gives a trivial null basis") {
  StokesDaeSystem sys = build_fisher(FisherConfig{6, 0.1, 3.0, 30.0});
  ReducedOdeSystem red = reduce_system(sys);
  Mat expected = Mat::Zero(6, 5);
  expected.bottomRows(5) = Mat::Identity(5, 5);
  CHECK((red.projectors.Theta_r - expected).norm() <= 1e-12);
}
