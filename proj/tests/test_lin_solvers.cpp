#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "daekron/lin_solvers.hpp"

using namespace daekron;

namespace {

std::mt19937_64 rng(777);

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

Mat stable_mat(Index n) {
  Mat R = random_mat(n, n);
  return -(R * R.transpose() + Mat::Identity(n, n));
}

}  // namespace

TEST_CASE("k-way solver matches a dense factorization (standard pencil)") {
  for (int k : {1, 2, 3}) {
    Mat F = stable_mat(3);
    KWaySolver solver(F);
    Vec rhs = random_vec(ipow(3, k));
    Vec w = solver.solve(k, rhs);
    CHECK((solver.apply(k, w) - rhs).norm() <= 1e-9 * rhs.norm());

    Mat dense = build_Lk(F.transpose(), Mat::Identity(3, 3), k).assembled();
    Vec w_dense = dense.fullPivLu().solve(rhs);
    CHECK((w - w_dense).norm() <= 1e-8 * (1.0 + w_dense.norm()));
  }
}

TEST_CASE("k-way solver matches a dense factorization (generalized pencil)") {
  for (int k : {2, 3}) {
    Mat F = stable_mat(3);
    Mat E = Mat::Identity(3, 3) + 0.2 * random_mat(3, 3);
    KWaySolver solver(F, E);
    Vec rhs = random_vec(ipow(3, k));
    Vec w = solver.solve(k, rhs);
    CHECK((solver.apply(k, w) - rhs).norm() <= 1e-9 * rhs.norm());

    Mat dense = build_Lk(F.transpose(), E.transpose(), k).assembled();
    Vec w_dense = dense.fullPivLu().solve(rhs);
    CHECK((w - w_dense).norm() <= 1e-8 * (1.0 + w_dense.norm()));
  }
}

TEST_CASE("resonant spectra are rejected before solving") {
  Mat F(2, 2);
  F << 1.0, 0.0, 0.0, -1.0;  // eigenvalue sum 1 + (-1) = 0 at k = 2
  KWaySolver solver(F);
  Vec rhs = random_vec(4);
  CHECK_THROWS_MATCHES(solver.solve(2, rhs), NumericalError,
                       Catch::Matchers::MessageMatches(
                           Catch::Matchers::ContainsSubstring("resonant")));
}

TEST_CASE("Lyapunov solve returns the symmetric stabilizing solution") {
  Mat A = stable_mat(4);
  Mat Qr = random_mat(4, 4);
  Mat Q = Qr * Qr.transpose();
  Mat X = solve_lyapunov(A, Q);
  CHECK((X - X.transpose()).norm() <= 1e-12 * X.norm());
  Mat res = A.transpose() * X + X * A + Q;
  CHECK(res.norm() <= 1e-10 * (1.0 + Q.norm()));
}

TEST_CASE("future Riccati reproduces the scalar closed form") {
  Mat A = Mat::Constant(1, 1, -0.5);
  Mat B = Mat::Constant(1, 1, 1.0 / std::sqrt(2.0));
  Mat C = Mat::Constant(1, 1, -1.0 / std::sqrt(2.0));
  RiccatiSolution sol = solve_riccati_future(A, B, C, std::nullopt, 10.0);
  const double expected = (-1.0 + std::sqrt(11.0)) / 10.0;
  CHECK(std::abs(sol.W(0, 0) - expected) <= 1e-12);
  CHECK(sol.residual_norm <= 1e-12);
  CHECK(sol.closed_loop_spectrum_abscissa < 0.0);
}

TEST_CASE("past Riccati reproduces the scalar closed form") {
  Mat A = Mat::Constant(1, 1, -0.5);
  Mat B = Mat::Constant(1, 1, 1.0 / std::sqrt(2.0));
  Mat C = Mat::Constant(1, 1, -1.0 / std::sqrt(2.0));
  RiccatiSolution sol = solve_riccati_past(A, B, C, 10.0);
  const double expected = 1.0 + std::sqrt(11.0);
  CHECK(std::abs(sol.W(0, 0) - expected) <= 1e-11);
  CHECK(sol.closed_loop_spectrum_abscissa < 0.0);
}

TEST_CASE("future Riccati satisfies its residual contract on random systems") {
  Mat A = stable_mat(4);
  Mat B = random_mat(4, 2);
  Mat C = random_mat(2, 4);
  RiccatiSolution sol = solve_riccati_future(A, B, C, std::nullopt, 5.0);
  Mat res = A.transpose() * sol.W + sol.W * A + C.transpose() * C -
            5.0 * sol.W * B * B.transpose() * sol.W;
  CHECK(res.norm() <= 1e-10 * (1.0 + sol.W.norm()));
  CHECK((sol.W - sol.W.transpose()).norm() <= 1e-12 * (1.0 + sol.W.norm()));
  CHECK(sol.closed_loop_spectrum_abscissa < 0.0);
}

TEST_CASE("eta = 0 future energy reduces to the observability Lyapunov solution") {
  Mat A = stable_mat(3);
  Mat B = random_mat(3, 1);
  Mat C = random_mat(1, 3);
  RiccatiSolution sol = solve_riccati_future(A, B, C, std::nullopt, 0.0);
  Mat res = A.transpose() * sol.W + sol.W * A + C.transpose() * C;
  CHECK(res.norm() <= 1e-10 * (1.0 + sol.W.norm()));
}

TEST_CASE("mass-weighted future Riccati equals the normalized solve") {
  Mat A = stable_mat(3);
  Mat B = random_mat(3, 1);
  Mat C = random_mat(1, 3);
  // Mass-like, well-conditioned, nonsymmetric weighting.
  Mat E = Mat::Zero(3, 3);
  E.diagonal().setConstant(2.0);
  E.diagonal(1).setConstant(0.5);
  E.diagonal(-1).setConstant(0.3);
  RiccatiSolution sol = solve_riccati_future(A, B, C, E, 4.0);

  Mat Einv = E.inverse();
  RiccatiSolution bar = solve_riccati_future(Mat(Einv * A), Mat(Einv * B), C, std::nullopt, 4.0);
  Mat expected = Einv.transpose() * bar.W * Einv;
  CHECK((sol.W - expected).norm() <= 1e-9 * (1.0 + expected.norm()));

  Mat res = A.transpose() * sol.W * E + E.transpose() * sol.W * A + C.transpose() * C -
            4.0 * E.transpose() * sol.W * B * B.transpose() * sol.W * E;
  CHECK(res.norm() <= 1e-9 * (1.0 + sol.W.norm()));
}

TEST_CASE("past Riccati with zero output weight returns the antistabilizing branch") {
  // Scalar: A = -1/2, b = 1/sqrt(2): V = 2 makes A + b b^T V = +1/2 antistable.
  Mat A = Mat::Constant(1, 1, -0.5);
  Mat B = Mat::Constant(1, 1, 1.0 / std::sqrt(2.0));
  Mat C = Mat::Zero(1, 1);
  RiccatiSolution sol = solve_riccati_past(A, B, C, 10.0);
  CHECK(std::abs(sol.W(0, 0) - 2.0) <= 1e-11);
  CHECK(sol.closed_loop_spectrum_abscissa < 0.0);  // -(A + B B^T V) Hurwitz

  // V = 0 also satisfies the degenerate equation; the solver must prefer the
  // branch with the antistability post-condition rather than the trivial one.
  Mat zero_res = A.transpose() * Mat::Zero(1, 1) + Mat::Zero(1, 1) * A;
  CHECK(zero_res.norm() == 0.0);
  CHECK(sol.W(0, 0) != 0.0);

  Mat A2 = stable_mat(3);
  Mat B2 = random_mat(3, 1);
  RiccatiSolution deg = solve_riccati_past(A2, B2, Mat::Zero(1, 3), 7.0);
  Mat res = A2.transpose() * deg.W + deg.W * A2 + deg.W * B2 * B2.transpose() * deg.W;
  CHECK(res.norm() <= 1e-9 * (1.0 + deg.W.norm()));
  Eigen::EigenSolver<Mat> es(Mat(A2 + B2 * B2.transpose() * deg.W));
  CHECK(es.eigenvalues().real().minCoeff() > 0.0);
}

TEST_CASE("unstabilizable pairs are reported, not silently accepted") {
  Mat A = Mat::Constant(1, 1, 1.0);
  Mat B = Mat::Zero(1, 1);
  Mat C = Mat::Constant(1, 1, 1.0);
  CHECK_THROWS_AS(solve_riccati_future(A, B, C, std::nullopt, 1.0), NumericalError);
}

TEST_CASE("solve_kway wrapper round-trips through the operator") {
  Mat F = stable_mat(2);
  Mat E = Mat::Identity(2, 2) + 0.1 * random_mat(2, 2);
  Vec rhs = random_vec(8);
  Vec w = solve_kway(F, E, 3, rhs);
  CHECK((apply_Lk(F.transpose(), E.transpose(), 3, w) - rhs).norm() <= 1e-9 * rhs.norm());
}
