#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "daekron/benchmarks.hpp"
#include "daekron/energy_coeffs.hpp"
#include "daekron/feedback_sim.hpp"

using namespace daekron;

namespace {

std::vector<double> unstable_generalized_eigs(const Mat& A, const Mat& E) {
  Eigen::GeneralizedEigenSolver<Mat> ges(A, E);
  std::vector<double> out;
  for (Index i = 0; i < ges.alphas().size(); ++i) {
    const std::complex<double> lam =
        std::complex<double>(ges.alphas()(i)) / ges.betas()(i);
    if (lam.real() > 0.0) out.push_back(lam.real());
  }
  std::sort(out.begin(), out.end(), std::greater<>());
  return out;
}

}  // namespace

TEST_CASE("two-state constrained example has the documented matrices") {
  StokesDaeSystem sys = build_scalar_example();
  CHECK(sys.E11.isIdentity(0.0));
  CHECK(sys.A11(0, 0) == 1.0);
  CHECK(sys.A11(1, 1) == -2.0);
  CHECK(sys.A11(0, 1) == 0.0);
  CHECK(sys.A12(0, 0) == 1.0);
  CHECK(sys.A12(1, 0) == 1.0);
  Vec n_row0(4);
  n_row0 << 0.5, -1.0, -1.0, 0.5;
  CHECK((sys.N.row(0).transpose() - n_row0).norm() == 0.0);
  CHECK(sys.N.row(1).norm() == 0.0);
  CHECK(sys.B1(0, 0) == 1.0);
  CHECK(sys.B1(1, 0) == 0.0);
  CHECK(sys.B2(0, 0) == 0.0);
  CHECK(sys.C1(0, 0) == 0.0);
  CHECK(sys.C1(0, 1) == 1.0);
}

TEST_CASE("FEM assembly validates its configuration") {
  CHECK_THROWS_AS(build_fisher(FisherConfig{1, 0.1, 3.0, 30.0}), ValidationError);
  CHECK_THROWS_AS(build_fisher(FisherConfig{16, 0.0, 3.0, 30.0}), ValidationError);
  CHECK_THROWS_AS(build_fisher(FisherConfig{16, -0.1, 3.0, 30.0}), ValidationError);
}

TEST_CASE("FEM mass and stiffness matrices carry the hat-function stencil") {
  FisherConfig cfg = fisher_case1_config();
  StokesDaeSystem sys = build_fisher(cfg);
  const int n = cfg.Ne;
  const double h = 1.0 / cfg.Ne;
  REQUIRE(sys.E11.rows() == n);
  const Mat& M = sys.E11;
  Mat K = (cfg.beta * M - sys.A11) / cfg.alpha;

  CHECK(M(0, 0) == Catch::Approx(h / 3.0).epsilon(1e-14));
  CHECK(K(0, 0) == Catch::Approx(1.0 / h).epsilon(1e-14));
  for (int j = 1; j < n; ++j) {
    CHECK(M(j, j) == Catch::Approx(2.0 * h / 3.0).epsilon(1e-14));
    CHECK(K(j, j) == Catch::Approx(2.0 / h).epsilon(1e-14));
  }
  for (int j = 0; j + 1 < n; ++j) {
    CHECK(M(j, j + 1) == Catch::Approx(h / 6.0).epsilon(1e-14));
    CHECK(M(j + 1, j) == Catch::Approx(h / 6.0).epsilon(1e-14));
    CHECK(K(j, j + 1) == Catch::Approx(-1.0 / h).epsilon(1e-14));
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (std::abs(i - j) > 1) {
        CHECK(M(i, j) == 0.0);
        CHECK(K(i, j) == 0.0);
      }

  CHECK(Eigen::LLT<Mat>(M).info() == Eigen::Success);
  Eigen::SelfAdjointEigenSolver<Mat> kes(K);
  CHECK(kes.eigenvalues().minCoeff() > 0.0);  // Dirichlet end removes the kernel

  CHECK(sys.A12.rows() == n);
  CHECK(sys.A12(0, 0) == 1.0);
  CHECK(sys.A12.bottomRows(n - 1).norm() == 0.0);
  CHECK(sys.B2(0, 0) == -1.0);
  CHECK((sys.C1.array() == 1.0 / cfg.Ne).all());
  CHECK(sys.B1.norm() == 0.0);
}

TEST_CASE("FEM quadratic term equals the Galerkin integral of w^2") {
  // Independent evaluation: composite two-point Gauss quadrature of
  // -beta int phi_i w_h^2 over every element (exact for the cubic integrand).
  FisherConfig cfg = fisher_case1_config();
  StokesDaeSystem sys = build_fisher(cfg);
  const int n = cfg.Ne;
  const double h = 1.0 / cfg.Ne;

  std::mt19937_64 rng(31);
  Vec x(n);
  for (int j = 0; j < n; ++j)
    x(j) = static_cast<double>(rng() >> 11) * 0x1.0p-52 - 0.5;

  Vec quad = Vec::Zero(n);
  const double gp[2] = {0.5 - 0.5 / std::sqrt(3.0), 0.5 + 0.5 / std::sqrt(3.0)};
  for (int e = 0; e < cfg.Ne; ++e) {
    const int g[2] = {e, e + 1};
    for (double t : gp) {
      const double shape[2] = {1.0 - t, t};
      double w = 0.0;
      for (int a = 0; a < 2; ++a)
        if (g[a] < n) w += x(g[a]) * shape[a];
      for (int a = 0; a < 2; ++a)
        if (g[a] < n) quad(g[a]) += -cfg.beta * 0.5 * h * shape[a] * w * w;
    }
  }
  Vec via_n = sys.N * kron_vec(x, x);
  CHECK((via_n - quad).norm() <= 1e-12 * (1.0 + quad.norm()));
}

TEST_CASE("reaction-diffusion pencil has the documented unstable spectrum") {
  FisherConfig cfg = fisher_case1_config();
  StokesDaeSystem sys = build_fisher(cfg);
  // Free plant (natural condition at the controlled end): two unstable modes.
  std::vector<double> full = unstable_generalized_eigs(sys.A11, sys.E11);
  REQUIRE(full.size() == 2);
  CHECK(full[0] == Catch::Approx(2.75306164706).epsilon(1e-9));
  CHECK(full[1] == Catch::Approx(0.7632404849).epsilon(1e-9));

  // Constrained flow (boundary value pinned by the constraint): one remains.
  ReducedOdeSystem red = reduce_system(sys);
  REQUIRE(red.A_d.rows() == 15);
  std::vector<double> reduced = unstable_generalized_eigs(red.A_d, red.E_d);
  REQUIRE(reduced.size() == 1);
  CHECK(reduced[0] == Catch::Approx(2.00986463216).epsilon(1e-9));
}

TEST_CASE("boundary-controlled reduction exposes the feedthrough and input shift") {
  StokesDaeSystem sys = build_fisher(fisher_case1_config());
  ReducedOdeSystem red = reduce_system(sys);
  REQUIRE(red.D_d.size() == 1);
  CHECK(red.D_d(0, 0) == Catch::Approx(0.0492921958866982).margin(1e-12));
  REQUIRE(red.s_d.size() > 0);
  CHECK(red.s_d(0, 0) == Catch::Approx(-0.013461894323342).margin(1e-12));
  // Boundary control couples into the dynamics: the reduced system carries
  // a state-dependent input slope.
  CHECK(red.G_lin.size() > 0);
  CHECK(red.G_lin.norm() > 0.0);
  NormalizedSystem ns = NormalizedSystem::from_reduced(red);
  CHECK(ns.has_coupling());
}

TEST_CASE("first Fisher case reproduces the frozen energy expansion") {
  StokesDaeSystem sys = build_fisher(fisher_case1_config());
  ReducedOdeSystem red = reduce_system(sys);
  EnergyPolynomial poly = compute_future_energy(red, 30.0, 4);
  CHECK(poly.coeffs.at(2)(0) == Catch::Approx(0.000281280927283679).epsilon(1e-9));
  CHECK(poly.coeffs.at(2).norm() == Catch::Approx(0.0435413431049).epsilon(1e-9));
  CHECK(poly.coeffs.at(3).norm() == Catch::Approx(0.101621436271).epsilon(1e-9));
  CHECK(poly.coeffs.at(4).norm() == Catch::Approx(0.255602593144).epsilon(1e-9));

  Vec x0 = fisher_case1_initial_condition();
  const double values[] = {0.00372864416474, 0.00674106571029, 0.00949461350653};
  for (int d = 1; d <= 3; ++d)
    CHECK(eval_energy(poly.truncated(d + 1), x0) ==
          Catch::Approx(values[d - 1]).epsilon(1e-9));
}

TEST_CASE("printed initial condition matches the published vector") {
  Vec x0 = fisher_case1_initial_condition();
  REQUIRE(x0.size() == 15);
  CHECK(x0(0) == -0.06);
  CHECK(x0(1) == -0.47);
  CHECK(x0(7) == 0.12);
  CHECK(x0(14) == -0.32);
}

TEST_CASE("case configurations differ only in the reaction weight") {
  FisherConfig c1 = fisher_case1_config();
  FisherConfig c2 = fisher_case2_config();
  CHECK(c1.Ne == 16);
  CHECK(c2.Ne == 16);
  CHECK(c1.alpha == 0.1);
  CHECK(c2.alpha == 0.1);
  CHECK(c1.beta == 3.0);
  CHECK(c2.beta == 1.0);
  CHECK(c1.eta == 30.0);
  CHECK(c2.eta == 30.0);
}
