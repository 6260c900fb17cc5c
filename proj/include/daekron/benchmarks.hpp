#pragma once

// Built-in test systems: a two-state constrained scalar example with an
// analytic reduction, and a piecewise-linear FEM discretization of the 1D
// Fisher equation with Dirichlet boundary control entering through the
// constraint block.

#include <vector>

#include "daekron/dae_reduction.hpp"
#include "daekron/types.hpp"

namespace daekron {

// Two differential states, one constraint; reduces to a single-state
// quadratic ODE with E_d = 1, A_d = -1/2, N_d = 3/(2 sqrt 2), b = 1/sqrt 2,
// C_d = -1/sqrt 2 in the deterministic null-space basis.
inline StokesDaeSystem build_scalar_example() {
  StokesDaeSystem sys;
  sys.E11 = Mat::Identity(2, 2);
  sys.A11 = Mat::Zero(2, 2);
  sys.A11(0, 0) = 1.0;
  sys.A11(1, 1) = -2.0;
  sys.A12 = Mat::Zero(2, 1);
  sys.A12 << 1.0, 1.0;
  sys.N = Mat::Zero(2, 4);
  sys.N.row(0) << 0.5, -1.0, -1.0, 0.5;
  sys.B1 = Mat::Zero(2, 1);
  sys.B1(0, 0) = 1.0;
  sys.B2 = Mat::Zero(1, 1);
  sys.C1 = Mat::Zero(1, 2);
  sys.C1(0, 1) = 1.0;
  return sys;
}

struct FisherConfig {
  int Ne = 16;         // uniform elements on [0, 1]
  double alpha = 0.1;  // diffusion coefficient
  double beta = 3.0;   // reaction coefficient
  double eta = 30.0;   // cost weight
};

// Galerkin matrices for w_t = alpha w_xx + beta (w - w^2) on [0, 1] with
// w(t, 1) = 0 and controlled inflow value w(t, 0) = u(t).  Node j sits at
// xi = j h, j = 0..Ne-1, h = 1/Ne; the right boundary node is eliminated.
// The control enters through the constraint row e1^T x1 - u = 0, so
// A12 = e1 and B2 = -1.
inline StokesDaeSystem build_fisher(const FisherConfig& cfg) {
  if (cfg.Ne < 2) throw ValidationError("build_fisher: need at least two elements");
  if (!(cfg.alpha > 0.0)) throw ValidationError("build_fisher: diffusion must be positive");
  const int n = cfg.Ne;
  const double h = 1.0 / cfg.Ne;

  Mat M = Mat::Zero(n, n);
  Mat K = Mat::Zero(n, n);
  Mat N = Mat::Zero(n, static_cast<Index>(n) * n);

  // Per-element exact integrals of hat-function products; global indices at
  // or past the eliminated right boundary node are skipped.
  for (int e = 0; e < cfg.Ne; ++e) {
    const int g[2] = {e, e + 1};
    for (int a = 0; a < 2; ++a) {
      if (g[a] >= n) continue;
      for (int b = 0; b < 2; ++b) {
        if (g[b] >= n) continue;
        M(g[a], g[b]) += a == b ? h / 3.0 : h / 6.0;
        K(g[a], g[b]) += a == b ? 1.0 / h : -1.0 / h;
        for (int c = 0; c < 2; ++c) {
          if (g[c] >= n) continue;
          const double val = (a == b && b == c) ? h / 4.0 : h / 12.0;
          N(g[a], static_cast<Index>(g[b]) * n + g[c]) += -cfg.beta * val;
        }
      }
    }
  }

  StokesDaeSystem sys;
  sys.E11 = M;
  sys.A11 = -cfg.alpha * K + cfg.beta * M;
  sys.A12 = Mat::Zero(n, 1);
  sys.A12(0, 0) = 1.0;
  sys.N = N;
  sys.B1 = Mat::Zero(n, 1);
  sys.B2 = Mat::Zero(1, 1);
  sys.B2(0, 0) = -1.0;
  sys.C1 = Mat::Constant(1, n, 1.0 / cfg.Ne);
  return sys;
}

// The printed 15-component random initial condition used by the first Fisher
// case (Ne = 16), given in the reduced coordinates.
inline Vec fisher_case1_initial_condition() {
  Vec x(15);
  x << -0.06, -0.47, 0.05, -0.06, -0.08, -0.17, -0.30, 0.12, -0.20, -0.23, 0.12, 0.03, -0.37,
      0.01, -0.32;
  return x;
}

inline FisherConfig fisher_case1_config() { return FisherConfig{16, 0.1, 3.0, 30.0}; }
inline FisherConfig fisher_case2_config() { return FisherConfig{16, 0.1, 1.0, 30.0}; }

}  // namespace daekron
