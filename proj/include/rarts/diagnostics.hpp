#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "rarts/objective.hpp"
#include "rarts/solvers.hpp"

namespace rarts {

// Step-size bounds from the descent analysis:
//   c1 = 1/2 * [L1/2 + beta/2 + (1+lambda)*L3/2]^-1   (bound on eta_y)
//   c2 = 1/2 * [L2/2 + beta/2 + (1+lambda)*L3/2]^-1   (bound on eta_w)
//   c3 = 1/((1+lambda)*L3)                            (bound on eta_alpha)
// with L1, L2 the Lipschitz constants of grad L_val and grad L_train and
// L3 = max(L1, L2).
struct StepSizeBounds {
  double L1, L2, L3;
  double c1, c2, c3;
};

inline StepSizeBounds step_size_bounds(double L1, double L2, const HyperParams& hp) {
  if (!(L1 > 0.0 && L2 > 0.0))
    throw std::invalid_argument("step_size_bounds: Lipschitz constants must be > 0");
  StepSizeBounds b;
  b.L1 = L1;
  b.L2 = L2;
  b.L3 = std::max(L1, L2);
  const double shared = 0.5 * hp.beta + 0.5 * (1.0 + hp.lambda) * b.L3;
  b.c1 = 0.5 / (0.5 * L1 + shared);
  b.c2 = 0.5 / (0.5 * L2 + shared);
  b.c3 = 1.0 / ((1.0 + hp.lambda) * b.L3);
  return b;
}

// Axis-aligned sampling box for Lipschitz estimation.
struct Box {
  double lo = -2.0;
  double hi = 2.0;
};

// Sampled lower bound on the Lipschitz constants of grad L_val (over (y, alpha))
// and grad L_train (over (w, alpha)): the max observed ratio
// ||grad(z) - grad(z')|| / ||z - z'|| over uniformly drawn point pairs.
inline std::pair<double, double> estimate_lipschitz(
    const BilevelObjective& obj, const ParamVector& var_proto,
    const ParamVector& alpha_proto, const Box& box, int n_samples,
    std::uint64_t seed) {
  if (n_samples < 2)
    throw std::invalid_argument("estimate_lipschitz: n_samples must be >= 2");
  if (!(box.hi > box.lo))
    throw std::invalid_argument("estimate_lipschitz: degenerate box");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(box.lo, box.hi);
  auto draw = [&](const ParamVector& proto) {
    ParamVector p = proto;
    for (double& v : p.values()) v = u(rng);
    return p;
  };

  double L1 = 0.0, L2 = 0.0;
  for (int i = 0; i < n_samples; ++i) {
    ParamVector v1 = draw(var_proto), v2 = draw(var_proto);
    ParamVector a1 = draw(alpha_proto), a2 = draw(alpha_proto);
    double dz = std::sqrt(distance(v1, v2) * distance(v1, v2) +
                          distance(a1, a2) * distance(a1, a2));
    if (dz < 1e-12) continue;

    ParamVector gv1 = obj.grad_y_val(v1, a1), gv2 = obj.grad_y_val(v2, a2);
    ParamVector ga1 = obj.grad_alpha_val(v1, a1), ga2 = obj.grad_alpha_val(v2, a2);
    double dg = std::sqrt(distance(gv1, gv2) * distance(gv1, gv2) +
                          distance(ga1, ga2) * distance(ga1, ga2));
    L1 = std::max(L1, dg / dz);

    ParamVector gt1 = obj.grad_w_train(v1, a1), gt2 = obj.grad_w_train(v2, a2);
    ParamVector gat1 = obj.grad_alpha_train(v1, a1),
                gat2 = obj.grad_alpha_train(v2, a2);
    dg = std::sqrt(distance(gt1, gt2) * distance(gt1, gt2) +
                   distance(gat1, gat2) * distance(gat1, gat2));
    L2 = std::max(L2, dg / dz);
  }
  return {L1, L2};
}

struct DescentViolation {
  std::int64_t t;
  double before;
  double after;
};

// Scans a per-step trajectory for increases of the Lagrangian. Requires
// log_every = 1 logging; a gap in step numbers is an error since descent
// cannot be certified across unlogged steps.
inline std::vector<DescentViolation> descent_check(const Trajectory& traj,
                                                   double slack = 1e-12) {
  std::vector<DescentViolation> out;
  for (std::size_t i = 1; i < traj.size(); ++i) {
    if (traj[i].t != traj[i - 1].t + 1)
      throw std::invalid_argument(
          "descent_check: trajectory has gaps (log_every must be 1)");
    if (traj[i].lagrangian > traj[i - 1].lagrangian + slack)
      out.push_back({traj[i - 1].t, traj[i - 1].lagrangian, traj[i].lagrangian});
  }
  return out;
}

// Norms of the three stationarity residuals:
//   r_w     = ||lambda*grad_w L_train(w, a) + beta*(w - y)||
//   r_y     = ||grad_y L_val(y, a) + beta*(y - w)||
//   r_alpha = ||lambda*grad_a L_train(w, a) + grad_a L_val(y, a)||
struct EquilibriumResidual {
  double r_w, r_y, r_alpha;
  double max() const { return std::max({r_w, r_y, r_alpha}); }
};

inline EquilibriumResidual equilibrium_residual(const BilevelObjective& obj,
                                                const SearchState& s,
                                                const HyperParams& hp) {
  EquilibriumResidual r;
  ParamVector rw = obj.grad_w_train(s.w, s.alpha);
  for (double& v : rw.values()) v *= hp.lambda;
  rw.axpy(hp.beta, s.w - s.y);
  r.r_w = rw.norm();

  ParamVector ry = obj.grad_y_val(s.y, s.alpha);
  ry.axpy(hp.beta, s.y - s.w);
  r.r_y = ry.norm();

  ParamVector ra = obj.grad_alpha_train(s.w, s.alpha);
  for (double& v : ra.values()) v *= hp.lambda;
  ra.axpy(1.0, obj.grad_alpha_val(s.y, s.alpha));
  r.r_alpha = ra.norm();
  return r;
}

struct QuadraticEquilibrium {
  double alpha_bar, w_bar, y_bar;
};

// Closed form from the published equilibrium analysis of the quadratic model:
//   alpha_bar = 4*lambda/(4*lambda - 1)
//   w_bar     = (4*lambda - 2)/(4*lambda - 1)
//   y_bar     = w_bar - alpha_bar/beta
// (y_bar solves alpha_bar + beta*(y_bar - w_bar) = 0 exactly.)
//
// Caveat, surfaced rather than silently resolved: this closed form drops
// the y-vs-w distinction in the alpha equation, so its r_alpha residual
// under equilibrium_residual is alpha_bar/beta, not zero. The exact fixed
// point of the iteration is quadratic_fixed_point below. See README.
inline QuadraticEquilibrium quadratic_equilibrium(double lambda, double beta) {
  if (lambda == 0.0 || lambda == 0.25)
    throw std::invalid_argument(
        "quadratic_equilibrium: non-unique solution at lambda in {0, 1/4}");
  if (!(beta > 0.0))
    throw std::invalid_argument("quadratic_equilibrium: y_bar undefined at beta = 0");
  QuadraticEquilibrium q;
  q.alpha_bar = 4.0 * lambda / (4.0 * lambda - 1.0);
  q.w_bar = (4.0 * lambda - 2.0) / (4.0 * lambda - 1.0);
  q.y_bar = q.w_bar - q.alpha_bar / beta;
  return q;
}

// Exact solution of the full stationarity system for the quadratic model,
// keeping grad_alpha L_val evaluated at y_bar:
//   2*lambda*(w - a) + a = 0
//   a + beta*(y - w) = 0
//   2*lambda*(a - w) + y - 2 = 0
// => a = 4*lambda*beta / (beta*(4*lambda - 1) - 2*lambda), w = (2l-1)/(2l)*a,
//    y = w - a/beta. All three residuals vanish here, and it is the point
// the iteration actually converges to.
inline QuadraticEquilibrium quadratic_fixed_point(double lambda, double beta) {
  if (!(beta > 0.0))
    throw std::invalid_argument("quadratic_fixed_point: beta must be > 0");
  if (lambda == 0.0)
    throw std::invalid_argument("quadratic_fixed_point: lambda must be nonzero");
  const double denom = beta * (4.0 * lambda - 1.0) - 2.0 * lambda;
  if (denom == 0.0)
    throw std::invalid_argument("quadratic_fixed_point: degenerate (lambda, beta)");
  QuadraticEquilibrium q;
  q.alpha_bar = 4.0 * lambda * beta / denom;
  q.w_bar = (2.0 * lambda - 1.0) / (2.0 * lambda) * q.alpha_bar;
  q.y_bar = q.w_bar - q.alpha_bar / beta;
  return q;
}

}  // namespace rarts
