#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rarts/objective.hpp"
#include "rarts/param_vector.hpp"

namespace rarts {

enum class SolverKind { Rarts, Darts1, Darts2, Milenas };

inline const char* to_string(SolverKind k) {
  switch (k) {
    case SolverKind::Rarts: return "rarts";
    case SolverKind::Darts1: return "darts1";
    case SolverKind::Darts2: return "darts2";
    case SolverKind::Milenas: return "milenas";
  }
  return "?";
}

inline SolverKind solver_from_string(const std::string& s) {
  if (s == "rarts") return SolverKind::Rarts;
  if (s == "darts1") return SolverKind::Darts1;
  if (s == "darts2") return SolverKind::Darts2;
  if (s == "milenas") return SolverKind::Milenas;
  throw std::invalid_argument("unknown solver kind '" + s + "'");
}

// Iterate triple (w, y, alpha) plus step counter.
struct SearchState {
  ParamVector w;
  ParamVector y;
  ParamVector alpha;
  std::int64_t t = 0;

  void validate() const {
    if (!w.shape_compatible(y))
      throw std::invalid_argument("SearchState: w and y are not shape-compatible");
  }
};

struct DivergedError : std::runtime_error {
  SearchState last;
  DivergedError(std::string msg, SearchState s)
      : std::runtime_error(std::move(msg)), last(std::move(s)) {}
};

struct NonFiniteGradientError : std::runtime_error {
  NonFiniteGradientError(const std::string& var, std::int64_t step)
      : std::runtime_error("non-finite gradient for '" + var + "' at step " +
                           std::to_string(step)) {}
};

struct TrajectoryRecord {
  std::int64_t t;
  ParamVector alpha, w, y;
  double l_train, l_val, lagrangian;
  double gnorm_w, gnorm_y, gnorm_alpha;
};

using Trajectory = std::vector<TrajectoryRecord>;

struct StopRule {
  std::int64_t max_steps = 10000;
  double grad_tol = 0.0;
  double divergence_bound = 1e6;

  void validate() const {
    if (max_steps < 1) throw std::invalid_argument("StopRule: max_steps must be >= 1");
    if (grad_tol < 0.0) throw std::invalid_argument("StopRule: grad_tol must be >= 0");
  }
};

// Learning-rate schedule: multiplies the base rates at step t. Must tend to
// a strictly positive limit; the default is the constant schedule.
using RateSchedule = std::function<double(std::int64_t)>;

inline RateSchedule constant_schedule() {
  return [](std::int64_t) { return 1.0; };
}

// Cosine decay from 1 to `floor` over `horizon` steps, then held at floor.
// The floor must be strictly positive.
inline RateSchedule cosine_to_floor_schedule(double floor, std::int64_t horizon) {
  if (!(floor > 0.0))
    throw std::invalid_argument("cosine_to_floor_schedule: floor must be > 0");
  if (horizon < 1)
    throw std::invalid_argument("cosine_to_floor_schedule: horizon must be >= 1");
  return [floor, horizon](std::int64_t t) {
    if (t >= horizon) return floor;
    const double c = 0.5 * (1.0 + std::cos(3.14159265358979323846 * (double)t /
                                           (double)horizon));
    return floor + (1.0 - floor) * c;
  };
}

namespace detail {
inline void check_finite(const ParamVector& g, const char* var, std::int64_t t) {
  if (!g.all_finite()) throw NonFiniteGradientError(var, t);
}
}  // namespace detail

// One Gauss-Seidel sweep of the relaxed iteration: each update uses the
// freshest values of the variables updated before it in the same sweep.
//   w+ = w - lambda*eta_w*grad_w L_train(w, a) - beta*eta_w*(w - y)
//   y+ = y - eta_y*grad_y L_val(y, a) - beta*eta_y*(y - w+)
//   a+ = a - lambda*eta_a*grad_a L_train(w+, a) - eta_a*grad_a L_val(y+, a)
inline SearchState rarts_step(const SearchState& s, const BilevelObjective& obj,
                              const HyperParams& hp, double rate_scale = 1.0) {
  s.validate();
  hp.validate();
  const double ew = hp.eta_w * rate_scale;
  const double ey = hp.eta_y * rate_scale;
  const double ea = hp.eta_alpha * rate_scale;

  SearchState n = s;
  ParamVector gw = obj.grad_w_train(s.w, s.alpha);
  detail::check_finite(gw, "w", s.t);
  n.w.axpy(-hp.lambda * ew, gw);
  n.w.axpy(-hp.beta * ew, s.w - s.y);

  ParamVector gy = obj.grad_y_val(s.y, s.alpha);
  detail::check_finite(gy, "y", s.t);
  n.y.axpy(-ey, gy);
  n.y.axpy(-hp.beta * ey, s.y - n.w);

  ParamVector gat = obj.grad_alpha_train(n.w, s.alpha);
  ParamVector gav = obj.grad_alpha_val(n.y, s.alpha);
  detail::check_finite(gat, "alpha", s.t);
  detail::check_finite(gav, "alpha", s.t);
  n.alpha.axpy(-hp.lambda * ea, gat);
  n.alpha.axpy(-ea, gav);

  n.t = s.t + 1;
  return n;
}

// First-order DARTS: y is carried unchanged.
inline SearchState darts1_step(const SearchState& s, const BilevelObjective& obj,
                               const HyperParams& hp, double rate_scale = 1.0) {
  s.validate();
  hp.validate();
  SearchState n = s;
  ParamVector gw = obj.grad_w_train(s.w, s.alpha);
  detail::check_finite(gw, "w", s.t);
  n.w.axpy(-hp.eta_w * rate_scale, gw);

  ParamVector ga = obj.grad_alpha_val(n.w, s.alpha);
  detail::check_finite(ga, "alpha", s.t);
  n.alpha.axpy(-hp.eta_alpha * rate_scale, ga);

  n.t = s.t + 1;
  return n;
}

// Where darts2_step evaluates grad_w L_train for the virtual step:
// at the post-update weights (default) or the pre-update weights.
enum class VirtualStepPoint { PostUpdate, PreUpdate };

// Second-order DARTS with the virtual step w' = w - xi*grad_w L_train and
// the mixed-derivative correction on the alpha direction. Uses the
// objective's exact mixed-derivative apply when available, else a central
// finite difference with scale-free epsilon.
inline SearchState darts2_step(const SearchState& s, const BilevelObjective& obj,
                               const HyperParams& hp, double rate_scale = 1.0,
                               VirtualStepPoint vsp = VirtualStepPoint::PostUpdate) {
  s.validate();
  hp.validate();
  if (!(hp.xi > 0.0))
    throw std::invalid_argument("darts2_step: xi must be > 0 (xi = 0 is darts1)");

  SearchState n = s;
  ParamVector gw = obj.grad_w_train(s.w, s.alpha);
  detail::check_finite(gw, "w", s.t);
  n.w.axpy(-hp.eta_w * rate_scale, gw);

  const ParamVector& wbase = vsp == VirtualStepPoint::PostUpdate ? n.w : s.w;
  ParamVector gv = obj.grad_w_train(wbase, s.alpha);
  ParamVector wprime = wbase;
  wprime.axpy(-hp.xi, gv);

  ParamVector gprime = obj.grad_y_val(wprime, s.alpha);
  ParamVector direction = obj.grad_alpha_val(wprime, s.alpha);

  ParamVector mixed = s.alpha.zeros_like();
  if (obj.has_mixed_train_apply()) {
    mixed = obj.mixed_train_apply(n.w, s.alpha, gprime);
  } else {
    const double eps = hp.fd_epsilon_scale / std::max(gprime.norm(), 1e-12);
    ParamVector wp = n.w, wm = n.w;
    wp.axpy(eps, gprime);
    wm.axpy(-eps, gprime);
    mixed = obj.grad_alpha_train(wp, s.alpha) - obj.grad_alpha_train(wm, s.alpha);
    for (double& v : mixed.values()) v /= 2.0 * eps;
  }
  direction.axpy(-hp.xi, mixed);
  detail::check_finite(direction, "alpha", s.t);
  n.alpha.axpy(-hp.eta_alpha * rate_scale, direction);

  n.t = s.t + 1;
  return n;
}

// MiLeNAS reduction: beta = 0, no y variable, alpha direction mixes both
// losses at the updated weights.
inline SearchState milenas_step(const SearchState& s, const BilevelObjective& obj,
                                const HyperParams& hp, double rate_scale = 1.0) {
  s.validate();
  hp.validate();
  SearchState n = s;
  ParamVector gw = obj.grad_w_train(s.w, s.alpha);
  detail::check_finite(gw, "w", s.t);
  n.w.axpy(-hp.lambda * hp.eta_w * rate_scale, gw);

  ParamVector gat = obj.grad_alpha_train(n.w, s.alpha);
  ParamVector gav = obj.grad_alpha_val(n.w, s.alpha);
  detail::check_finite(gat, "alpha", s.t);
  detail::check_finite(gav, "alpha", s.t);
  n.alpha.axpy(-hp.lambda * hp.eta_alpha * rate_scale, gat);
  n.alpha.axpy(-hp.eta_alpha * rate_scale, gav);

  n.t = s.t + 1;
  return n;
}

inline SearchState solver_step(SolverKind kind, const SearchState& s,
                               const BilevelObjective& obj, const HyperParams& hp,
                               double rate_scale = 1.0,
                               VirtualStepPoint vsp = VirtualStepPoint::PostUpdate) {
  switch (kind) {
    case SolverKind::Rarts: return rarts_step(s, obj, hp, rate_scale);
    case SolverKind::Darts1: return darts1_step(s, obj, hp, rate_scale);
    case SolverKind::Darts2: return darts2_step(s, obj, hp, rate_scale, vsp);
    case SolverKind::Milenas: return milenas_step(s, obj, hp, rate_scale);
  }
  throw std::logic_error("unreachable solver kind");
}

struct RunOptions {
  RateSchedule schedule = constant_schedule();
  VirtualStepPoint virtual_step_point = VirtualStepPoint::PostUpdate;
};

namespace detail {
inline TrajectoryRecord make_record(const SearchState& s, const BilevelObjective& obj,
                                    const HyperParams& hp) {
  TrajectoryRecord r;
  r.t = s.t;
  r.alpha = s.alpha;
  r.w = s.w;
  r.y = s.y;
  r.l_train = obj.eval_train(s.w, s.alpha);
  r.l_val = obj.eval_val(s.y, s.alpha);
  r.lagrangian = eval_lagrangian(obj, s.y, s.w, s.alpha, hp);
  r.gnorm_w = obj.grad_w_train(s.w, s.alpha).norm();
  r.gnorm_y = obj.grad_y_val(s.y, s.alpha).norm();
  r.gnorm_alpha = obj.grad_alpha_train(s.w, s.alpha).norm();
  return r;
}
}  // namespace detail

// Iterates the chosen step rule until the stop rule fires. Logs every
// `log_every` steps plus the initial and final states. Throws DivergedError
// when an iterate norm exceeds the divergence bound.
inline Trajectory run(SolverKind kind, const BilevelObjective& obj,
                      SearchState init, const HyperParams& hp, const StopRule& stop,
                      std::int64_t log_every = 1, const RunOptions& opts = {}) {
  stop.validate();
  hp.validate();
  init.validate();
  if (log_every < 1) throw std::invalid_argument("run: log_every must be >= 1");

  Trajectory traj;
  SearchState s = std::move(init);
  traj.push_back(detail::make_record(s, obj, hp));

  for (std::int64_t i = 0; i < stop.max_steps; ++i) {
    const SearchState prev = s;
    s = solver_step(kind, s, obj, hp, opts.schedule(s.t), opts.virtual_step_point);

    if (s.w.max_abs() > stop.divergence_bound ||
        s.y.max_abs() > stop.divergence_bound ||
        s.alpha.max_abs() > stop.divergence_bound)
      throw DivergedError("iterate exceeded divergence bound at step " +
                              std::to_string(s.t),
                          prev);

    const bool last = i + 1 == stop.max_steps;
    bool converged = false;
    if (stop.grad_tol > 0.0) {
      const double dw = distance(s.w, prev.w);
      const double dy = distance(s.y, prev.y);
      const double da = distance(s.alpha, prev.alpha);
      converged = dw < stop.grad_tol && dy < stop.grad_tol && da < stop.grad_tol;
    }
    if (s.t % log_every == 0 || last || converged)
      traj.push_back(detail::make_record(s, obj, hp));
    if (converged) break;
  }
  return traj;
}

}  // namespace rarts
