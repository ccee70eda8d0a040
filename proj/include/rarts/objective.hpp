#pragma once

#include <memory>
#include <optional>
#include <stdexcept>

#include "rarts/param_vector.hpp"

namespace rarts {

// Solver hyper-parameters: penalty weights, per-variable learning rates,
// the DARTS-2 virtual step xi and its finite-difference scale.
struct HyperParams {
  double lambda = 10.0;
  double beta = 10.0;
  double eta_w = 0.01;
  double eta_y = 0.01;
  double eta_alpha = 0.01;
  double xi = 0.01;
  double fd_epsilon_scale = 0.01;

  void validate() const {
    if (!(lambda > 0.0)) throw std::invalid_argument("HyperParams: lambda must be > 0");
    if (beta < 0.0) throw std::invalid_argument("HyperParams: beta must be >= 0");
    if (!(eta_w > 0.0 && eta_y > 0.0 && eta_alpha > 0.0))
      throw std::invalid_argument("HyperParams: learning rates must be > 0");
    if (xi < 0.0) throw std::invalid_argument("HyperParams: xi must be >= 0");
    if (!(fd_epsilon_scale > 0.0))
      throw std::invalid_argument("HyperParams: fd_epsilon_scale must be > 0");
  }
};

// Two-loss problem: a training loss in (w, alpha) and a validation loss in
// (y, alpha), exposing first-order partial gradients. The mixed-derivative
// apply is optional; solvers that do not need it must never call it.
class BilevelObjective {
 public:
  virtual ~BilevelObjective() = default;

  virtual double eval_train(const ParamVector& w, const ParamVector& alpha) const = 0;
  virtual double eval_val(const ParamVector& y, const ParamVector& alpha) const = 0;

  virtual ParamVector grad_w_train(const ParamVector& w, const ParamVector& alpha) const = 0;
  virtual ParamVector grad_alpha_train(const ParamVector& w, const ParamVector& alpha) const = 0;
  virtual ParamVector grad_y_val(const ParamVector& y, const ParamVector& alpha) const = 0;
  virtual ParamVector grad_alpha_val(const ParamVector& y, const ParamVector& alpha) const = 0;

  virtual bool has_mixed_train_apply() const { return false; }
  // Returns (d^2 L_train / d alpha d w) . v, shaped like alpha.
  virtual ParamVector mixed_train_apply(const ParamVector& /*w*/,
                                        const ParamVector& /*alpha*/,
                                        const ParamVector& /*v*/) const {
    throw std::logic_error("mixed_train_apply not provided by this objective");
  }
};

// Solvable quadratic instance:
//   L_val(y, alpha)   = alpha*y - 2*alpha + 1
//   L_train(w, alpha) = w^2 - 2*alpha*w + alpha^2
// with analytic gradients and the exact (constant) mixed derivative -2.
class QuadraticObjective : public BilevelObjective {
 public:
  double eval_train(const ParamVector& w, const ParamVector& a) const override {
    const double wv = w[0], av = a[0];
    return wv * wv - 2.0 * av * wv + av * av;
  }
  double eval_val(const ParamVector& y, const ParamVector& a) const override {
    const double yv = y[0], av = a[0];
    return av * yv - 2.0 * av + 1.0;
  }
  ParamVector grad_w_train(const ParamVector& w, const ParamVector& a) const override {
    ParamVector g = w.zeros_like();
    g[0] = 2.0 * w[0] - 2.0 * a[0];
    return g;
  }
  ParamVector grad_alpha_train(const ParamVector& w, const ParamVector& a) const override {
    ParamVector g = a.zeros_like();
    g[0] = -2.0 * w[0] + 2.0 * a[0];
    return g;
  }
  ParamVector grad_y_val(const ParamVector& y, const ParamVector& a) const override {
    ParamVector g = y.zeros_like();
    g[0] = a[0];
    return g;
  }
  ParamVector grad_alpha_val(const ParamVector& y, const ParamVector& a) const override {
    ParamVector g = y.zeros_like();
    g[0] = y[0] - 2.0;
    return g;
  }
  bool has_mixed_train_apply() const override { return true; }
  ParamVector mixed_train_apply(const ParamVector&, const ParamVector& a,
                                const ParamVector& v) const override {
    ParamVector g = a.zeros_like();
    g[0] = -2.0 * v[0];
    return g;
  }
};

inline std::shared_ptr<BilevelObjective> quadratic_objective() {
  return std::make_shared<QuadraticObjective>();
}

// Exact inner minimizer of the quadratic training loss: argmin_w L_train = alpha.
inline double inner_argmin_quadratic(double alpha) { return alpha; }

// Relaxed Lagrangian L = L_val(y, a) + lambda*L_train(w, a) + (beta/2)*||y - w||^2.
inline double eval_lagrangian(const BilevelObjective& obj, const ParamVector& y,
                              const ParamVector& w, const ParamVector& alpha,
                              const HyperParams& hp) {
  if (!y.shape_compatible(w))
    throw std::invalid_argument("eval_lagrangian: y and w are not shape-compatible");
  const double pen = distance(y, w);
  return obj.eval_val(y, alpha) + hp.lambda * obj.eval_train(w, alpha) +
         0.5 * hp.beta * pen * pen;
}

}  // namespace rarts
