#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "rarts/objective.hpp"
#include "rarts/param_vector.hpp"
#include "rarts/tape.hpp"

namespace rarts {

enum class OpType { Zero, Identity, Linear, LinearTanh, LinearRelu };

inline const char* to_string(OpType op) {
  switch (op) {
    case OpType::Zero: return "zero";
    case OpType::Identity: return "identity";
    case OpType::Linear: return "linear";
    case OpType::LinearTanh: return "linear_tanh";
    case OpType::LinearRelu: return "linear_relu";
  }
  return "?";
}

inline OpType op_from_string(const std::string& s) {
  if (s == "zero") return OpType::Zero;
  if (s == "identity") return OpType::Identity;
  if (s == "linear") return OpType::Linear;
  if (s == "linear_tanh") return OpType::LinearTanh;
  if (s == "linear_relu") return OpType::LinearRelu;
  throw std::invalid_argument("unknown op '" + s + "'");
}

inline bool op_has_weights(OpType op) {
  return op == OpType::Linear || op == OpType::LinearTanh || op == OpType::LinearRelu;
}

// Single-path cell: `depth` edges in sequence, each mixing the same op menu,
// followed by a linear head to a scalar.
struct CellSpec {
  int depth = 3;
  int feature_dim = 8;
  std::vector<OpType> op_menu = {OpType::Zero, OpType::Identity, OpType::Linear,
                                 OpType::LinearTanh, OpType::LinearRelu};

  void validate() const {
    if (depth < 1) throw std::invalid_argument("CellSpec: depth must be >= 1");
    if (feature_dim < 1) throw std::invalid_argument("CellSpec: feature_dim must be >= 1");
    if (op_menu.empty()) throw std::invalid_argument("CellSpec: empty op menu");
  }
  int menu_size() const { return (int)op_menu.size(); }
};

// One concrete op per edge (index into the cell's op menu).
struct DiscreteCell {
  CellSpec cell;
  std::vector<int> edge_ops;
};

// Architecture logits, one K-vector per edge, held as ParamVector segments
// alpha_0 .. alpha_{E-1}. Softmax is applied inside the forward pass, so
// solver updates act on unconstrained logits.
inline ParamVector make_arch_params(const CellSpec& cell, double fill = 0.0) {
  cell.validate();
  ParamVector p;
  for (int e = 0; e < cell.depth; ++e)
    p.append("alpha_" + std::to_string(e),
             Matrix((std::size_t)cell.menu_size(), 1, fill));
  return p;
}

inline std::string weight_key(int edge, int op) {
  return "W_" + std::to_string(edge) + "_" + std::to_string(op);
}

namespace detail {
// Deterministic stream splitting for seed derivation.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
inline std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t stream) {
  return std::mt19937_64(splitmix64(splitmix64(seed) ^ stream));
}
}  // namespace detail

// Gaussian weight init for every parameterized op plus the head,
// std = scale/sqrt(d).
inline ParamVector init_weights(const CellSpec& cell, std::uint64_t seed,
                                double scale = 1.0) {
  cell.validate();
  auto rng = detail::stream_rng(seed, 0x57u);
  std::normal_distribution<double> dist(0.0, scale / std::sqrt((double)cell.feature_dim));
  ParamVector p;
  const std::size_t d = (std::size_t)cell.feature_dim;
  for (int e = 0; e < cell.depth; ++e)
    for (int k = 0; k < cell.menu_size(); ++k)
      if (op_has_weights(cell.op_menu[k])) {
        Matrix W(d, d);
        for (double& v : W.data) v = dist(rng);
        p.append(weight_key(e, k), W);
      }
  Matrix head(1, d);
  for (double& v : head.data) v = dist(rng);
  p.append("head", head);
  return p;
}

namespace detail {

inline int apply_op(Tape& tape, OpType op, int h, int W) {
  switch (op) {
    case OpType::Zero: return -1;
    case OpType::Identity: return h;
    case OpType::Linear: return tape.matmul(W, h);
    case OpType::LinearTanh: return tape.tanh(tape.matmul(W, h));
    case OpType::LinearRelu: return tape.relu(tape.matmul(W, h));
  }
  throw std::logic_error("unreachable op");
}

// Builds the softmax-mixed forward graph over a d x N input batch; returns
// the 1 x N prediction node. Weight and alpha leaves are named after the
// ParamVector segments so gradients map straight back.
inline int build_mixed(Tape& tape, const CellSpec& cell, int x_node) {
  int h = x_node;
  for (int e = 0; e < cell.depth; ++e) {
    const int s = tape.softmax(tape.leaf("alpha_" + std::to_string(e),
                                         (std::size_t)cell.menu_size(), 1));
    int acc = -1;
    for (int k = 0; k < cell.menu_size(); ++k) {
      const OpType op = cell.op_menu[k];
      int W = -1;
      if (op_has_weights(op))
        W = tape.leaf(weight_key(e, k), (std::size_t)cell.feature_dim,
                      (std::size_t)cell.feature_dim);
      const int out = apply_op(tape, op, h, W);
      if (out < 0) continue;  // zero op contributes nothing
      const int term = tape.scale_elem(s, (std::size_t)k, out);
      acc = acc < 0 ? term : tape.add(acc, term);
    }
    if (acc < 0)
      acc = tape.constant(Matrix((std::size_t)cell.feature_dim,
                                 tape.node(x_node).cols));
    h = acc;
  }
  const int head = tape.leaf("head", 1, (std::size_t)cell.feature_dim);
  return tape.matmul(head, h);
}

// Discrete (one op per edge) forward graph.
inline int build_discrete(Tape& tape, const DiscreteCell& dc, int x_node) {
  int h = x_node;
  for (int e = 0; e < dc.cell.depth; ++e) {
    const int k = dc.edge_ops[e];
    const OpType op = dc.cell.op_menu[k];
    int W = -1;
    if (op_has_weights(op))
      W = tape.leaf(weight_key(e, k), (std::size_t)dc.cell.feature_dim,
                    (std::size_t)dc.cell.feature_dim);
    const int out = apply_op(tape, op, h, W);
    h = out < 0 ? tape.constant(Matrix((std::size_t)dc.cell.feature_dim,
                                       tape.node(x_node).cols))
                : out;
  }
  const int head = tape.leaf("head", 1, (std::size_t)dc.cell.feature_dim);
  return tape.matmul(head, h);
}

inline std::map<std::string, Matrix> bindings_of(const ParamVector& weights,
                                                 const ParamVector& arch) {
  std::map<std::string, Matrix> b;
  for (const auto& s : weights.segments()) b[s.name] = weights.segment_matrix(s);
  for (const auto& s : arch.segments()) b[s.name] = arch.segment_matrix(s);
  return b;
}

inline ParamVector collect_grads(const std::map<std::string, Matrix>& grads,
                                 const ParamVector& proto) {
  ParamVector g = proto.zeros_like();
  for (const auto& s : proto.segments()) {
    auto it = grads.find(s.name);
    if (it != grads.end()) g.set_segment(s.name, it->second);
  }
  return g;
}

}  // namespace detail

// Softmax-mixed forward pass for one input vector; returns the scalar output.
inline double mixed_forward(const CellSpec& cell, const ParamVector& weights,
                            const ParamVector& arch, const Matrix& x) {
  cell.validate();
  if (x.rows != (std::size_t)cell.feature_dim || x.cols != 1)
    throw std::invalid_argument("mixed_forward: x must be feature_dim x 1");
  Tape tape;
  const int xn = tape.constant(x);
  const int pred = detail::build_mixed(tape, cell, xn);
  return tape.forward(detail::bindings_of(weights, arch), pred);
}

// Teacher network, data splits, and noise level. Splits come from disjoint
// seed streams of the generating RNG.
struct SyntheticTask {
  DiscreteCell teacher;
  ParamVector teacher_weights;
  Matrix train_x, train_y;  // inputs d x N, targets 1 x N
  Matrix val_x, val_y;
  Matrix test_x, test_y;
  double noise_std = 0.0;
};

namespace detail {

inline double discrete_eval_batch(const DiscreteCell& dc, const ParamVector& weights,
                                  const Matrix& x, const Matrix& y) {
  Tape tape;
  const int pred = build_discrete(tape, dc, tape.constant(x));
  const int loss = tape.mse(pred, tape.constant(y));
  ParamVector empty_arch;
  return tape.forward(bindings_of(weights, empty_arch), loss);
}

inline Matrix teacher_predict(const DiscreteCell& dc, const ParamVector& weights,
                              const Matrix& x) {
  Tape tape;
  const int pred = build_discrete(tape, dc, tape.constant(x));
  // run forward via a scalar root over the prediction, then read the node
  const int root = tape.sum(pred);
  ParamVector empty_arch;
  tape.forward(bindings_of(weights, empty_arch), root);
  return tape.node(pred).value;
}

}  // namespace detail

// Deterministic synthetic regression task. Teacher ops are drawn uniformly
// from the non-zero menu entries; teacher weights from a fixed-scale
// Gaussian; inputs standard Gaussian; targets teacher outputs plus noise.
inline SyntheticTask gen_task(std::uint64_t seed, const CellSpec& cell, int n_train,
                              int n_val, int n_test, double noise_std,
                              double teacher_weight_scale = 2.0) {
  cell.validate();
  if (n_train < 1 || n_val < 1 || n_test < 1)
    throw std::invalid_argument("gen_task: sample counts must be >= 1");
  if (noise_std < 0.0) throw std::invalid_argument("gen_task: noise_std must be >= 0");

  std::vector<int> nonzero;
  for (int k = 0; k < cell.menu_size(); ++k)
    if (cell.op_menu[k] != OpType::Zero) nonzero.push_back(k);
  if (nonzero.empty())
    throw std::invalid_argument("gen_task: menu has no non-zero ops");

  SyntheticTask task;
  task.noise_std = noise_std;
  task.teacher.cell = cell;
  auto op_rng = detail::stream_rng(seed, 0x01u);
  std::uniform_int_distribution<std::size_t> pick(0, nonzero.size() - 1);
  for (int e = 0; e < cell.depth; ++e)
    task.teacher.edge_ops.push_back(nonzero[pick(op_rng)]);
  task.teacher_weights = init_weights(cell, detail::splitmix64(seed) ^ 0x02u,
                                      teacher_weight_scale);

  const std::size_t d = (std::size_t)cell.feature_dim;
  auto make_split = [&](std::uint64_t stream, int n, Matrix& x_out, Matrix& y_out) {
    auto rng = detail::stream_rng(seed, stream);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix x(d, (std::size_t)n);
    for (double& v : x.data) v = gauss(rng);
    Matrix y = detail::teacher_predict(task.teacher, task.teacher_weights, x);
    if (noise_std > 0.0)
      for (double& v : y.data) v += noise_std * gauss(rng);
    x_out = std::move(x);
    y_out = std::move(y);
  };
  make_split(0x10u, n_train, task.train_x, task.train_y);
  make_split(0x20u, n_val, task.val_x, task.val_y);
  make_split(0x30u, n_test, task.test_x, task.test_y);
  return task;
}

// Two-network supernet objective: L_train is the MSE of the w-network on the
// train split, L_val the MSE of the y-network on the validation split, with
// one shared set of architecture logits. Full-batch gradients via the tape.
class SupernetObjective final : public BilevelObjective {
 public:
  SupernetObjective(CellSpec cell, SyntheticTask task)
      : cell_(std::move(cell)), task_(std::move(task)) {
    cell_.validate();
    if (task_.train_x.cols == 0 || task_.val_x.cols == 0)
      throw std::invalid_argument("SupernetObjective: empty split");
  }

  const CellSpec& cell() const { return cell_; }
  const SyntheticTask& task() const { return task_; }

  double eval_train(const ParamVector& w, const ParamVector& a) const override {
    return loss_only(w, a, task_.train_x, task_.train_y);
  }
  double eval_val(const ParamVector& y, const ParamVector& a) const override {
    return loss_only(y, a, task_.val_x, task_.val_y);
  }
  ParamVector grad_w_train(const ParamVector& w, const ParamVector& a) const override {
    return grad_of(w, a, task_.train_x, task_.train_y, /*wrt_weights=*/true);
  }
  ParamVector grad_alpha_train(const ParamVector& w, const ParamVector& a) const override {
    return grad_of(w, a, task_.train_x, task_.train_y, /*wrt_weights=*/false);
  }
  ParamVector grad_y_val(const ParamVector& y, const ParamVector& a) const override {
    return grad_of(y, a, task_.val_x, task_.val_y, /*wrt_weights=*/true);
  }
  ParamVector grad_alpha_val(const ParamVector& y, const ParamVector& a) const override {
    return grad_of(y, a, task_.val_x, task_.val_y, /*wrt_weights=*/false);
  }

 private:
  CellSpec cell_;
  SyntheticTask task_;

  double loss_only(const ParamVector& weights, const ParamVector& arch,
                   const Matrix& x, const Matrix& y) const {
    Tape tape;
    const int loss =
        tape.mse(detail::build_mixed(tape, cell_, tape.constant(x)), tape.constant(y));
    return tape.forward(detail::bindings_of(weights, arch), loss);
  }

  ParamVector grad_of(const ParamVector& weights, const ParamVector& arch,
                      const Matrix& x, const Matrix& y, bool wrt_weights) const {
    Tape tape;
    const int loss =
        tape.mse(detail::build_mixed(tape, cell_, tape.constant(x)), tape.constant(y));
    tape.forward(detail::bindings_of(weights, arch), loss);
    auto grads = tape.backward(loss);
    return detail::collect_grads(grads, wrt_weights ? weights : arch);
  }
};

inline std::shared_ptr<SupernetObjective> supernet_objective(const CellSpec& cell,
                                                             const SyntheticTask& task) {
  return std::make_shared<SupernetObjective>(cell, task);
}

// Continuous-to-discrete projection: per edge, argmax of the softmax row.
// The zero op is excluded by default; exact ties go to the lowest index.
inline DiscreteCell discretize(const ParamVector& arch, const CellSpec& cell,
                               bool include_zero = false) {
  cell.validate();
  DiscreteCell dc;
  dc.cell = cell;
  for (int e = 0; e < cell.depth; ++e) {
    Matrix logits = arch.segment_matrix("alpha_" + std::to_string(e));
    // softmax is monotone, argmax over logits is enough
    int best = -1;
    for (int k = 0; k < cell.menu_size(); ++k) {
      if (!include_zero && cell.op_menu[k] == OpType::Zero) continue;
      if (best < 0 || logits.data[k] > logits.data[best]) best = k;
    }
    if (best < 0)
      throw std::invalid_argument("discretize: menu contains only the zero op");
    dc.edge_ops.push_back(best);
  }
  return dc;
}

struct RetrainResult {
  ParamVector weights;
  double test_mse;
  std::vector<double> loss_curve;
};

struct RetrainDivergedError : std::runtime_error {
  int epoch;
  RetrainDivergedError(int ep)
      : std::runtime_error("retrain: non-finite loss at epoch " + std::to_string(ep)),
        epoch(ep) {}
};

// Trains a discrete cell from fresh initialization with full-batch Adam on
// the combined train+val data; reports test-split MSE. Plain gradient
// descent stalls on the saturated-tanh teachers, Adam does not.
inline RetrainResult retrain(const DiscreteCell& dc, const SyntheticTask& task,
                             int epochs, double lr, std::uint64_t seed,
                             double init_scale = 1.0) {
  if (epochs < 1) throw std::invalid_argument("retrain: epochs must be >= 1");
  const std::size_t d = (std::size_t)dc.cell.feature_dim;
  const std::size_t n = task.train_x.cols + task.val_x.cols;
  Matrix x(d, n), y(1, n);
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t c = 0; c < task.train_x.cols; ++c) x(r, c) = task.train_x(r, c);
    for (std::size_t c = 0; c < task.val_x.cols; ++c)
      x(r, task.train_x.cols + c) = task.val_x(r, c);
  }
  for (std::size_t c = 0; c < task.train_y.cols; ++c) y(0, c) = task.train_y(0, c);
  for (std::size_t c = 0; c < task.val_y.cols; ++c)
    y(0, task.train_y.cols + c) = task.val_y(0, c);

  ParamVector weights = init_weights(dc.cell, seed, init_scale);
  ParamVector m1 = weights.zeros_like();
  ParamVector m2 = weights.zeros_like();
  const double b1 = 0.9, b2 = 0.999, adam_eps = 1e-8;
  ParamVector empty_arch;
  RetrainResult res;
  for (int ep = 0; ep < epochs; ++ep) {
    Tape tape;
    const int loss =
        tape.mse(detail::build_discrete(tape, dc, tape.constant(x)), tape.constant(y));
    double lv;
    try {
      lv = tape.forward(detail::bindings_of(weights, empty_arch), loss);
    } catch (const TapeError&) {
      throw RetrainDivergedError(ep);
    }
    if (!std::isfinite(lv)) throw RetrainDivergedError(ep);
    res.loss_curve.push_back(lv);
    auto grads = tape.backward(loss);
    ParamVector g = detail::collect_grads(grads, weights);
    const double c1 = 1.0 - std::pow(b1, ep + 1);
    const double c2 = 1.0 - std::pow(b2, ep + 1);
    for (std::size_t j = 0; j < weights.size(); ++j) {
      m1[j] = b1 * m1[j] + (1.0 - b1) * g[j];
      m2[j] = b2 * m2[j] + (1.0 - b2) * g[j] * g[j];
      weights[j] -= lr * (m1[j] / c1) / (std::sqrt(m2[j] / c2) + adam_eps);
    }
  }
  res.weights = weights;
  res.test_mse = detail::discrete_eval_batch(dc, weights, task.test_x, task.test_y);
  return res;
}

// Discrete-cell MSE on an arbitrary split.
inline double discrete_mse(const DiscreteCell& dc, const ParamVector& weights,
                           const Matrix& x, const Matrix& y) {
  return detail::discrete_eval_batch(dc, weights, x, y);
}

}  // namespace rarts
