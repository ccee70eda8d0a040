#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "rarts/matrix.hpp"

namespace rarts {

// Error raised by tape evaluation; carries the offending node index.
struct TapeError : std::runtime_error {
  std::size_t node = 0;
  TapeError(std::string msg, std::size_t node_index)
      : std::runtime_error(msg + " (node " + std::to_string(node_index) + ")"),
        node(node_index) {}
};

enum class OpKind : std::uint8_t {
  Leaf,
  Const,
  Add,
  Sub,
  Mul,       // elementwise
  MatMul,
  Scale,     // constant scalar * matrix
  ScaleElem, // element k of a column vector node, times a matrix node
  Neg,
  Tanh,
  Relu,
  Softmax,   // column vector -> column vector
  Sum,
  SquaredNorm,
  Dot,       // same-shape, sum of elementwise product
  Mse,       // mean((a-b)^2) over same-shape inputs
};

// Reverse-mode tape over dense double matrices. Nodes are appended in
// topological order; forward() caches values, backward() runs one
// adjoint sweep from a scalar root. A tape is confined to one thread.
class Tape {
 public:
  struct Node {
    OpKind kind;
    int a = -1;
    int b = -1;
    double c = 0.0;       // Scale factor
    std::size_t k = 0;    // ScaleElem index
    std::string name;     // Leaf name
    std::size_t rows = 0, cols = 0;
    Matrix value;
    Matrix adjoint;
  };

  // Declaring the same name twice returns the original node, so subgraphs
  // built independently share one leaf.
  int leaf(const std::string& name, std::size_t rows, std::size_t cols) {
    auto it = leaf_index_.find(name);
    if (it != leaf_index_.end()) {
      const Node& l = nodes_[it->second];
      if (l.rows != rows || l.cols != cols)
        throw TapeError("leaf '" + name + "' redeclared with a different shape",
                        (std::size_t)it->second);
      return it->second;
    }
    Node n;
    n.kind = OpKind::Leaf;
    n.name = name;
    n.rows = rows;
    n.cols = cols;
    leaf_index_[name] = (int)nodes_.size();
    return push(std::move(n));
  }

  int constant(Matrix v) {
    Node n;
    n.kind = OpKind::Const;
    n.rows = v.rows;
    n.cols = v.cols;
    n.value = std::move(v);
    return push(std::move(n));
  }
  int constant(double v) { return constant(Matrix::scalar(v)); }

  int add(int a, int b) { return binary_same_shape(OpKind::Add, a, b); }
  int sub(int a, int b) { return binary_same_shape(OpKind::Sub, a, b); }
  int mul(int a, int b) { return binary_same_shape(OpKind::Mul, a, b); }

  int matmul(int a, int b) {
    require(a);
    require(b);
    if (nodes_[a].cols != nodes_[b].rows)
      throw TapeError("matmul: inner dimensions disagree, " +
                          std::to_string(nodes_[a].cols) + " vs " +
                          std::to_string(nodes_[b].rows),
                      nodes_.size());
    Node n;
    n.kind = OpKind::MatMul;
    n.a = a;
    n.b = b;
    n.rows = nodes_[a].rows;
    n.cols = nodes_[b].cols;
    return push(std::move(n));
  }

  int scale(int a, double c) {
    require(a);
    Node n;
    n.kind = OpKind::Scale;
    n.a = a;
    n.c = c;
    n.rows = nodes_[a].rows;
    n.cols = nodes_[a].cols;
    return push(std::move(n));
  }

  // value = vec[k] * mat, where vec is a column vector node.
  int scale_elem(int vec, std::size_t k, int mat) {
    require(vec);
    require(mat);
    if (nodes_[vec].cols != 1 || k >= nodes_[vec].rows)
      throw TapeError("scale_elem: index out of range", nodes_.size());
    Node n;
    n.kind = OpKind::ScaleElem;
    n.a = vec;
    n.b = mat;
    n.k = k;
    n.rows = nodes_[mat].rows;
    n.cols = nodes_[mat].cols;
    return push(std::move(n));
  }

  int neg(int a) { return unary_same_shape(OpKind::Neg, a); }
  int tanh(int a) { return unary_same_shape(OpKind::Tanh, a); }
  int relu(int a) { return unary_same_shape(OpKind::Relu, a); }

  int softmax(int a) {
    require(a);
    if (nodes_[a].cols != 1)
      throw TapeError("softmax: input must be a column vector", nodes_.size());
    return unary_same_shape(OpKind::Softmax, a);
  }

  int sum(int a) { return reduction(OpKind::Sum, a, -1); }
  int squared_norm(int a) { return reduction(OpKind::SquaredNorm, a, -1); }

  int dot(int a, int b) {
    check_same_shape(a, b, "dot");
    return reduction(OpKind::Dot, a, b);
  }
  int mse(int a, int b) {
    check_same_shape(a, b, "mse");
    return reduction(OpKind::Mse, a, b);
  }

  std::size_t size() const { return nodes_.size(); }
  const Node& node(int i) const { return nodes_[i]; }

  // Binds leaves by name and runs the forward sweep, caching every value.
  // Returns the value of `root`.
  double forward(const std::map<std::string, Matrix>& bindings, int root) {
    for (auto& [name, idx] : leaf_index_) {
      auto it = bindings.find(name);
      if (it == bindings.end())
        throw TapeError("forward: leaf '" + name + "' unbound", (std::size_t)idx);
      const Node& l = nodes_[idx];
      if (it->second.rows != l.rows || it->second.cols != l.cols)
        throw TapeError("forward: leaf '" + name + "' bound with shape " +
                            shape_str(it->second) + ", declared " +
                            std::to_string(l.rows) + "x" + std::to_string(l.cols),
                        (std::size_t)idx);
      nodes_[idx].value = it->second;
    }
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      eval_node(i);
      if (!nodes_[i].value.all_finite())
        throw TapeError("forward: non-finite intermediate", i);
    }
    forward_done_ = true;
    const Node& r = nodes_.at(root);
    if (!r.value.is_scalar())
      throw TapeError("forward: root is not scalar, shape " + shape_str(r.value),
                      (std::size_t)root);
    return r.value.as_scalar();
  }

  // Reverse sweep from a scalar root; returns d(root)/d(leaf) per leaf name.
  std::map<std::string, Matrix> backward(int root) {
    if (!forward_done_)
      throw TapeError("backward: forward has not been run", (std::size_t)root);
    if (!nodes_.at(root).value.is_scalar())
      throw TapeError("backward: root is not scalar", (std::size_t)root);
    for (auto& n : nodes_) n.adjoint = Matrix(n.value.rows, n.value.cols);
    nodes_[root].adjoint.data[0] = 1.0;
    for (std::size_t ii = nodes_.size(); ii-- > 0;) propagate(ii);
    std::map<std::string, Matrix> out;
    for (auto& [name, idx] : leaf_index_) out[name] = nodes_[idx].adjoint;
    return out;
  }

 private:
  std::vector<Node> nodes_;
  std::map<std::string, int> leaf_index_;
  bool forward_done_ = false;

  void require(int i) const {
    if (i < 0 || (std::size_t)i >= nodes_.size())
      throw TapeError("parent index out of range", nodes_.size());
  }

  int push(Node n) {
    forward_done_ = false;
    nodes_.push_back(std::move(n));
    return (int)nodes_.size() - 1;
  }

  void check_same_shape(int a, int b, const char* what) const {
    require(a);
    require(b);
    if (nodes_[a].rows != nodes_[b].rows || nodes_[a].cols != nodes_[b].cols)
      throw TapeError(std::string(what) + ": shapes disagree", nodes_.size());
  }

  int binary_same_shape(OpKind kind, int a, int b) {
    check_same_shape(a, b, "binary op");
    Node n;
    n.kind = kind;
    n.a = a;
    n.b = b;
    n.rows = nodes_[a].rows;
    n.cols = nodes_[a].cols;
    return push(std::move(n));
  }

  int unary_same_shape(OpKind kind, int a) {
    require(a);
    Node n;
    n.kind = kind;
    n.a = a;
    n.rows = nodes_[a].rows;
    n.cols = nodes_[a].cols;
    return push(std::move(n));
  }

  int reduction(OpKind kind, int a, int b) {
    require(a);
    Node n;
    n.kind = kind;
    n.a = a;
    n.b = b;
    n.rows = 1;
    n.cols = 1;
    return push(std::move(n));
  }

  void eval_node(std::size_t i) {
    Node& n = nodes_[i];
    const Matrix* A = n.a >= 0 ? &nodes_[n.a].value : nullptr;
    const Matrix* B = n.b >= 0 ? &nodes_[n.b].value : nullptr;
    switch (n.kind) {
      case OpKind::Leaf:
        if (n.value.rows != n.rows || n.value.cols != n.cols)
          throw TapeError("leaf '" + n.name + "' unbound", i);
        break;
      case OpKind::Const:
        break;
      case OpKind::Add:
      case OpKind::Sub:
      case OpKind::Mul: {
        n.value = Matrix(A->rows, A->cols);
        for (std::size_t j = 0; j < A->size(); ++j)
          n.value.data[j] = n.kind == OpKind::Add   ? A->data[j] + B->data[j]
                            : n.kind == OpKind::Sub ? A->data[j] - B->data[j]
                                                    : A->data[j] * B->data[j];
        break;
      }
      case OpKind::MatMul: {
        n.value = Matrix(A->rows, B->cols);
        for (std::size_t r = 0; r < A->rows; ++r)
          for (std::size_t k = 0; k < A->cols; ++k) {
            const double av = (*A)(r, k);
            if (av == 0.0) continue;
            for (std::size_t c = 0; c < B->cols; ++c)
              n.value(r, c) += av * (*B)(k, c);
          }
        break;
      }
      case OpKind::Scale: {
        n.value = *A;
        for (double& v : n.value.data) v *= n.c;
        break;
      }
      case OpKind::ScaleElem: {
        const double s = (*A)(n.k, 0);
        n.value = *B;
        for (double& v : n.value.data) v *= s;
        break;
      }
      case OpKind::Neg: {
        n.value = *A;
        for (double& v : n.value.data) v = -v;
        break;
      }
      case OpKind::Tanh: {
        n.value = *A;
        for (double& v : n.value.data) v = std::tanh(v);
        break;
      }
      case OpKind::Relu: {
        n.value = *A;
        for (double& v : n.value.data) v = v > 0.0 ? v : 0.0;
        break;
      }
      case OpKind::Softmax: {
        n.value = *A;
        double mx = n.value.data[0];
        for (double v : n.value.data) mx = std::max(mx, v);
        double sum = 0.0;
        for (double& v : n.value.data) {
          v = std::exp(v - mx);
          sum += v;
        }
        for (double& v : n.value.data) v /= sum;
        break;
      }
      case OpKind::Sum: {
        double s = 0.0;
        for (double v : A->data) s += v;
        n.value = Matrix::scalar(s);
        break;
      }
      case OpKind::SquaredNorm: {
        double s = 0.0;
        for (double v : A->data) s += v * v;
        n.value = Matrix::scalar(s);
        break;
      }
      case OpKind::Dot: {
        double s = 0.0;
        for (std::size_t j = 0; j < A->size(); ++j) s += A->data[j] * B->data[j];
        n.value = Matrix::scalar(s);
        break;
      }
      case OpKind::Mse: {
        double s = 0.0;
        for (std::size_t j = 0; j < A->size(); ++j) {
          const double dlt = A->data[j] - B->data[j];
          s += dlt * dlt;
        }
        n.value = Matrix::scalar(s / (double)A->size());
        break;
      }
    }
  }

  void propagate(std::size_t i) {
    Node& n = nodes_[i];
    const Matrix& g = n.adjoint;
    Matrix* Aj = n.a >= 0 ? &nodes_[n.a].adjoint : nullptr;
    Matrix* Bj = n.b >= 0 ? &nodes_[n.b].adjoint : nullptr;
    const Matrix* A = n.a >= 0 ? &nodes_[n.a].value : nullptr;
    const Matrix* B = n.b >= 0 ? &nodes_[n.b].value : nullptr;
    switch (n.kind) {
      case OpKind::Leaf:
      case OpKind::Const:
        break;
      case OpKind::Add:
        for (std::size_t j = 0; j < g.size(); ++j) {
          Aj->data[j] += g.data[j];
          Bj->data[j] += g.data[j];
        }
        break;
      case OpKind::Sub:
        for (std::size_t j = 0; j < g.size(); ++j) {
          Aj->data[j] += g.data[j];
          Bj->data[j] -= g.data[j];
        }
        break;
      case OpKind::Mul:
        for (std::size_t j = 0; j < g.size(); ++j) {
          Aj->data[j] += g.data[j] * B->data[j];
          Bj->data[j] += g.data[j] * A->data[j];
        }
        break;
      case OpKind::MatMul: {
        // dA += g * B^T ; dB += A^T * g
        for (std::size_t r = 0; r < Aj->rows; ++r)
          for (std::size_t c = 0; c < g.cols; ++c) {
            const double gv = g(r, c);
            if (gv == 0.0) continue;
            for (std::size_t k = 0; k < Aj->cols; ++k)
              (*Aj)(r, k) += gv * (*B)(k, c);
          }
        for (std::size_t k = 0; k < A->cols; ++k)
          for (std::size_t r = 0; r < A->rows; ++r) {
            const double av = (*A)(r, k);
            if (av == 0.0) continue;
            for (std::size_t c = 0; c < g.cols; ++c)
              (*Bj)(k, c) += av * g(r, c);
          }
        break;
      }
      case OpKind::Scale:
        for (std::size_t j = 0; j < g.size(); ++j) Aj->data[j] += n.c * g.data[j];
        break;
      case OpKind::ScaleElem: {
        const double s = (*A)(n.k, 0);
        double acc = 0.0;
        for (std::size_t j = 0; j < g.size(); ++j) {
          Bj->data[j] += s * g.data[j];
          acc += g.data[j] * B->data[j];
        }
        (*Aj)(n.k, 0) += acc;
        break;
      }
      case OpKind::Neg:
        for (std::size_t j = 0; j < g.size(); ++j) Aj->data[j] -= g.data[j];
        break;
      case OpKind::Tanh:
        for (std::size_t j = 0; j < g.size(); ++j) {
          const double t = n.value.data[j];
          Aj->data[j] += g.data[j] * (1.0 - t * t);
        }
        break;
      case OpKind::Relu:
        // subgradient at 0 is 0
        for (std::size_t j = 0; j < g.size(); ++j)
          Aj->data[j] += A->data[j] > 0.0 ? g.data[j] : 0.0;
        break;
      case OpKind::Softmax: {
        const Matrix& s = n.value;
        double gs = 0.0;
        for (std::size_t j = 0; j < s.size(); ++j) gs += g.data[j] * s.data[j];
        for (std::size_t j = 0; j < s.size(); ++j)
          Aj->data[j] += s.data[j] * (g.data[j] - gs);
        break;
      }
      case OpKind::Sum: {
        const double gv = g.data[0];
        for (double& v : Aj->data) v += gv;
        break;
      }
      case OpKind::SquaredNorm: {
        const double gv = g.data[0];
        for (std::size_t j = 0; j < A->size(); ++j)
          Aj->data[j] += gv * 2.0 * A->data[j];
        break;
      }
      case OpKind::Dot: {
        const double gv = g.data[0];
        for (std::size_t j = 0; j < A->size(); ++j) {
          Aj->data[j] += gv * B->data[j];
          Bj->data[j] += gv * A->data[j];
        }
        break;
      }
      case OpKind::Mse: {
        const double gv = g.data[0] * 2.0 / (double)A->size();
        for (std::size_t j = 0; j < A->size(); ++j) {
          const double dlt = A->data[j] - B->data[j];
          Aj->data[j] += gv * dlt;
          Bj->data[j] -= gv * dlt;
        }
        break;
      }
    }
  }
};

// Max relative error between reverse-mode gradients and central finite
// differences of `f` over the given leaf bindings. Relative error uses
// denominator max(|analytic|, |numeric|, 1e-12).
//
// `build` constructs a fresh tape and returns the root node; the tape is
// rebuilt per evaluation.
inline double grad_check(
    const std::function<int(Tape&)>& build,
    const std::map<std::string, Matrix>& point, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("grad_check: eps must be > 0");
  Tape tape;
  int root = build(tape);
  tape.forward(point, root);
  auto analytic = tape.backward(root);

  double max_rel = 0.0;
  for (auto& [name, g] : analytic) {
    for (std::size_t j = 0; j < g.size(); ++j) {
      auto perturbed = point;
      perturbed[name].data[j] += eps;
      Tape tp;
      const double fp = tp.forward(perturbed, build(tp));
      perturbed[name].data[j] -= 2.0 * eps;
      Tape tm;
      const double fm = tm.forward(perturbed, build(tm));
      const double numeric = (fp - fm) / (2.0 * eps);
      const double denom =
          std::max({std::abs(g.data[j]), std::abs(numeric), 1e-12});
      max_rel = std::max(max_rel, std::abs(g.data[j] - numeric) / denom);
    }
  }
  return max_rel;
}

}  // namespace rarts
