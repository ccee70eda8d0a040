#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "rarts/matrix.hpp"

namespace rarts {

// Flat real vector with named, shaped segments. Segments tile the vector
// exactly; two ParamVectors are shape-compatible iff their descriptors
// are identical.
class ParamVector {
 public:
  struct Segment {
    std::string name;
    std::size_t offset;
    std::size_t rows;
    std::size_t cols;
    std::size_t extent() const { return rows * cols; }
    bool operator==(const Segment&) const = default;
  };

  ParamVector() = default;

  static ParamVector scalar(const std::string& name, double v) {
    ParamVector p;
    p.append(name, Matrix::scalar(v));
    return p;
  }

  void append(const std::string& name, const Matrix& m) {
    segments_.push_back({name, values_.size(), m.rows, m.cols});
    values_.insert(values_.end(), m.data.begin(), m.data.end());
  }

  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }
  const std::vector<Segment>& segments() const { return segments_; }
  std::size_t size() const { return values_.size(); }

  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  // Layout equality only; segment names may differ (e.g. the w and y copies
  // of the same weight vector).
  bool shape_compatible(const ParamVector& o) const {
    if (segments_.size() != o.segments_.size()) return false;
    for (std::size_t i = 0; i < segments_.size(); ++i) {
      const Segment& a = segments_[i];
      const Segment& b = o.segments_[i];
      if (a.offset != b.offset || a.rows != b.rows || a.cols != b.cols) return false;
    }
    return true;
  }

  const Segment& find(const std::string& name) const {
    for (const auto& s : segments_)
      if (s.name == name) return s;
    throw std::out_of_range("ParamVector: no segment '" + name + "'");
  }

  Matrix segment_matrix(const Segment& s) const {
    Matrix m(s.rows, s.cols);
    for (std::size_t j = 0; j < s.extent(); ++j) m.data[j] = values_[s.offset + j];
    return m;
  }
  Matrix segment_matrix(const std::string& name) const {
    return segment_matrix(find(name));
  }

  void set_segment(const std::string& name, const Matrix& m) {
    const Segment& s = find(name);
    if (m.rows != s.rows || m.cols != s.cols)
      throw std::invalid_argument("ParamVector: segment '" + name +
                                  "' shape mismatch");
    for (std::size_t j = 0; j < s.extent(); ++j) values_[s.offset + j] = m.data[j];
  }

  // Zero vector with the same segment layout.
  ParamVector zeros_like() const {
    ParamVector p = *this;
    for (double& v : p.values_) v = 0.0;
    return p;
  }

  double norm() const {
    double s = 0.0;
    for (double v : values_) s += v * v;
    return std::sqrt(s);
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
  }

  bool all_finite() const {
    for (double v : values_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  // In-place axpy: this += c * other. Requires shape compatibility.
  ParamVector& axpy(double c, const ParamVector& o) {
    check_compatible(o);
    for (std::size_t j = 0; j < values_.size(); ++j) values_[j] += c * o.values_[j];
    return *this;
  }

  friend ParamVector operator-(const ParamVector& a, const ParamVector& b) {
    a.check_compatible(b);
    ParamVector r = a;
    for (std::size_t j = 0; j < r.values_.size(); ++j) r.values_[j] -= b.values_[j];
    return r;
  }

  bool operator==(const ParamVector&) const = default;

 private:
  std::vector<double> values_;
  std::vector<Segment> segments_;

  void check_compatible(const ParamVector& o) const {
    if (!shape_compatible(o))
      throw std::invalid_argument("ParamVector: incompatible segment layouts");
  }
};

inline double distance(const ParamVector& a, const ParamVector& b) {
  return (a - b).norm();
}

}  // namespace rarts
