#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "dialgraph/errors.hpp"

namespace dialgraph {

/// Dense row-major matrix of 64-bit floats. All tensor values are rank-2;
/// vectors are 1xN rows and scalars are 1x1.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class Tensor;

namespace detail {

struct Node {
  Mat value;
  Mat grad;  // empty until the backward sweep touches this node
  bool requires_grad = false;
  std::uint64_t index = 0;  // creation order; any ancestor has a smaller index
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backprop;  // pulls this->grad into parents

  void accumulate(const Mat& g);
};

Tensor wrap_node(std::shared_ptr<Node> n);

}  // namespace detail

/// Reverse-mode autodiff tensor. A Tensor is a cheap shared handle onto a
/// node of the computation graph; free functions below build new nodes and
/// record backward rules when any input requires a gradient.
class Tensor {
 public:
  Tensor() = default;

  /// Leaf holding a value; requires_grad marks it as a trainable endpoint.
  static Tensor leaf(Mat value, bool requires_grad);
  /// Leaf constant (no gradient ever flows into it).
  static Tensor constant(Mat value);
  static Tensor scalar(double v);
  /// Row vector 1xN from a plain list of values.
  static Tensor row(const std::vector<double>& values, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Mat& value() const;
  /// Mutable access to a leaf's value (optimizer updates, finite differences).
  Mat& value_mut();

  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Eigen::Index size() const { return value().size(); }
  std::vector<Eigen::Index> shape() const { return {rows(), cols()}; }
  bool is_scalar() const { return size() == 1; }
  double item() const;

  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool has_grad() const { return node_ && node_->grad.size() > 0; }
  const Mat& grad() const;
  void zero_grad();
  /// Drops any recorded grad buffer entirely (back to "missing").
  void clear_grad();

  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

  friend void backward(const Tensor& loss);
  friend Tensor detail::wrap_node(std::shared_ptr<detail::Node> n);

 private:
  explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}
  std::shared_ptr<detail::Node> node_;
};

/// While alive, newly built ops do not record backward rules; forward values
/// are still computed. Used for evaluation and finite-difference probes.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

/// Reverse sweep from a scalar loss; fills grad of every reachable
/// requires_grad node. Deterministic: the sweep order is the reverse of node
/// creation order, which is a topological order of the graph.
void backward(const Tensor& loss);

// ---- operations ----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);

/// add/sub/mul broadcast: shapes must match, or one side may be 1xN, Mx1 or
/// 1x1 against the other's MxN.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
/// Adds a constant matrix (same shape); gradient passes through unchanged.
Tensor add_mat(const Tensor& a, const Mat& m);

Tensor relu(const Tensor& a);
Tensor log(const Tensor& a);
/// Elementwise a^p for constant p. Fractional p requires positive entries.
Tensor pow_const(const Tensor& a, double p);

/// Softmax along axis (0 = down columns, 1 = across rows), max-shifted.
Tensor softmax(const Tensor& a, int axis);

Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice(const Tensor& a, Eigen::Index row0, Eigen::Index nrows,
             Eigen::Index col0, Eigen::Index ncols);
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, Eigen::Index rows, Eigen::Index cols);
/// out.row(i) = a.row(idx[i]); backward scatter-adds (repeats accumulate).
Tensor gather_rows(const Tensor& a, const std::vector<Eigen::Index>& idx);

Tensor sum(const Tensor& a);       // 1x1
Tensor mean(const Tensor& a);      // 1x1
Tensor row_sum(const Tensor& a);   // Mx1
Tensor row_mean(const Tensor& a);  // Mx1

inline std::string shape_str(const Mat& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace dialgraph
