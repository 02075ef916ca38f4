#include "dialgraph/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <unordered_set>
#include <utility>

namespace dialgraph {

namespace {

std::atomic<std::uint64_t> g_node_counter{0};
thread_local bool g_grad_enabled = true;

std::shared_ptr<detail::Node> make_node(Mat value) {
  auto n = std::make_shared<detail::Node>();
  n->value = std::move(value);
  n->index = g_node_counter.fetch_add(1, std::memory_order_relaxed);
  return n;
}

// Builds the result node of an op. Parents and the backward rule are only
// recorded when grads are enabled and at least one input needs them.
Tensor make_op(Mat value, std::vector<Tensor> inputs,
               std::function<void(detail::Node&)> backprop) {
  auto n = make_node(std::move(value));
  bool needs = false;
  if (g_grad_enabled) {
    for (const auto& t : inputs) needs = needs || t.requires_grad();
  }
  if (needs) {
    n->requires_grad = true;
    n->parents.reserve(inputs.size());
    for (auto& t : inputs) n->parents.push_back(t.node_ptr());
    n->backprop = std::move(backprop);
  }
  return detail::wrap_node(std::move(n));
}

}  // namespace

Tensor detail::wrap_node(std::shared_ptr<detail::Node> n) { return Tensor(std::move(n)); }

void detail::Node::accumulate(const Mat& g) {
  if (grad.size() == 0) {
    grad = g;
  } else {
    grad += g;
  }
}

// ---- Tensor --------------------------------------------------------------

Tensor Tensor::leaf(Mat value, bool requires_grad) {
  auto n = make_node(std::move(value));
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::constant(Mat value) { return leaf(std::move(value), false); }

Tensor Tensor::scalar(double v) {
  Mat m(1, 1);
  m(0, 0) = v;
  return constant(std::move(m));
}

Tensor Tensor::row(const std::vector<double>& values, bool requires_grad) {
  Mat m(1, static_cast<Eigen::Index>(values.size()));
  for (Eigen::Index i = 0; i < m.cols(); ++i) m(0, i) = values[static_cast<std::size_t>(i)];
  return leaf(std::move(m), requires_grad);
}

const Mat& Tensor::value() const {
  if (!node_) throw ContractError("Tensor: value() on an empty tensor");
  return node_->value;
}

Mat& Tensor::value_mut() {
  if (!node_) throw ContractError("Tensor: value_mut() on an empty tensor");
  return node_->value;
}

double Tensor::item() const {
  if (!is_scalar()) throw ContractError("Tensor: item() requires a scalar, got " + shape_str(value()));
  return value()(0, 0);
}

const Mat& Tensor::grad() const {
  if (!node_ || node_->grad.size() == 0)
    throw ContractError("Tensor: grad() before any backward pass");
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_) node_->grad = Mat::Zero(node_->value.rows(), node_->value.cols());
}

void Tensor::clear_grad() {
  if (node_) node_->grad.resize(0, 0);
}

// ---- NoGradGuard ----------------------------------------------------------

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

// ---- backward -------------------------------------------------------------

void backward(const Tensor& loss) {
  if (!loss.defined()) throw ContractError("backward: empty tensor");
  if (!loss.is_scalar())
    throw ContractError("backward: loss must be a scalar, got " + shape_str(loss.value()));
  if (!loss.node_->requires_grad) return;

  // Collect reachable grad-requiring nodes, then sweep in descending
  // creation order (a valid reverse topological order).
  std::vector<detail::Node*> stack{loss.node_.get()};
  std::unordered_set<detail::Node*> seen{loss.node_.get()};
  std::vector<detail::Node*> nodes;
  while (!stack.empty()) {
    detail::Node* n = stack.back();
    stack.pop_back();
    nodes.push_back(n);
    for (const auto& p : n->parents) {
      if (p && p->requires_grad && seen.insert(p.get()).second) stack.push_back(p.get());
    }
  }
  std::sort(nodes.begin(), nodes.end(),
            [](const detail::Node* a, const detail::Node* b) { return a->index > b->index; });

  // Interior grads are scratch space for this sweep; only leaves accumulate
  // across backward calls.
  for (detail::Node* n : nodes)
    if (n->backprop) n->grad.resize(0, 0);

  loss.node_->accumulate(Mat::Ones(1, 1));
  for (detail::Node* n : nodes) {
    if (n->backprop && n->grad.size() > 0) {
      n->backprop(*n);
      n->grad.resize(0, 0);
    }
  }
}

// ---- helpers ---------------------------------------------------------------

namespace {

bool broadcastable(const Mat& a, const Mat& b) {
  auto ok = [](Eigen::Index x, Eigen::Index y) { return x == y || x == 1 || y == 1; };
  return ok(a.rows(), b.rows()) && ok(a.cols(), b.cols());
}

Mat broadcast_to(const Mat& m, Eigen::Index r, Eigen::Index c) {
  if (m.rows() == r && m.cols() == c) return m;
  Mat out(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j)
      out(i, j) = m(m.rows() == 1 ? 0 : i, m.cols() == 1 ? 0 : j);
  return out;
}

// Sums g down to the original shape of a broadcast operand.
Mat reduce_to(const Mat& g, Eigen::Index r, Eigen::Index c) {
  if (g.rows() == r && g.cols() == c) return g;
  Mat out = g;
  if (r == 1 && out.rows() > 1) out = Mat(out.colwise().sum());
  if (c == 1 && out.cols() > 1) out = Mat(out.rowwise().sum());
  return out;
}

void check_broadcast(const char* op, const Mat& a, const Mat& b) {
  if (!broadcastable(a, b))
    throw DimensionError(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " +
                         shape_str(b));
}

}  // namespace

// ---- operations -------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  const Mat& av = a.value();
  const Mat& bv = b.value();
  if (av.cols() != bv.rows())
    throw DimensionError("matmul: inner dimensions disagree: " + shape_str(av) + " vs " +
                         shape_str(bv));
  Mat out = av * bv;
  return make_op(std::move(out), {a, b}, [](detail::Node& n) {
    auto& pa = *n.parents[0];
    auto& pb = *n.parents[1];
    if (pa.requires_grad) pa.accumulate(n.grad * pb.value.transpose());
    if (pb.requires_grad) pb.accumulate(pa.value.transpose() * n.grad);
  });
}

namespace {

enum class EwKind { Add, Sub, Mul };

Tensor elementwise(const char* name, EwKind kind, const Tensor& a, const Tensor& b) {
  const Mat& av = a.value();
  const Mat& bv = b.value();
  check_broadcast(name, av, bv);
  Eigen::Index r = std::max(av.rows(), bv.rows());
  Eigen::Index c = std::max(av.cols(), bv.cols());
  Mat ab = broadcast_to(av, r, c);
  Mat bb = broadcast_to(bv, r, c);
  Mat out;
  switch (kind) {
    case EwKind::Add: out = ab + bb; break;
    case EwKind::Sub: out = ab - bb; break;
    case EwKind::Mul: out = ab.cwiseProduct(bb); break;
  }
  return make_op(std::move(out), {a, b}, [kind, r, c](detail::Node& n) {
    auto& pa = *n.parents[0];
    auto& pb = *n.parents[1];
    switch (kind) {
      case EwKind::Add:
        if (pa.requires_grad) pa.accumulate(reduce_to(n.grad, pa.value.rows(), pa.value.cols()));
        if (pb.requires_grad) pb.accumulate(reduce_to(n.grad, pb.value.rows(), pb.value.cols()));
        break;
      case EwKind::Sub:
        if (pa.requires_grad) pa.accumulate(reduce_to(n.grad, pa.value.rows(), pa.value.cols()));
        if (pb.requires_grad) pb.accumulate(-reduce_to(n.grad, pb.value.rows(), pb.value.cols()));
        break;
      case EwKind::Mul: {
        Mat ab = broadcast_to(pa.value, r, c);
        Mat bb = broadcast_to(pb.value, r, c);
        if (pa.requires_grad)
          pa.accumulate(reduce_to(n.grad.cwiseProduct(bb), pa.value.rows(), pa.value.cols()));
        if (pb.requires_grad)
          pb.accumulate(reduce_to(n.grad.cwiseProduct(ab), pb.value.rows(), pb.value.cols()));
        break;
      }
    }
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return elementwise("add", EwKind::Add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return elementwise("sub", EwKind::Sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return elementwise("mul", EwKind::Mul, a, b); }

Tensor scale(const Tensor& a, double c) {
  Mat out = a.value() * c;
  return make_op(std::move(out), {a}, [c](detail::Node& n) {
    if (n.parents[0]->requires_grad) n.parents[0]->accumulate(n.grad * c);
  });
}

Tensor add_scalar(const Tensor& a, double c) {
  Mat out = (a.value().array() + c).matrix();
  return make_op(std::move(out), {a}, [](detail::Node& n) {
    if (n.parents[0]->requires_grad) n.parents[0]->accumulate(n.grad);
  });
}

Tensor add_mat(const Tensor& a, const Mat& m) {
  if (a.rows() != m.rows() || a.cols() != m.cols())
    throw DimensionError("add_mat: incompatible shapes " + shape_str(a.value()) + " and " +
                         shape_str(m));
  Mat out = a.value() + m;
  return make_op(std::move(out), {a}, [](detail::Node& n) {
    if (n.parents[0]->requires_grad) n.parents[0]->accumulate(n.grad);
  });
}

Tensor relu(const Tensor& a) {
  Mat out = a.value().cwiseMax(0.0);
  return make_op(std::move(out), {a}, [](detail::Node& n) {
    auto& p = *n.parents[0];
    if (!p.requires_grad) return;
    Mat g = ((p.value.array() > 0.0).cast<double>() * n.grad.array()).matrix();
    p.accumulate(g);
  });
}

Tensor log(const Tensor& a) {
  Mat out = a.value().array().log().matrix();
  return make_op(std::move(out), {a}, [](detail::Node& n) {
    auto& p = *n.parents[0];
    if (p.requires_grad) p.accumulate((n.grad.array() / p.value.array()).matrix());
  });
}

Tensor pow_const(const Tensor& a, double p) {
  Mat out = a.value().array().pow(p).matrix();
  return make_op(std::move(out), {a}, [p](detail::Node& n) {
    auto& pa = *n.parents[0];
    if (!pa.requires_grad) return;
    Mat g = (p * pa.value.array().pow(p - 1.0) * n.grad.array()).matrix();
    pa.accumulate(g);
  });
}

Tensor softmax(const Tensor& a, int axis) {
  if (axis != 0 && axis != 1) throw ContractError("softmax: axis must be 0 or 1");
  const Mat& av = a.value();
  if (!av.allFinite()) throw NumericError("softmax: non-finite input");
  // std::exp underflows extreme deficits to an exact 0.0 (Eigen's vectorized
  // exp clamps to a denormal floor instead), so fully masked entries drop out.
  Mat y(av.rows(), av.cols());
  if (axis == 1) {
    for (Eigen::Index i = 0; i < av.rows(); ++i) {
      double m = av.row(i).maxCoeff();
      double z = 0.0;
      for (Eigen::Index j = 0; j < av.cols(); ++j) {
        y(i, j) = std::exp(av(i, j) - m);
        z += y(i, j);
      }
      y.row(i) /= z;
    }
  } else {
    for (Eigen::Index j = 0; j < av.cols(); ++j) {
      double m = av.col(j).maxCoeff();
      double z = 0.0;
      for (Eigen::Index i = 0; i < av.rows(); ++i) {
        y(i, j) = std::exp(av(i, j) - m);
        z += y(i, j);
      }
      y.col(j) /= z;
    }
  }
  Mat yc = y;  // captured copy for the backward rule
  return make_op(std::move(y), {a}, [axis, yc = std::move(yc)](detail::Node& n) {
    auto& p = *n.parents[0];
    if (!p.requires_grad) return;
    Mat dx(yc.rows(), yc.cols());
    if (axis == 1) {
      for (Eigen::Index i = 0; i < yc.rows(); ++i) {
        double dot = n.grad.row(i).cwiseProduct(yc.row(i)).sum();
        dx.row(i) = (yc.row(i).array() * (n.grad.row(i).array() - dot)).matrix();
      }
    } else {
      for (Eigen::Index j = 0; j < yc.cols(); ++j) {
        double dot = n.grad.col(j).cwiseProduct(yc.col(j)).sum();
        dx.col(j) = (yc.col(j).array() * (n.grad.col(j).array() - dot)).matrix();
      }
    }
    p.accumulate(dx);
  });
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw ContractError("concat: no inputs");
  if (axis != 0 && axis != 1) throw ContractError("concat: axis must be 0 or 1");
  Eigen::Index total = 0;
  const Mat& first = parts[0].value();
  for (const auto& t : parts) {
    const Mat& v = t.value();
    if (axis == 0 && v.cols() != first.cols())
      throw DimensionError("concat: column mismatch " + shape_str(first) + " vs " + shape_str(v));
    if (axis == 1 && v.rows() != first.rows())
      throw DimensionError("concat: row mismatch " + shape_str(first) + " vs " + shape_str(v));
    total += (axis == 0) ? v.rows() : v.cols();
  }
  Mat out = (axis == 0) ? Mat(total, first.cols()) : Mat(first.rows(), total);
  Eigen::Index off = 0;
  std::vector<Eigen::Index> extents;
  extents.reserve(parts.size());
  for (const auto& t : parts) {
    const Mat& v = t.value();
    Eigen::Index n = (axis == 0) ? v.rows() : v.cols();
    if (axis == 0)
      out.middleRows(off, n) = v;
    else
      out.middleCols(off, n) = v;
    extents.push_back(n);
    off += n;
  }
  return make_op(std::move(out), parts, [axis, extents](detail::Node& n) {
    Eigen::Index off = 0;
    for (std::size_t k = 0; k < n.parents.size(); ++k) {
      auto& p = *n.parents[k];
      Eigen::Index ext = extents[k];
      if (p.requires_grad) {
        if (axis == 0)
          p.accumulate(n.grad.middleRows(off, ext));
        else
          p.accumulate(n.grad.middleCols(off, ext));
      }
      off += ext;
    }
  });
}

Tensor slice(const Tensor& a, Eigen::Index row0, Eigen::Index nrows, Eigen::Index col0,
             Eigen::Index ncols) {
  const Mat& av = a.value();
  if (row0 < 0 || col0 < 0 || nrows < 1 || ncols < 1 || row0 + nrows > av.rows() ||
      col0 + ncols > av.cols())
    throw DimensionError("slice: window [" + std::to_string(row0) + "," + std::to_string(nrows) +
                         "," + std::to_string(col0) + "," + std::to_string(ncols) +
                         "] out of bounds for " + shape_str(av));
  Mat out = av.block(row0, col0, nrows, ncols);
  return make_op(std::move(out), {a}, [row0, col0, nrows, ncols](detail::Node& n) {
    auto& p = *n.parents[0];
    if (!p.requires_grad) return;
    Mat g = Mat::Zero(p.value.rows(), p.value.cols());
    g.block(row0, col0, nrows, ncols) = n.grad;
    p.accumulate(g);
  });
}

Tensor transpose(const Tensor& a) {
  Mat out = a.value().transpose();
  return make_op(std::move(out), {a}, [](detail::Node& n) {
    if (n.parents[0]->requires_grad) n.parents[0]->accumulate(n.grad.transpose());
  });
}

Tensor reshape(const Tensor& a, Eigen::Index rows, Eigen::Index cols) {
  const Mat& av = a.value();
  if (rows * cols != av.size())
    throw DimensionError("reshape: cannot view " + shape_str(av) + " as " + std::to_string(rows) +
                         "x" + std::to_string(cols));
  // Row-major relabel of the same element order.
  Mat out = Eigen::Map<const Mat>(av.data(), rows, cols);
  return make_op(std::move(out), {a}, [](detail::Node& n) {
    auto& p = *n.parents[0];
    if (!p.requires_grad) return;
    Mat g = Eigen::Map<const Mat>(n.grad.data(), p.value.rows(), p.value.cols());
    p.accumulate(g);
  });
}

Tensor gather_rows(const Tensor& a, const std::vector<Eigen::Index>& idx) {
  const Mat& av = a.value();
  Mat out(static_cast<Eigen::Index>(idx.size()), av.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= av.rows())
      throw DimensionError("gather_rows: index " + std::to_string(idx[i]) + " out of range for " +
                           shape_str(av));
    out.row(static_cast<Eigen::Index>(i)) = av.row(idx[i]);
  }
  return make_op(std::move(out), {a}, [idx](detail::Node& n) {
    auto& p = *n.parents[0];
    if (!p.requires_grad) return;
    Mat g = Mat::Zero(p.value.rows(), p.value.cols());
    for (std::size_t i = 0; i < idx.size(); ++i)
      g.row(idx[i]) += n.grad.row(static_cast<Eigen::Index>(i));
    p.accumulate(g);
  });
}

Tensor sum(const Tensor& a) {
  Mat out(1, 1);
  out(0, 0) = a.value().sum();
  return make_op(std::move(out), {a}, [](detail::Node& n) {
    auto& p = *n.parents[0];
    if (p.requires_grad)
      p.accumulate(Mat::Constant(p.value.rows(), p.value.cols(), n.grad(0, 0)));
  });
}

Tensor mean(const Tensor& a) {
  Mat out(1, 1);
  out(0, 0) = a.value().mean();
  return make_op(std::move(out), {a}, [](detail::Node& n) {
    auto& p = *n.parents[0];
    if (p.requires_grad)
      p.accumulate(Mat::Constant(p.value.rows(), p.value.cols(),
                                 n.grad(0, 0) / static_cast<double>(p.value.size())));
  });
}

Tensor row_sum(const Tensor& a) {
  Mat out = a.value().rowwise().sum();
  return make_op(std::move(out), {a}, [](detail::Node& n) {
    auto& p = *n.parents[0];
    if (p.requires_grad) p.accumulate(n.grad.replicate(1, p.value.cols()));
  });
}

Tensor row_mean(const Tensor& a) {
  Mat out = a.value().rowwise().mean();
  return make_op(std::move(out), {a}, [](detail::Node& n) {
    auto& p = *n.parents[0];
    if (p.requires_grad)
      p.accumulate(n.grad.replicate(1, p.value.cols()) / static_cast<double>(p.value.cols()));
  });
}

}  // namespace dialgraph
