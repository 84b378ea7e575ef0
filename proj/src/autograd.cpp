#include "vmr/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace vmr::ag {

namespace {

template <typename T>
void require_same_shape(const Var<T>& a, const Var<T>& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                                std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()) + ")");
  }
}

template <typename T>
Tape<T>* tape_of(const Var<T>& a) {
  if (!a.valid()) throw std::invalid_argument("operation on an empty Var");
  return a.tape();
}

}  // namespace

template <typename T>
Var<T> Tape<T>::constant(Matrix<T> value) {
  return record(std::move(value), false, nullptr);
}

template <typename T>
Var<T> Tape<T>::variable(Matrix<T> value) {
  return record(std::move(value), true, nullptr);
}

template <typename T>
Var<T> Tape<T>::parameter(Parameter<T>& p) {
  return record(p.value, true, [&p](Node<T>& self) {
    if (p.grad.size() == 0) p.zero_grad();
    p.grad += self.grad;
  });
}

template <typename T>
Var<T> Tape<T>::record(Matrix<T> value, bool needs_grad, std::function<void(Node<T>&)> backward) {
  auto node = std::make_unique<Node<T>>();
  node->value = std::move(value);
  node->needs_grad = needs_grad;
  if (needs_grad) node->backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var<T>(this, nodes_.back().get());
}

template <typename T>
void Tape<T>::backward(const Var<T>& root) {
  if (root.rows() != 1 || root.cols() != 1) throw std::invalid_argument("backward needs a scalar root");
  if (!root.needs_grad()) return;
  root.node()->grad_buffer().setConstant(T(1));
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node<T>& n = **it;
    if (n.needs_grad && n.backward && n.grad.size() != 0) n.backward(n);
  }
}

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimensions differ");
  Node<T>* na = a.node();
  Node<T>* nb = b.node();
  Matrix<T> out = a.value() * b.value();
  return tape_of(a)->record(std::move(out), na->needs_grad || nb->needs_grad, [na, nb](Node<T>& self) {
    if (na->needs_grad) na->grad_buffer().noalias() += self.grad * nb->value.transpose();
    if (nb->needs_grad) nb->grad_buffer().noalias() += na->value.transpose() * self.grad;
  });
}

template <typename T>
Var<T> matmul_nt(const Var<T>& a, const Var<T>& b) {
  if (a.cols() != b.cols()) throw std::invalid_argument("matmul_nt: inner dimensions differ");
  Node<T>* na = a.node();
  Node<T>* nb = b.node();
  Matrix<T> out = a.value() * b.value().transpose();
  return tape_of(a)->record(std::move(out), na->needs_grad || nb->needs_grad, [na, nb](Node<T>& self) {
    if (na->needs_grad) na->grad_buffer().noalias() += self.grad * nb->value;
    if (nb->needs_grad) nb->grad_buffer().noalias() += self.grad.transpose() * na->value;
  });
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "add");
  Node<T>* na = a.node();
  Node<T>* nb = b.node();
  return tape_of(a)->record(a.value() + b.value(), na->needs_grad || nb->needs_grad, [na, nb](Node<T>& self) {
    if (na->needs_grad) na->grad_buffer() += self.grad;
    if (nb->needs_grad) nb->grad_buffer() += self.grad;
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "sub");
  Node<T>* na = a.node();
  Node<T>* nb = b.node();
  return tape_of(a)->record(a.value() - b.value(), na->needs_grad || nb->needs_grad, [na, nb](Node<T>& self) {
    if (na->needs_grad) na->grad_buffer() += self.grad;
    if (nb->needs_grad) nb->grad_buffer() -= self.grad;
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "mul");
  Node<T>* na = a.node();
  Node<T>* nb = b.node();
  Matrix<T> out = a.value().cwiseProduct(b.value());
  return tape_of(a)->record(std::move(out), na->needs_grad || nb->needs_grad, [na, nb](Node<T>& self) {
    if (na->needs_grad) na->grad_buffer() += self.grad.cwiseProduct(nb->value);
    if (nb->needs_grad) nb->grad_buffer() += self.grad.cwiseProduct(na->value);
  });
}

template <typename T>
Var<T> add_row(const Var<T>& a, const Var<T>& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw std::invalid_argument("add_row: row shape mismatch");
  Node<T>* na = a.node();
  Node<T>* nr = row.node();
  Matrix<T> out = a.value().rowwise() + nr->value.row(0);
  return tape_of(a)->record(std::move(out), na->needs_grad || nr->needs_grad, [na, nr](Node<T>& self) {
    if (na->needs_grad) na->grad_buffer() += self.grad;
    if (nr->needs_grad) nr->grad_buffer() += self.grad.colwise().sum();
  });
}

template <typename T>
Var<T> mul_row(const Var<T>& a, const Var<T>& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw std::invalid_argument("mul_row: row shape mismatch");
  Node<T>* na = a.node();
  Node<T>* nr = row.node();
  Matrix<T> out = a.value().array().rowwise() * nr->value.row(0).array();
  return tape_of(a)->record(std::move(out), na->needs_grad || nr->needs_grad, [na, nr](Node<T>& self) {
    if (na->needs_grad) na->grad_buffer().array() += self.grad.array().rowwise() * nr->value.row(0).array();
    if (nr->needs_grad) nr->grad_buffer() += self.grad.cwiseProduct(na->value).colwise().sum();
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, T factor) {
  Node<T>* na = a.node();
  return tape_of(a)->record(a.value() * factor, na->needs_grad, [na, factor](Node<T>& self) {
    na->grad_buffer() += self.grad * factor;
  });
}

template <typename T>
Var<T> sigmoid(const Var<T>& a) {
  Node<T>* na = a.node();
  Matrix<T> out = a.value().unaryExpr([](T x) { return T(1) / (T(1) + std::exp(-x)); });
  return tape_of(a)->record(std::move(out), na->needs_grad, [na](Node<T>& self) {
    na->grad_buffer().array() += self.grad.array() * self.value.array() * (T(1) - self.value.array());
  });
}

template <typename T>
Var<T> relu(const Var<T>& a) {
  Node<T>* na = a.node();
  Matrix<T> out = a.value().cwiseMax(T(0));
  if (tape_of(a)->tracks_branches()) {
    for (Index i = 0; i < out.size(); ++i) tape_of(a)->note_branch(static_cast<std::uint64_t>(i) << 1 | (out.data()[i] > T(0)));
  }
  return tape_of(a)->record(std::move(out), na->needs_grad, [na](Node<T>& self) {
    na->grad_buffer().array() += (na->value.array() > T(0)).select(self.grad.array(), T(0));
  });
}

template <typename T>
Var<T> tanh(const Var<T>& a) {
  Node<T>* na = a.node();
  Matrix<T> out = a.value().array().tanh().matrix();
  return tape_of(a)->record(std::move(out), na->needs_grad, [na](Node<T>& self) {
    na->grad_buffer().array() += self.grad.array() * (T(1) - self.value.array().square());
  });
}

template <typename T>
Var<T> softmax_rows(const Var<T>& a) {
  Node<T>* na = a.node();
  Matrix<T> out = a.value();
  for (Index i = 0; i < out.rows(); ++i) {
    const T m = out.row(i).maxCoeff();
    out.row(i) = (out.row(i).array() - m).exp().matrix();
    out.row(i) /= out.row(i).sum();
  }
  return tape_of(a)->record(std::move(out), na->needs_grad, [na](Node<T>& self) {
    Matrix<T>& g = na->grad_buffer();
    for (Index i = 0; i < self.value.rows(); ++i) {
      const T dot = self.grad.row(i).dot(self.value.row(i));
      g.row(i).array() += self.value.row(i).array() * (self.grad.row(i).array() - dot);
    }
  });
}

template <typename T>
Var<T> concat_cols(const Var<T>& a, const Var<T>& b) {
  if (a.rows() != b.rows()) throw std::invalid_argument("concat_cols: row counts differ");
  Node<T>* na = a.node();
  Node<T>* nb = b.node();
  Matrix<T> out(a.rows(), a.cols() + b.cols());
  out << a.value(), b.value();
  const Index ca = a.cols();
  const Index cb = b.cols();
  return tape_of(a)->record(std::move(out), na->needs_grad || nb->needs_grad, [na, nb, ca, cb](Node<T>& self) {
    if (na->needs_grad) na->grad_buffer() += self.grad.leftCols(ca);
    if (nb->needs_grad) nb->grad_buffer() += self.grad.rightCols(cb);
  });
}

template <typename T>
Var<T> slice_cols(const Var<T>& a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw std::invalid_argument("slice_cols: out of range");
  Node<T>* na = a.node();
  Matrix<T> out = a.value().middleCols(start, count);
  return tape_of(a)->record(std::move(out), na->needs_grad, [na, start, count](Node<T>& self) {
    na->grad_buffer().middleCols(start, count) += self.grad;
  });
}

template <typename T>
Var<T> slice_rows(const Var<T>& a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) throw std::invalid_argument("slice_rows: out of range");
  Node<T>* na = a.node();
  Matrix<T> out = a.value().middleRows(start, count);
  return tape_of(a)->record(std::move(out), na->needs_grad, [na, start, count](Node<T>& self) {
    na->grad_buffer().middleRows(start, count) += self.grad;
  });
}

template <typename T>
Var<T> gather_rows(const Var<T>& a, std::span<const Index> rows) {
  Node<T>* na = a.node();
  Matrix<T> out(static_cast<Index>(rows.size()), a.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= a.rows()) throw std::invalid_argument("gather_rows: index out of range");
    out.row(static_cast<Index>(i)) = a.value().row(rows[i]);
  }
  std::vector<Index> idx(rows.begin(), rows.end());
  return tape_of(a)->record(std::move(out), na->needs_grad, [na, idx = std::move(idx)](Node<T>& self) {
    Matrix<T>& g = na->grad_buffer();
    for (std::size_t i = 0; i < idx.size(); ++i) g.row(idx[i]) += self.grad.row(static_cast<Index>(i));
  });
}

template <typename T>
Var<T> concat_rows(std::span<const Var<T>> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: nothing to concatenate");
  const Index cols = parts[0].cols();
  Index rows = 0;
  bool needs = false;
  std::vector<Node<T>*> nodes;
  for (const auto& p : parts) {
    if (p.cols() != cols) throw std::invalid_argument("concat_rows: column counts differ");
    rows += p.rows();
    needs = needs || p.needs_grad();
    nodes.push_back(p.node());
  }
  Matrix<T> out(rows, cols);
  Index at = 0;
  for (const auto& p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  return tape_of(parts[0])->record(std::move(out), needs, [nodes = std::move(nodes)](Node<T>& self) {
    Index offset = 0;
    for (Node<T>* n : nodes) {
      if (n->needs_grad) n->grad_buffer() += self.grad.middleRows(offset, n->value.rows());
      offset += n->value.rows();
    }
  });
}

template <typename T>
Var<T> sum(const Var<T>& a) {
  Node<T>* na = a.node();
  Matrix<T> out(1, 1);
  out(0, 0) = a.value().sum();
  return tape_of(a)->record(std::move(out), na->needs_grad, [na](Node<T>& self) {
    na->grad_buffer().array() += self.grad(0, 0);
  });
}

template <typename T>
Var<T> mean(const Var<T>& a) {
  if (a.value().size() == 0) throw std::invalid_argument("mean of an empty tensor");
  return scale(sum(a), T(1) / static_cast<T>(a.value().size()));
}

template <typename T>
Var<T> row_norms(const Var<T>& a) {
  Node<T>* na = a.node();
  Matrix<T> out = a.value().rowwise().norm();
  if (tape_of(a)->tracks_branches()) {
    for (Index i = 0; i < out.rows(); ++i) tape_of(a)->note_branch(static_cast<std::uint64_t>(i) << 1 | (out(i, 0) > T(0)));
  }
  return tape_of(a)->record(std::move(out), na->needs_grad, [na](Node<T>& self) {
    Matrix<T>& g = na->grad_buffer();
    for (Index i = 0; i < self.value.rows(); ++i) {
      const T r = self.value(i, 0);
      if (r > T(0)) g.row(i) += (self.grad(i, 0) / r) * na->value.row(i);
    }
  });
}

template <typename T>
Var<T> weighted_sum(std::span<const Var<T>> terms, std::span<const T> weights) {
  if (terms.empty() || terms.size() != weights.size()) throw std::invalid_argument("weighted_sum: size mismatch");
  Matrix<T> out = Matrix<T>::Zero(1, 1);
  bool needs = false;
  std::vector<Node<T>*> nodes;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (terms[i].rows() != 1 || terms[i].cols() != 1) throw std::invalid_argument("weighted_sum: terms must be 1x1");
    out(0, 0) += weights[i] * terms[i].item();
    needs = needs || terms[i].needs_grad();
    nodes.push_back(terms[i].node());
  }
  std::vector<T> w(weights.begin(), weights.end());
  return tape_of(terms[0])->record(std::move(out), needs, [nodes = std::move(nodes), w = std::move(w)](Node<T>& self) {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (nodes[i]->needs_grad) nodes[i]->grad_buffer()(0, 0) += w[i] * self.grad(0, 0);
    }
  });
}

template <typename T>
Var<T> bce_mean(const Var<T>& scores, std::span<const double> labels, T eps) {
  if (scores.cols() != 1 || static_cast<std::size_t>(scores.rows()) != labels.size()) {
    throw std::invalid_argument("bce: score/label shape mismatch");
  }
  if (labels.empty()) throw std::invalid_argument("bce: no valid cells");
  Node<T>* ns = scores.node();
  const T n = static_cast<T>(labels.size());
  Matrix<T> out = Matrix<T>::Zero(1, 1);
  const bool track = tape_of(scores)->tracks_branches();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const T raw = ns->value(static_cast<Index>(i), 0);
    const T s = std::clamp(raw, eps, T(1) - eps);
    if (track) tape_of(scores)->note_branch(static_cast<std::uint64_t>(i) << 2 | (raw < eps) | (raw > T(1) - eps) << 1);
    const T y = static_cast<T>(labels[i]);
    out(0, 0) -= y * std::log(s) + (T(1) - y) * std::log(T(1) - s);
  }
  out(0, 0) /= n;
  std::vector<double> y(labels.begin(), labels.end());
  return tape_of(scores)->record(std::move(out), ns->needs_grad, [ns, y = std::move(y), n, eps](Node<T>& self) {
    Matrix<T>& g = ns->grad_buffer();
    const T up = self.grad(0, 0) / n;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const T s = std::clamp(ns->value(static_cast<Index>(i), 0), eps, T(1) - eps);
      g(static_cast<Index>(i), 0) += up * (s - static_cast<T>(y[i])) / (s * (T(1) - s));
    }
  });
}

namespace {

template <typename T>
Matrix<T> pairwise_distances(const Matrix<T>& x) {
  const Index n = x.rows();
  Matrix<T> a = Matrix<T>::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      const T dist = (x.row(i) - x.row(j)).norm();
      a(i, j) = dist;
      a(j, i) = dist;
    }
  }
  return a;
}

template <typename T>
Matrix<T> double_center(const Matrix<T>& a) {
  const Eigen::Matrix<T, Eigen::Dynamic, 1> row_mean = a.rowwise().mean();
  const Eigen::Matrix<T, 1, Eigen::Dynamic> col_mean = a.colwise().mean();
  const T grand = a.mean();
  Matrix<T> c = a;
  c.colwise() -= row_mean;
  c.rowwise() -= col_mean;
  c.array() += grand;
  return c;
}

template <typename T>
void accumulate_distance_grad(const Matrix<T>& x, const Matrix<T>& dist, const Matrix<T>& weight, T upstream,
                              Matrix<T>& out) {
  const Index n = x.rows();
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (i == j || dist(i, j) <= T(0)) continue;
      out.row(i) += (T(2) * upstream * weight(i, j) / dist(i, j)) * (x.row(i) - x.row(j));
    }
  }
}

template <typename T>
struct DcorTerms {
  Matrix<T> a, b, ca, cb;
  T sxy = 0, sxx = 0, syy = 0;
};

template <typename T>
DcorTerms<T> dcor_terms(const Matrix<T>& x, const Matrix<T>& y) {
  if (x.rows() != y.rows()) throw std::invalid_argument("distance correlation: batches must pair by row");
  if (x.rows() < 2) throw std::invalid_argument("distance correlation needs at least two rows");
  DcorTerms<T> t;
  t.a = pairwise_distances(x);
  t.b = pairwise_distances(y);
  t.ca = double_center(t.a);
  t.cb = double_center(t.b);
  const T n2 = static_cast<T>(x.rows()) * static_cast<T>(x.rows());
  t.sxy = t.ca.cwiseProduct(t.cb).sum() / n2;
  t.sxx = t.ca.cwiseProduct(t.ca).sum() / n2;
  t.syy = t.cb.cwiseProduct(t.cb).sum() / n2;
  return t;
}

}  // namespace

template <typename T>
T distance_correlation_value(const Matrix<T>& x, const Matrix<T>& y, T eps) {
  const DcorTerms<T> t = dcor_terms(x, y);
  const T vx = std::sqrt(t.sxx);
  const T vy = std::sqrt(t.syy);
  if (vx < eps || vy < eps) return T(0);
  return std::sqrt(std::max(t.sxy, T(0))) / std::sqrt(vx * vy + eps);
}

template <typename T>
Var<T> distance_correlation(const Var<T>& x, const Var<T>& y, T eps) {
  DcorTerms<T> t = dcor_terms(x.value(), y.value());
  const T vx = std::sqrt(t.sxx);
  const T vy = std::sqrt(t.syy);
  Matrix<T> out = Matrix<T>::Zero(1, 1);
  Node<T>* nx = x.node();
  Node<T>* ny = y.node();
  if (vx < eps || vy < eps) return tape_of(x)->constant(std::move(out));

  if (tape_of(x)->tracks_branches()) tape_of(x)->note_branch(t.sxy > T(0));
  const T u = std::sqrt(std::max(t.sxy, T(0)));
  const T den = std::sqrt(vx * vy + eps);
  out(0, 0) = u / den;
  const bool needs = nx->needs_grad || ny->needs_grad;
  return tape_of(x)->record(std::move(out), needs, [nx, ny, t = std::move(t), u, den, vx, vy](Node<T>& self) {
    const T n2 = static_cast<T>(t.a.rows()) * static_cast<T>(t.a.rows());
    const T d_sxy = u > T(0) ? T(1) / (T(2) * u * den) : T(0);
    const T den3 = den * den * den;
    const T d_sxx = -u * vy / (T(4) * den3 * vx);
    const T d_syy = -u * vx / (T(4) * den3 * vy);
    const T g = self.grad(0, 0);
    if (nx->needs_grad) {
      const Matrix<T> w = (d_sxy * t.cb + (T(2) * d_sxx) * t.ca) / n2;
      accumulate_distance_grad(nx->value, t.a, w, g, nx->grad_buffer());
    }
    if (ny->needs_grad) {
      const Matrix<T> w = (d_sxy * t.ca + (T(2) * d_syy) * t.cb) / n2;
      accumulate_distance_grad(ny->value, t.b, w, g, ny->grad_buffer());
    }
  });
}

#define VMR_INSTANTIATE_AG(T)                                                              \
  template class Tape<T>;                                                                  \
  template Var<T> matmul(const Var<T>&, const Var<T>&);                                    \
  template Var<T> matmul_nt(const Var<T>&, const Var<T>&);                                 \
  template Var<T> add(const Var<T>&, const Var<T>&);                                       \
  template Var<T> sub(const Var<T>&, const Var<T>&);                                       \
  template Var<T> mul(const Var<T>&, const Var<T>&);                                       \
  template Var<T> add_row(const Var<T>&, const Var<T>&);                                   \
  template Var<T> mul_row(const Var<T>&, const Var<T>&);                                   \
  template Var<T> scale(const Var<T>&, T);                                                 \
  template Var<T> sigmoid(const Var<T>&);                                                  \
  template Var<T> relu(const Var<T>&);                                                     \
  template Var<T> tanh(const Var<T>&);                                                     \
  template Var<T> softmax_rows(const Var<T>&);                                             \
  template Var<T> concat_cols(const Var<T>&, const Var<T>&);                               \
  template Var<T> slice_cols(const Var<T>&, Index, Index);                                 \
  template Var<T> slice_rows(const Var<T>&, Index, Index);                                 \
  template Var<T> gather_rows(const Var<T>&, std::span<const Index>);                      \
  template Var<T> concat_rows(std::span<const Var<T>>);                                    \
  template Var<T> sum(const Var<T>&);                                                      \
  template Var<T> mean(const Var<T>&);                                                     \
  template Var<T> row_norms(const Var<T>&);                                                \
  template Var<T> weighted_sum(std::span<const Var<T>>, std::span<const T>);               \
  template Var<T> bce_mean(const Var<T>&, std::span<const double>, T);                     \
  template Var<T> distance_correlation(const Var<T>&, const Var<T>&, T);                   \
  template T distance_correlation_value(const Matrix<T>&, const Matrix<T>&, T);

VMR_INSTANTIATE_AG(float)
VMR_INSTANTIATE_AG(double)

#undef VMR_INSTANTIATE_AG

}  // namespace vmr::ag
