#include "vmr/grid_ops.hpp"

#include <stdexcept>

namespace vmr::ag {

ConvPlan ConvPlan::build(const MomentGrid& grid, int kernel, int videos) {
  if (kernel <= 0 || kernel % 2 == 0) throw std::invalid_argument("conv kernel size must be odd and positive");
  if (videos < 1) throw std::invalid_argument("conv plan needs at least one video");
  ConvPlan plan;
  plan.num_clips = grid.num_clips();
  plan.kernel = kernel;
  const auto cells = static_cast<Index>(grid.num_candidates());
  plan.num_cells = cells * videos;
  const int r = kernel / 2;
  std::vector<Index> one;
  one.reserve(static_cast<std::size_t>(cells) * kernel * kernel);
  for (const CellIndex& c : grid.candidates()) {
    for (int di = -r; di <= r; ++di) {
      for (int dj = -r; dj <= r; ++dj) one.push_back(grid.index_of(c.start_clip + di, c.end_clip + dj));
    }
  }
  plan.taps.reserve(one.size() * videos);
  for (int v = 0; v < videos; ++v) {
    for (Index t : one) plan.taps.push_back(t < 0 ? -1 : t + v * cells);
  }
  const int k2 = kernel * kernel;
  plan.tap_runs.resize(k2);
  plan.tap_rows.assign(k2, 0);
  for (int t = 0; t < k2; ++t) {
    auto& runs = plan.tap_runs[static_cast<std::size_t>(t)];
    for (Index i = 0; i < plan.num_cells; ++i) {
      const Index src = plan.taps[static_cast<std::size_t>(i) * k2 + t];
      if (src < 0) continue;
      ++plan.tap_rows[static_cast<std::size_t>(t)];
      if (!runs.empty() && runs.back().dst + runs.back().len == i && runs.back().src + runs.back().len == src) {
        ++runs.back().len;
      } else {
        runs.push_back({i, src, 1});
      }
    }
  }
  return plan;
}

template <typename T>
Var<T> grid_conv(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, const ConvPlan& plan) {
  const Index cin = x.cols();
  const Index cout = weight.cols();
  const int taps = plan.taps_per_cell();
  if (x.rows() != plan.num_cells) throw std::invalid_argument("grid_conv: input rows do not match the grid");
  if (weight.rows() != taps * cin) throw std::invalid_argument("grid_conv: weight rows must be kernel^2 * c_in");
  if (bias.rows() != 1 || bias.cols() != cout) throw std::invalid_argument("grid_conv: bias must be 1 x c_out");

  // One GEMM per tap over the cells whose tap source is valid; padding taps
  // contribute nothing and are skipped.
  const Index n = plan.num_cells;
  const Matrix<T>& xv = x.value();
  const Matrix<T>& wv = weight.value();
  Matrix<T> out(n, cout);
  out.rowwise() = bias.value().row(0);
  Matrix<T> buf;
  Matrix<T> prod;
  for (int t = 0; t < taps; ++t) {
    const auto& runs = plan.tap_runs[static_cast<std::size_t>(t)];
    const Index m = plan.tap_rows[static_cast<std::size_t>(t)];
    if (m == 0) continue;
    buf.resize(m, cin);
    Index at = 0;
    for (const auto& r : runs) {
      buf.middleRows(at, r.len) = xv.middleRows(r.src, r.len);
      at += r.len;
    }
    prod.resize(m, cout);
    prod.noalias() = buf * wv.middleRows(t * cin, cin);
    at = 0;
    for (const auto& r : runs) {
      out.middleRows(r.dst, r.len) += prod.middleRows(at, r.len);
      at += r.len;
    }
  }

  Node<T>* nx = x.node();
  Node<T>* nw = weight.node();
  Node<T>* nb = bias.node();
  const bool needs = nx->needs_grad || nw->needs_grad || nb->needs_grad;
  if (!needs) return x.tape()->constant(std::move(out));
  return x.tape()->record(std::move(out), true, [nx, nw, nb, &plan, cin, cout, taps](Node<T>& self) {
    if (nb->needs_grad) nb->grad_buffer() += self.grad.colwise().sum();
    if (!nw->needs_grad && !nx->needs_grad) return;
    Matrix<T> xg;
    Matrix<T> gg;
    Matrix<T> dx;
    for (int t = 0; t < taps; ++t) {
      const auto& runs = plan.tap_runs[static_cast<std::size_t>(t)];
      const Index m = plan.tap_rows[static_cast<std::size_t>(t)];
      if (m == 0) continue;
      gg.resize(m, cout);
      Index at = 0;
      for (const auto& r : runs) {
        gg.middleRows(at, r.len) = self.grad.middleRows(r.dst, r.len);
        at += r.len;
      }
      if (nw->needs_grad) {
        xg.resize(m, cin);
        at = 0;
        for (const auto& r : runs) {
          xg.middleRows(at, r.len) = nx->value.middleRows(r.src, r.len);
          at += r.len;
        }
        nw->grad_buffer().middleRows(t * cin, cin).noalias() += xg.transpose() * gg;
      }
      if (nx->needs_grad) {
        dx.resize(m, cin);
        dx.noalias() = gg * nw->value.middleRows(t * cin, cin).transpose();
        Matrix<T>& gx = nx->grad_buffer();
        at = 0;
        for (const auto& r : runs) {
          gx.middleRows(r.src, r.len) += dx.middleRows(at, r.len);
          at += r.len;
        }
      }
    }
  });
}

template <typename T>
Var<T> stacked_max_pool(const Var<T>& clips, const MomentGrid& grid) {
  const int num_clips = grid.num_clips();
  if (clips.rows() == 0 || clips.rows() % num_clips != 0) {
    throw std::invalid_argument("stacked_max_pool: clip count does not match the grid");
  }
  const Index videos = clips.rows() / num_clips;
  const Index d = clips.cols();
  const Index n = static_cast<Index>(grid.num_candidates());
  const Matrix<T>& h = clips.value();
  Matrix<T> out(n * videos, d);
  Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> arg(n * videos, d);
  Index k = 0;
  for (int base = 0; base < clips.rows(); base += num_clips) {
    for (int a = base; a < base + num_clips; ++a) {
      for (int b = a; b < base + num_clips; ++b, ++k) {
        if (b == a) {
          out.row(k) = h.row(a);
          arg.row(k).setConstant(a);
          continue;
        }
        // Reuse the (a, b - 1) pool, which is the previous row in candidate order.
        for (Index c = 0; c < d; ++c) {
          if (h(b, c) > out(k - 1, c)) {
            out(k, c) = h(b, c);
            arg(k, c) = b;
          } else {
            out(k, c) = out(k - 1, c);
            arg(k, c) = arg(k - 1, c);
          }
        }
      }
    }
  }
  if (clips.tape()->tracks_branches()) {
    for (Index i = 0; i < arg.size(); ++i) clips.tape()->note_branch(static_cast<std::uint64_t>(arg.data()[i]));
  }
  Node<T>* nc = clips.node();
  return clips.tape()->record(std::move(out), nc->needs_grad, [nc, arg = std::move(arg)](Node<T>& self) {
    Matrix<T>& g = nc->grad_buffer();
    for (Index k = 0; k < arg.rows(); ++k) {
      for (Index c = 0; c < arg.cols(); ++c) g(arg(k, c), c) += self.grad(k, c);
    }
  });
}

template Var<float> grid_conv(const Var<float>&, const Var<float>&, const Var<float>&, const ConvPlan&);
template Var<double> grid_conv(const Var<double>&, const Var<double>&, const Var<double>&, const ConvPlan&);
template Var<float> stacked_max_pool(const Var<float>&, const MomentGrid&);
template Var<double> stacked_max_pool(const Var<double>&, const MomentGrid&);

}  // namespace vmr::ag
