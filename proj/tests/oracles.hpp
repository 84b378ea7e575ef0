#pragma once

// Slow, direct reference implementations used to check the library.

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "vmr/model.hpp"

namespace vmr::oracle {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Intersection over union by cases on how the two intervals sit.
inline double iou(double s1, double e1, double s2, double e2) {
  if (e1 <= s2 || e2 <= s1) return 0.0;  // disjoint or touching
  const double inter = std::min(e1, e2) - std::max(s1, s2);
  const double hull = std::max(e1, e2) - std::min(s1, s2);
  return inter / hull;
}

inline Mat centered_distances(const Mat& x) {
  const long n = x.rows();
  Mat a(n, n);
  for (long i = 0; i < n; ++i) {
    for (long j = 0; j < n; ++j) {
      double s = 0.0;
      for (long c = 0; c < x.cols(); ++c) s += (x(i, c) - x(j, c)) * (x(i, c) - x(j, c));
      a(i, j) = std::sqrt(s);
    }
  }
  std::vector<double> row(n, 0.0), col(n, 0.0);
  double all = 0.0;
  for (long i = 0; i < n; ++i) {
    for (long j = 0; j < n; ++j) {
      row[i] += a(i, j) / n;
      col[j] += a(i, j) / n;
      all += a(i, j) / (double(n) * n);
    }
  }
  Mat out(n, n);
  for (long i = 0; i < n; ++i) {
    for (long j = 0; j < n; ++j) out(i, j) = a(i, j) - row[i] - col[j] + all;
  }
  return out;
}

// dCor = sqrt(dCov^2(x, y) / sqrt(dVar^2(x) dVar^2(y))).
inline double dcor(const Mat& x, const Mat& y) {
  const Mat a = centered_distances(x);
  const Mat b = centered_distances(y);
  const double n2 = double(x.rows()) * x.rows();
  double xy = 0.0, xx = 0.0, yy = 0.0;
  for (long i = 0; i < a.rows(); ++i) {
    for (long j = 0; j < a.cols(); ++j) {
      xy += a(i, j) * b(i, j) / n2;
      xx += a(i, j) * a(i, j) / n2;
      yy += b(i, j) * b(i, j) / n2;
    }
  }
  if (xx <= 0.0 || yy <= 0.0) return 0.0;
  return std::sqrt(std::max(xy, 0.0) / std::sqrt(xx * yy));
}

// One video's N x d cell features through a K x K convolution over the
// (start, end) grid, one output cell at a time. Taps outside the grid or
// below the diagonal read zero. Weight rows are grouped per tap, taps in
// row-major (start offset, end offset) order.
inline Mat conv_cells(const Mat& x, const Mat& weight, const Mat& bias, int num_clips, int kernel, bool relu) {
  const MomentGrid grid(num_clips, 1.0);
  const long d_in = x.cols();
  const long d_out = weight.cols();
  const int r = kernel / 2;
  Mat out(x.rows(), d_out);
  for (std::size_t k = 0; k < grid.num_candidates(); ++k) {
    const auto cell = grid.cell(k);
    for (long o = 0; o < d_out; ++o) {
      double acc = bias(0, o);
      int tap = 0;
      for (int di = -r; di <= r; ++di) {
        for (int dj = -r; dj <= r; ++dj, ++tap) {
          const int a = cell.start_clip + di, b = cell.end_clip + dj;
          if (a < 0 || b >= num_clips || a > b) continue;
          const int src = grid.index_of(a, b);
          for (long c = 0; c < d_in; ++c) acc += x(src, c) * weight(tap * d_in + c, o);
        }
      }
      out(long(k), o) = relu ? std::max(acc, 0.0) : acc;
    }
  }
  return out;
}

// Matcher logits of one video, one candidate at a time.
inline std::vector<double> matcher_logits(const Matcher<double>& m, const ParameterSet<double>& params,
                                          const Mat& q_bar, const Mat& x, int num_clips) {
  const long n = x.rows(), d = x.cols();
  const auto convs = [&](Mat h) {
    for (const auto& c : m.convs) h = conv_cells(h, params[c.weight].value, params[c.bias].value, num_clips, c.spec.kernel, c.spec.relu);
    return h;
  };
  std::vector<double> out(n, 0.0);
  if (m.kind == HeadKind::kCmi) {
    const Mat phi = convs(x);
    const Mat& w1 = params[m.w1].value;
    for (long k = 0; k < n; ++k) {
      for (long o = 0; o < w1.rows(); ++o) {
        double h = m.has_w1_bias ? params[m.w1_bias].value(0, o) : 0.0;
        for (long c = 0; c < d; ++c) {
          h += w1(o, c) * q_bar(k, c) * phi(k, c);
          h += w1(o, d + c) * (q_bar(k, c) + phi(k, c));
        }
        out[k] += params[m.w].value(0, o) * h;
      }
    }
    return out;
  }
  Mat fused(n, d);
  for (long k = 0; k < n; ++k) {
    for (long c = 0; c < d; ++c) fused(k, c) = q_bar(k, c) * x(k, c);
  }
  const Mat h = convs(fused);
  for (long k = 0; k < n; ++k) {
    for (long c = 0; c < h.cols(); ++c) out[k] += params[m.w].value(0, c) * h(k, c);
  }
  return out;
}

}  // namespace vmr::oracle
