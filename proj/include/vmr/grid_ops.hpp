#pragma once

#include <vector>

#include "vmr/autograd.hpp"
#include "vmr/moment_grid.hpp"

namespace vmr::ag {

/// Gather table for a KxK convolution restricted to the valid cells of a
/// moment grid. Zero padding: taps that fall outside the grid or on an
/// invalid (a > b) cell read zeros.
struct ConvPlan {
  int num_clips = 0;
  int kernel = 0;
  Index num_cells = 0;
  std::vector<Index> taps;  // num_cells * kernel^2, source cell or -1
  /// Per tap, maximal runs of consecutive destination cells whose valid
  /// sources are also consecutive.
  struct Run {
    Index dst = 0;
    Index src = 0;
    Index len = 0;
  };
  std::vector<std::vector<Run>> tap_runs;
  std::vector<Index> tap_rows;  // valid (destination, source) pairs per tap

  /// Plan for `videos` grids stacked row-wise (video v owns rows
  /// [v * cells, (v + 1) * cells)).
  static ConvPlan build(const MomentGrid& grid, int kernel, int videos = 1);
  int taps_per_cell() const { return kernel * kernel; }
};

/// Convolution over the valid cells. x is (cells x c_in), weight is
/// (kernel^2 * c_in x c_out) with one c_in-row block per tap in row-major
/// (d_start, d_end) order, bias is 1 x c_out.
template <typename T>
Var<T> grid_conv(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, const ConvPlan& plan);

/// Stacked max pooling: cell (a, b) = elementwise max of rows a..b of
/// `clips` (T x d), each cell computed from cell (a, b-1). Several videos
/// may be stacked row-wise (V*T rows in, V*N rows out).
template <typename T>
Var<T> stacked_max_pool(const Var<T>& clips, const MomentGrid& grid);

}  // namespace vmr::ag
