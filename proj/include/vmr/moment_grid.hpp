#pragma once

#include <cstddef>
#include <optional>
#include <vector>

namespace vmr {

/// A [start, end) span in seconds.
struct TemporalInterval {
  double start = 0.0;
  double end = 0.0;

  double length() const { return end - start; }
  bool operator==(const TemporalInterval&) const = default;
};

/// Validates start >= 0, end > start, both finite. Throws std::invalid_argument.
TemporalInterval make_interval(double start, double end);

/// |a ∩ b| / |a ∪ b|.
double iou(const TemporalInterval& a, const TemporalInterval& b);

struct CellIndex {
  int start_clip = 0;
  int end_clip = 0;  // inclusive

  bool operator==(const CellIndex&) const = default;
};

/// The upper-triangular 2D moment map over T clips. Valid cells (a, b) with
/// a <= b are enumerated row-major; candidate k maps to
/// [a * clip_duration, (b + 1) * clip_duration).
class MomentGrid {
 public:
  MomentGrid(int num_clips, double clip_duration);

  int num_clips() const { return num_clips_; }
  double clip_duration() const { return clip_duration_; }
  std::size_t num_candidates() const { return candidates_.size(); }
  const std::vector<CellIndex>& candidates() const { return candidates_; }
  const CellIndex& cell(std::size_t k) const { return candidates_[k]; }

  bool valid(int a, int b) const;
  /// Candidate index of cell (a, b), or -1 for invalid / out-of-range cells.
  int index_of(int a, int b) const;

  TemporalInterval interval(std::size_t k) const;
  /// Candidate whose interval has the highest IoU with `span` (first wins on ties).
  std::size_t best_cell(const TemporalInterval& span) const;
  /// Candidate whose boundaries are closest to `span` after rounding to clips.
  std::size_t nearest_cell(const TemporalInterval& span) const;

  /// Same cell layout with a different clip duration.
  MomentGrid rescaled(double clip_duration) const { return MomentGrid(num_clips_, clip_duration); }

 private:
  int num_clips_;
  double clip_duration_;
  std::vector<CellIndex> candidates_;
  std::vector<int> lookup_;  // T*T -> candidate index or -1
};

/// Enumerates every (a <= b) candidate of a T-clip video; T = 0 throws.
MomentGrid enumerate_candidates(int num_clips, double clip_duration = 1.0);

inline constexpr double kInvalidLabel = -1.0;
inline constexpr double kPositiveLabel = 0.5;

/// Scaled-IoU supervision over the valid cells of a grid.
struct SupervisionMap {
  int num_clips = 0;
  std::vector<double> values;  // one per candidate, in grid order

  /// T x T row-major view; invalid cells hold kInvalidLabel.
  std::vector<double> dense() const;
  std::vector<std::size_t> positives() const;
};

struct LabelRange {
  double t_min = 0.5;
  double t_max = 1.0;
};

SupervisionMap scaled_labels(const TemporalInterval& gt, const MomentGrid& grid,
                             LabelRange range = {});

/// Label map that is zero everywhere (counterfactual supervision).
SupervisionMap zero_labels(const MomentGrid& grid);

}  // namespace vmr
