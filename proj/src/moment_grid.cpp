#include "vmr/moment_grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace vmr {

TemporalInterval make_interval(double start, double end) {
  if (!std::isfinite(start) || !std::isfinite(end)) {
    throw std::invalid_argument("interval endpoints must be finite");
  }
  if (start < 0.0) {
    throw std::invalid_argument("interval start must be non-negative, got " + std::to_string(start));
  }
  if (!(end > start)) {
    throw std::invalid_argument("interval end must exceed start");
  }
  return {start, end};
}

double iou(const TemporalInterval& a, const TemporalInterval& b) {
  const double inter = std::min(a.end, b.end) - std::max(a.start, b.start);
  if (inter <= 0.0) return 0.0;
  const double uni = std::max(a.end, b.end) - std::min(a.start, b.start);
  return inter / uni;
}

MomentGrid::MomentGrid(int num_clips, double clip_duration)
    : num_clips_(num_clips), clip_duration_(clip_duration) {
  if (num_clips <= 0) throw std::invalid_argument("moment grid needs at least one clip");
  if (!(clip_duration > 0.0) || !std::isfinite(clip_duration)) {
    throw std::invalid_argument("clip duration must be positive");
  }
  lookup_.assign(static_cast<std::size_t>(num_clips) * num_clips, -1);
  candidates_.reserve(static_cast<std::size_t>(num_clips) * (num_clips + 1) / 2);
  for (int a = 0; a < num_clips; ++a) {
    for (int b = a; b < num_clips; ++b) {
      lookup_[static_cast<std::size_t>(a) * num_clips + b] = static_cast<int>(candidates_.size());
      candidates_.push_back({a, b});
    }
  }
}

bool MomentGrid::valid(int a, int b) const {
  return a >= 0 && b < num_clips_ && a <= b;
}

int MomentGrid::index_of(int a, int b) const {
  if (a < 0 || b < 0 || a >= num_clips_ || b >= num_clips_) return -1;
  return lookup_[static_cast<std::size_t>(a) * num_clips_ + b];
}

TemporalInterval MomentGrid::interval(std::size_t k) const {
  const CellIndex& c = candidates_.at(k);
  return {c.start_clip * clip_duration_, (c.end_clip + 1) * clip_duration_};
}

std::size_t MomentGrid::best_cell(const TemporalInterval& span) const {
  std::size_t best = 0;
  double best_iou = -1.0;
  for (std::size_t k = 0; k < candidates_.size(); ++k) {
    const double v = iou(interval(k), span);
    if (v > best_iou) {
      best_iou = v;
      best = k;
    }
  }
  return best;
}

std::size_t MomentGrid::nearest_cell(const TemporalInterval& span) const {
  int a = static_cast<int>(std::lround(span.start / clip_duration_));
  int b = static_cast<int>(std::lround(span.end / clip_duration_)) - 1;
  a = std::clamp(a, 0, num_clips_ - 1);
  b = std::clamp(b, a, num_clips_ - 1);
  return static_cast<std::size_t>(index_of(a, b));
}

MomentGrid enumerate_candidates(int num_clips, double clip_duration) {
  return MomentGrid(num_clips, clip_duration);
}

std::vector<double> SupervisionMap::dense() const {
  std::vector<double> out(static_cast<std::size_t>(num_clips) * num_clips, kInvalidLabel);
  std::size_t k = 0;
  for (int a = 0; a < num_clips; ++a) {
    for (int b = a; b < num_clips; ++b) out[static_cast<std::size_t>(a) * num_clips + b] = values[k++];
  }
  return out;
}

std::vector<std::size_t> SupervisionMap::positives() const {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (values[k] >= kPositiveLabel) out.push_back(k);
  }
  return out;
}

SupervisionMap scaled_labels(const TemporalInterval& gt, const MomentGrid& grid, LabelRange range) {
  if (!(range.t_min >= 0.0 && range.t_min < range.t_max && range.t_max <= 1.0)) {
    throw std::invalid_argument("scaled labels need 0 <= t_min < t_max <= 1");
  }
  SupervisionMap map{grid.num_clips(), std::vector<double>(grid.num_candidates())};
  const double span = range.t_max - range.t_min;
  for (std::size_t k = 0; k < grid.num_candidates(); ++k) {
    const double y = (iou(grid.interval(k), gt) - range.t_min) / span;
    map.values[k] = std::clamp(y, 0.0, 1.0);
  }
  return map;
}

SupervisionMap zero_labels(const MomentGrid& grid) {
  return {grid.num_clips(), std::vector<double>(grid.num_candidates(), 0.0)};
}

}  // namespace vmr
