#pragma once

#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vmr/dataset.hpp"
#include "vmr/model.hpp"

namespace vmr {

inline const std::vector<double> kDefaultThresholds = {0.5, 0.7};

struct MetricsRecord {
  std::map<double, double> r1_at;  // IoU threshold m -> R@1(IoU > m)
  double miou = 0.0;
  std::size_t n_queries = 0;
  std::string split_tag = "iid";
};

nlohmann::json to_json(const MetricsRecord& m);
MetricsRecord metrics_from_json(const nlohmann::json& j);

/// Per query, IoU is the best over that query's ground truths; R@1 counts
/// IoU strictly above m. An empty query list gives zeros.
MetricsRecord evaluate(const std::vector<TemporalInterval>& predictions,
                       const std::vector<std::vector<TemporalInterval>>& ground_truths,
                       const std::vector<double>& thresholds = kDefaultThresholds, std::string split_tag = "iid");

/// Ground truths per query (enumerate_queries order): every annotation of
/// the same video with the same token sequence.
std::vector<std::vector<TemporalInterval>> ground_truths(const DatasetSplit& split);

/// Top-1 IoU per query.
std::vector<double> top1_ious(const std::vector<TemporalInterval>& predictions,
                              const std::vector<std::vector<TemporalInterval>>& ground_truths);

enum class OodPlacement { kPrepend, kAppend };

/// Inserts a rho-second clip of standard-normal features at the start of
/// every video (or the end, with kAppend), shifts annotations by rho when
/// prepending, and re-segments the clip sequence to `num_clips` (0 keeps the
/// current count) by sampling the clip under each new clip's center.
DatasetSplit ood_transform(const DatasetSplit& split, double rho, std::mt19937_64& rng, int num_clips = 0,
                           OodPlacement placement = OodPlacement::kPrepend);

/// Query-blind predictor voting each training annotation into its max-IoU cell.
class FreqPrior {
 public:
  static FreqPrior fit(const DatasetSplit& train, int num_clips);

  int num_clips() const { return num_clips_; }
  /// Normalized vote counts per candidate (grid order).
  const std::vector<double>& scores() const { return scores_; }
  std::size_t best_cell() const { return best_; }
  TemporalInterval predict(double duration) const;
  std::vector<TemporalInterval> predict(const DatasetSplit& split) const;

 private:
  int num_clips_ = 0;
  std::vector<double> scores_;
  std::size_t best_ = 0;
};

/// Scores of a blind-mode model for one query; no clip features are read.
template <typename T>
std::vector<double> blind_score(const Model<T>& model, const std::vector<int>& query);

struct BiasHeatmap {
  int num_clips = 0;
  std::vector<long> counts;  // T x T row-major, (start clip, end clip)
  long total = 0;

  long at(int a, int b) const { return counts[static_cast<std::size_t>(a * num_clips + b)]; }
  /// Annotations whose start clip lies before head_end of the video.
  long head_count(double head_end) const;
};

BiasHeatmap bias_heatmap(const DatasetSplit& split, int num_clips);
void write_heatmap_csv(const BiasHeatmap& h, const std::filesystem::path& path);
/// Square image, `cell_px` pixels per cell, darker for larger counts;
/// invalid cells are drawn light grey.
void write_heatmap_png(const BiasHeatmap& h, const std::filesystem::path& path, int cell_px = 16);

struct LengthBin {
  double lo = 0.0;  // exclusive
  double hi = 1.0;  // inclusive
  double share = 0.0;
  MetricsRecord metrics;
};

/// Groups queries by normalized ground-truth length L_mom / L_vid into
/// (edges[i], edges[i+1]] bins. Edges must start at 0 and end at 1.
std::vector<LengthBin> length_report(const std::vector<TemporalInterval>& predictions, const DatasetSplit& split,
                                     const std::vector<double>& edges,
                                     const std::vector<double>& thresholds = kDefaultThresholds);

/// Copy of `split` without annotations whose length is >= max_ratio of the
/// video; videos left without annotations are dropped.
DatasetSplit drop_long_moments(const DatasetSplit& split, double max_ratio = 0.5);

/// query_id,start,end,score rows; query_id is "<video_id>#<annotation index>".
void write_predictions_csv(const DatasetSplit& split, const std::vector<TemporalInterval>& predictions,
                           const std::vector<double>& scores, const std::filesystem::path& path);

}  // namespace vmr
