#include "vmr/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <png.h>

namespace vmr {

using nlohmann::json;

namespace {

std::string threshold_key(double m) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", m);
  return buf;
}

}  // namespace

json to_json(const MetricsRecord& m) {
  json r1 = json::object();
  for (const auto& [t, v] : m.r1_at) r1[threshold_key(t)] = v;
  return {{"r1_at", r1}, {"miou", m.miou}, {"n_queries", m.n_queries}, {"split_tag", m.split_tag}};
}

MetricsRecord metrics_from_json(const json& j) {
  MetricsRecord m;
  for (const auto& [k, v] : j.at("r1_at").items()) m.r1_at[std::stod(k)] = v.get<double>();
  m.miou = j.at("miou").get<double>();
  m.n_queries = j.at("n_queries").get<std::size_t>();
  m.split_tag = j.at("split_tag").get<std::string>();
  return m;
}

std::vector<double> top1_ious(const std::vector<TemporalInterval>& predictions,
                              const std::vector<std::vector<TemporalInterval>>& ground_truths) {
  if (predictions.size() != ground_truths.size()) {
    throw std::invalid_argument("evaluate: " + std::to_string(predictions.size()) + " predictions for " +
                                std::to_string(ground_truths.size()) + " queries");
  }
  std::vector<double> out;
  out.reserve(predictions.size());
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (ground_truths[i].empty()) throw std::invalid_argument("evaluate: query without ground truth");
    double best = 0.0;
    for (const auto& g : ground_truths[i]) best = std::max(best, iou(predictions[i], g));
    out.push_back(best);
  }
  return out;
}

MetricsRecord evaluate(const std::vector<TemporalInterval>& predictions,
                       const std::vector<std::vector<TemporalInterval>>& ground_truths,
                       const std::vector<double>& thresholds, std::string split_tag) {
  const auto ious = top1_ious(predictions, ground_truths);
  MetricsRecord m;
  m.split_tag = std::move(split_tag);
  m.n_queries = ious.size();
  for (double t : thresholds) m.r1_at[t] = 0.0;
  if (ious.empty()) return m;
  double total = 0.0;
  for (double v : ious) {
    total += v;
    for (auto& [t, r] : m.r1_at) r += v > t ? 1.0 : 0.0;
  }
  const auto n = static_cast<double>(ious.size());
  for (auto& [t, r] : m.r1_at) r /= n;
  m.miou = total / n;
  return m;
}

std::vector<std::vector<TemporalInterval>> ground_truths(const DatasetSplit& split) {
  std::vector<std::vector<TemporalInterval>> out;
  for (const QueryRef& q : enumerate_queries(split)) {
    const auto& anns = split.samples[q.sample].annotations;
    std::vector<TemporalInterval> gts;
    for (const auto& a : anns) {
      if (a.tokens == anns[q.annotation].tokens) gts.push_back(a.span);
    }
    out.push_back(std::move(gts));
  }
  return out;
}

DatasetSplit ood_transform(const DatasetSplit& split, double rho, std::mt19937_64& rng, int num_clips,
                           OodPlacement placement) {
  if (!(rho >= 0.0) || !std::isfinite(rho)) throw std::invalid_argument("ood_transform: rho must be >= 0");
  DatasetSplit out;
  out.name = split.name;
  out.samples.reserve(split.samples.size());
  std::normal_distribution<double> normal(0.0, 1.0);
  for (const VideoSample& s : split.samples) {
    VideoSample t;
    t.video_id = s.video_id;
    const double tau = s.duration;
    t.duration = tau + rho;
    const double shift = placement == OodPlacement::kPrepend ? rho : 0.0;
    for (const auto* group : {&s.annotations, &s.distractors}) {
      auto& dst = group == &s.annotations ? t.annotations : t.distractors;
      for (const Annotation& a : *group) dst.push_back({a.tokens, {a.span.start + shift, a.span.end + shift}});
    }
    const auto raw = s.clip_features.rows();
    const auto f = s.clip_features.cols();
    const Eigen::Index clips = num_clips > 0 ? num_clips : raw;
    t.clip_features.resize(clips, f);
    const double inserted_lo = placement == OodPlacement::kPrepend ? 0.0 : tau;
    for (Eigen::Index j = 0; j < clips; ++j) {
      const double center = (static_cast<double>(j) + 0.5) * t.duration / static_cast<double>(clips);
      if (center >= inserted_lo && center < inserted_lo + rho) {
        for (Eigen::Index c = 0; c < f; ++c) t.clip_features(j, c) = static_cast<double>(static_cast<float>(normal(rng)));
        continue;
      }
      const double local = center - shift;
      const auto src = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(std::floor(local / tau * raw)), 0, raw - 1);
      t.clip_features.row(j) = s.clip_features.row(src);
    }
    out.samples.push_back(std::move(t));
  }
  return out;
}

FreqPrior FreqPrior::fit(const DatasetSplit& train, int num_clips) {
  const MomentGrid grid = enumerate_candidates(num_clips);
  FreqPrior p;
  p.num_clips_ = num_clips;
  p.scores_.assign(grid.num_candidates(), 0.0);
  double total = 0.0;
  for (const auto& s : train.samples) {
    const MomentGrid g = grid.rescaled(s.duration / num_clips);
    for (const auto& a : s.annotations) {
      p.scores_[g.best_cell(a.span)] += 1.0;
      total += 1.0;
    }
  }
  if (total == 0.0) throw std::invalid_argument("freq_prior: training split has no annotations");
  for (double& v : p.scores_) v /= total;
  p.best_ = static_cast<std::size_t>(std::max_element(p.scores_.begin(), p.scores_.end()) - p.scores_.begin());
  return p;
}

TemporalInterval FreqPrior::predict(double duration) const {
  return enumerate_candidates(num_clips_, duration / num_clips_).interval(best_);
}

std::vector<TemporalInterval> FreqPrior::predict(const DatasetSplit& split) const {
  std::vector<TemporalInterval> out;
  for (const QueryRef& q : enumerate_queries(split)) out.push_back(predict(split.samples[q.sample].duration));
  return out;
}

template <typename T>
std::vector<double> blind_score(const Model<T>& model, const std::vector<int>& query) {
  if (model.config().mode != Mode::kBlind) throw std::invalid_argument("blind_score needs a blind-mode model");
  const std::vector<std::vector<int>> queries = {query};
  const std::vector<const FeatureMatrix*> none = {nullptr};
  return model.score(queries, none).front();
}

template std::vector<double> blind_score(const Model<float>&, const std::vector<int>&);
template std::vector<double> blind_score(const Model<double>&, const std::vector<int>&);

long BiasHeatmap::head_count(double head_end) const {
  long n = 0;
  for (int a = 0; a < num_clips; ++a) {
    if (static_cast<double>(a) >= head_end * num_clips) break;
    for (int b = a; b < num_clips; ++b) n += at(a, b);
  }
  return n;
}

BiasHeatmap bias_heatmap(const DatasetSplit& split, int num_clips) {
  const MomentGrid grid = enumerate_candidates(num_clips);
  BiasHeatmap h;
  h.num_clips = num_clips;
  h.counts.assign(static_cast<std::size_t>(num_clips) * num_clips, 0);
  for (const auto& s : split.samples) {
    const MomentGrid g = grid.rescaled(s.duration / num_clips);
    for (const auto& a : s.annotations) {
      const CellIndex& c = g.cell(g.best_cell(a.span));
      ++h.counts[static_cast<std::size_t>(c.start_clip * num_clips + c.end_clip)];
      ++h.total;
    }
  }
  return h;
}

void write_heatmap_csv(const BiasHeatmap& h, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write heatmap: " + path.string());
  for (int a = 0; a < h.num_clips; ++a) {
    for (int b = 0; b < h.num_clips; ++b) out << (b ? "," : "") << h.at(a, b);
    out << "\n";
  }
}

void write_heatmap_png(const BiasHeatmap& h, const std::filesystem::path& path, int cell_px) {
  const int side = h.num_clips * cell_px;
  FILE* fp = std::fopen(path.string().c_str(), "wb");
  if (!fp) throw std::runtime_error("cannot write heatmap image: " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw std::runtime_error("libpng failed writing " + path.string());
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, side, side, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const long peak = h.counts.empty() ? 0 : *std::max_element(h.counts.begin(), h.counts.end());
  std::vector<png_byte> row(static_cast<std::size_t>(side) * 3);
  for (int y = 0; y < side; ++y) {
    const int a = y / cell_px;
    for (int x = 0; x < side; ++x) {
      const int b = x / cell_px;
      png_byte r = 230, g = 230, bl = 230;
      if (a <= b) {
        const double v = peak > 0 ? static_cast<double>(h.at(a, b)) / static_cast<double>(peak) : 0.0;
        r = static_cast<png_byte>(255 - 225 * v);
        g = static_cast<png_byte>(255 - 180 * v);
        bl = static_cast<png_byte>(255 - 80 * v);
      }
      row[static_cast<std::size_t>(x) * 3] = r;
      row[static_cast<std::size_t>(x) * 3 + 1] = g;
      row[static_cast<std::size_t>(x) * 3 + 2] = bl;
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

std::vector<LengthBin> length_report(const std::vector<TemporalInterval>& predictions, const DatasetSplit& split,
                                     const std::vector<double>& edges, const std::vector<double>& thresholds) {
  if (edges.size() < 2 || edges.front() != 0.0 || edges.back() != 1.0 ||
      !std::is_sorted(edges.begin(), edges.end())) {
    throw std::invalid_argument("length bins must be increasing edges from 0 to 1");
  }
  const auto queries = enumerate_queries(split);
  const auto gts = ground_truths(split);
  if (predictions.size() != queries.size()) throw std::invalid_argument("length_report: prediction count mismatch");
  std::vector<LengthBin> bins(edges.size() - 1);
  std::vector<std::vector<TemporalInterval>> bin_pred(bins.size());
  std::vector<std::vector<std::vector<TemporalInterval>>> bin_gt(bins.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const VideoSample& s = split.samples[queries[i].sample];
    const double ratio = s.annotations[queries[i].annotation].span.length() / s.duration;
    std::size_t b = 0;
    while (b + 1 < bins.size() && ratio > edges[b + 1]) ++b;
    bin_pred[b].push_back(predictions[i]);
    bin_gt[b].push_back(gts[i]);
  }
  for (std::size_t b = 0; b < bins.size(); ++b) {
    bins[b].lo = edges[b];
    bins[b].hi = edges[b + 1];
    bins[b].share = queries.empty() ? 0.0 : static_cast<double>(bin_pred[b].size()) / queries.size();
    bins[b].metrics = evaluate(bin_pred[b], bin_gt[b], thresholds, "bin");
  }
  return bins;
}

DatasetSplit drop_long_moments(const DatasetSplit& split, double max_ratio) {
  DatasetSplit out;
  out.name = split.name;
  for (const auto& s : split.samples) {
    VideoSample kept = s;
    kept.annotations.clear();
    for (const auto& a : s.annotations) {
      if (a.span.length() / s.duration < max_ratio) kept.annotations.push_back(a);
    }
    if (!kept.annotations.empty()) out.samples.push_back(std::move(kept));
  }
  return out;
}

void write_predictions_csv(const DatasetSplit& split, const std::vector<TemporalInterval>& predictions,
                           const std::vector<double>& scores, const std::filesystem::path& path) {
  const auto queries = enumerate_queries(split);
  if (predictions.size() != queries.size()) throw std::invalid_argument("prediction count mismatch");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write predictions: " + path.string());
  out << "query_id,start,end,score\n";
  char buf[160];
  for (std::size_t i = 0; i < queries.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%s#%zu,%.9g,%.9g,%.9g\n", split.samples[queries[i].sample].video_id.c_str(),
                  queries[i].annotation, predictions[i].start, predictions[i].end,
                  i < scores.size() ? scores[i] : 0.0);
    out << buf;
  }
}

}  // namespace vmr
