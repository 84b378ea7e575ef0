#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "vmr/dataset.hpp"
#include "vmr/model.hpp"

namespace vmr {

enum class DcorScope { kPositives, kAllCells };

struct TrainConfig {
  ModelConfig model;
  double lambda1 = 1.0;
  double lambda2 = 0.001;
  double learning_rate = 1e-4;
  int batch_size = 32;
  int epochs = 20;
  std::uint64_t seed = 0;
  LabelRange labels;
  DcorScope dcor_scope = DcorScope::kPositives;
  /// Videos per frozen forward pass during validation and prediction.
  int eval_batch = 64;

  void validate() const;
  /// Loss weights after mode and ablations are applied.
  double effective_lambda1() const;
  double effective_lambda2() const;
  bool uses_counterfactual() const;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Per-term values of one loss evaluation. Inactive terms are zero and
/// carry an invalid Var.
template <typename T>
struct LossTerms {
  ag::Var<T> total;
  ag::Var<T> bce_pos;
  ag::Var<T> bce_neg;
  ag::Var<T> recon;
  ag::Var<T> indep;
};

/// One training example: a query against a video with its supervision.
struct Pair {
  const std::vector<int>* query = nullptr;
  const FeatureMatrix* clips = nullptr;
  const std::vector<double>* labels = nullptr;  // per candidate; nullptr means all zeros
};

/// L = L+_bce + L-_bce + l1 * L_recon + l2 * L_indep over one batch of
/// positive pairs and their counterfactual negatives (possibly none).
/// Throws TrainingError naming the first non-finite term.
template <typename T>
LossTerms<T> total_loss(const Model<T>& model, Binding<T>& bind, std::span<const Pair> positives,
                        std::span<const Pair> negatives, double lambda1, double lambda2,
                        DcorScope scope = DcorScope::kPositives);

/// Draws negative videos for queries: a video qualifies when none of its
/// annotations or distractors shares the query's content key.
class CounterfactualSampler {
 public:
  explicit CounterfactualSampler(const DatasetSplit& corpus);

  /// Uniform over eligible videos; nullopt when there is none.
  std::optional<std::size_t> sample(const std::vector<std::string>& query_tokens, std::mt19937_64& rng);
  const std::vector<std::size_t>& eligible(const std::vector<std::string>& query_tokens);
  std::size_t skipped() const { return skipped_; }

 private:
  std::vector<std::vector<std::string>> keys_;  // per video
  std::map<std::string, std::vector<std::size_t>> cache_;
  std::size_t skipped_ = 0;
};

template <typename T>
class Adam {
 public:
  explicit Adam(ParameterSet<T>& params, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step();
  long steps() const { return t_; }

 private:
  ParameterSet<T>& params_;
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<ag::Matrix<T>> m_, v_;
};

struct TraceRow {
  int epoch = 0;
  double l_bce_pos = 0.0;
  double l_bce_neg = 0.0;
  double l_recon = 0.0;
  double l_indep = 0.0;
  double dcor = 0.0;
  double val_miou = 0.0;
};

template <typename T>
struct TrainResult {
  std::unique_ptr<Model<T>> model;  // best epoch by validation mIoU
  Vocabulary vocab;
  std::vector<TraceRow> trace;
  int best_epoch = 0;
  std::size_t skipped_negatives = 0;
};

/// Scaled-IoU labels of every query in `split`, indexed like enumerate_queries.
std::vector<std::vector<double>> query_labels(const DatasetSplit& split, const MomentGrid& grid, LabelRange range);

/// Trains from `train`, selecting the epoch with the best mIoU on `val`
/// (the last epoch when val is empty). Deterministic given config.seed.
template <typename T>
TrainResult<T> train(const TrainConfig& config, const DatasetSplit& train, const DatasetSplit& val,
                     const std::function<void(const TraceRow&)>& on_epoch = {});

/// Top-1 interval per query of `split` (enumerate_queries order).
template <typename T>
std::vector<TemporalInterval> predict_top1(const Model<T>& model, const Vocabulary& vocab, const DatasetSplit& split,
                                           int eval_batch = 64, std::vector<double>* top_scores = nullptr);

/// dCor(c, l) over the positive cells of `split` (0 when the model has no
/// disentangled factors or fewer than two positives).
template <typename T>
double probe_dcor(const Model<T>& model, const Vocabulary& vocab, const DatasetSplit& split, LabelRange range,
                  int eval_batch = 64);

void write_trace_csv(const std::vector<TraceRow>& trace, const std::filesystem::path& path);

// ---- checkpoints ----

template <typename T>
struct Checkpoint {
  std::unique_ptr<Model<T>> model;
  Vocabulary vocab;
  TrainConfig config;
  int epoch = 0;
  std::string rng_state;
};

/// "VMRCKPT1", u64 manifest size, JSON manifest, then every parameter as
/// little-endian f64 in manifest order.
template <typename T>
void save_checkpoint(const std::filesystem::path& path, const Model<T>& model, const Vocabulary& vocab,
                     const TrainConfig& config, int epoch, const std::string& rng_state = {});

template <typename T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path);

// ---- gradient verification ----

struct GradCheckEntry {
  std::string group;
  std::size_t coords = 0;
  std::size_t skipped = 0;  // coordinates resampled because the stencil crossed a kink
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
};

struct GradCheckOptions {
  std::size_t coords_per_group = 50;
  double step = 1e-3;
  /// Denominator floor of |a - n| / max(|a|, |n|, floor).
  double floor = 1e-6;
  std::uint64_t seed = 0;
};

using LossBuilder = std::function<ag::Var<double>(Binding<double>&)>;

/// Compares analytic gradients of `loss` with a fourth-order central
/// difference. Coordinates whose stencil changes the tape's branch signature
/// straddle a rectifier, max or clamp switch and are resampled.
/// `corrupt`, if set, perturbs the analytic gradients before comparison.
std::vector<GradCheckEntry> grad_check(ParameterSet<double>& params, const LossBuilder& loss,
                                       const GradCheckOptions& options = {},
                                       const std::function<void(ParameterSet<double>&)>& corrupt = {});

struct GradProbeResult {
  std::string probe;
  std::vector<GradCheckEntry> entries;

  double max_rel_error() const;
};

/// Gradient checks on a small double-precision model (d=16, T=4) built from
/// synthetic data. Probes cover each loss term alone and the full loss for
/// both heads, both prior modes and the baseline and blind modes, so every
/// trainable parameter is reached by at least one probe.
std::vector<GradProbeResult> run_grad_probes(const GradCheckOptions& options = {});

}  // namespace vmr
