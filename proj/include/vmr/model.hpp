#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "vmr/dataset.hpp"
#include "vmr/encoders.hpp"
#include "vmr/intervention.hpp"
#include "vmr/matchers.hpp"

namespace vmr {

/// kDcm: disentangle + intervene + counterfactual training.
/// kBaseline: the head sees the raw moment tensor v.
/// kBlind: the head sees only positional embeddings of the cells.
enum class Mode { kDcm, kBaseline, kBlind };

struct Ablations {
  bool no_disent = false;    // content = v, location = positional embedding
  bool no_indep = false;     // lambda2 = 0
  bool no_recon = false;     // lambda1 = 0
  bool no_loc_feat = false;  // v_bar = c
  bool no_counterf = false;  // drop the negative-pair loss
  bool no_interv = false;    // drop E[h] and the negative-pair loss

  bool any() const { return no_disent || no_indep || no_recon || no_loc_feat || no_counterf || no_interv; }
  bool operator==(const Ablations&) const = default;
};

struct ModelConfig {
  int d = 64;
  int num_clips = 16;
  int feature_dim = 32;
  int embed_dim = 300;
  int lstm_layers = 3;
  HeadKind head = HeadKind::kTcn;
  Mode mode = Mode::kDcm;
  PriorMode prior = PriorMode::kAbsorbed;
  Ablations ablations;
  /// Empty selects the head's default stack.
  std::vector<ConvLayerSpec> conv_stack;
  bool cmi_bias = false;
  double max_period = 10000.0;

  void validate() const;
};

std::string to_string(Mode mode);
std::string to_string(HeadKind head);
std::string to_string(PriorMode prior);
Mode mode_from_string(const std::string& s);
HeadKind head_from_string(const std::string& s);
PriorMode prior_from_string(const std::string& s);

/// Everything a loss needs from one forward pass over V videos (N cells each,
/// rows stacked per video).
template <typename T>
struct ForwardResult {
  ag::Var<T> scores;      // V*N x 1, sigmoid outputs
  ag::Var<T> content;     // V*N x d, DCM only
  ag::Var<T> location;    // V*N x d, DCM only
  ag::Var<T> positional;  // V*N x d constant positional embeddings
  int videos = 0;
};

template <typename T>
class Model {
 public:
  Model(ModelConfig config, std::size_t vocab_size);

  /// Each module draws from its own stream, so module initializations do not
  /// depend on which other modules exist.
  void init(std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const MomentGrid& grid() const { return grid_; }
  ParameterSet<T>& params() { return params_; }
  const ParameterSet<T>& params() const { return params_; }
  std::size_t vocab_size() const { return vocab_size_; }

  const QueryEncoder<T>& query_encoder() const { return query_; }
  const MomentEncoder<T>& moment_encoder() const { return moment_; }
  const Disentangler<T>& disentangler() const { return disentangler_; }
  const Intervention<T>& intervention() const { return intervention_; }
  const Matcher<T>& matcher() const { return matcher_; }
  ConvPlanCache& plans() const { return *plans_; }
  /// N x d positional embeddings of the grid cells.
  const ag::Matrix<T>& positional() const { return positional_; }

  /// One pass for V (query, video) pairs; clips holds V*T x f (ignored in
  /// blind mode).
  ForwardResult<T> forward(Binding<T>& bind, std::span<const std::vector<int>> queries,
                           const ag::Matrix<T>& clips) const;

  /// Forward-only scores for V pairs, one N-vector per pair.
  std::vector<std::vector<double>> score(std::span<const std::vector<int>> queries,
                                         std::span<const FeatureMatrix* const> videos) const;

 private:
  ModelConfig config_;
  std::size_t vocab_size_;
  MomentGrid grid_;
  ParameterSet<T> params_;
  QueryEncoder<T> query_;
  MomentEncoder<T> moment_;
  Disentangler<T> disentangler_;
  Intervention<T> intervention_;
  Matcher<T> matcher_;
  ag::Matrix<T> positional_;
  std::unique_ptr<ConvPlanCache> plans_;
};

/// Stacks clip features of several videos into one V*T x f matrix.
template <typename T>
ag::Matrix<T> stack_clips(std::span<const FeatureMatrix* const> videos, int num_clips, int feature_dim);

}  // namespace vmr
