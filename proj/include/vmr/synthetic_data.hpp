#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "vmr/dataset.hpp"

namespace vmr {

/// Probability that a verb's moment starts in the head, middle or tail
/// region of the video.
struct RegionLaw {
  double head = 1.0 / 3.0;
  double middle = 1.0 / 3.0;
  double tail = 1.0 / 3.0;
};

enum class Region { kHead, kMiddle, kTail };

/// Generative model of the location confound: long-tailed start locations
/// (most mass on the head region) and a verb-dependent split of the rest.
struct BiasSpec {
  std::vector<std::string> verbs = {"open", "close", "take", "put", "hold", "wash", "eat", "watch"};
  std::vector<std::string> objects = {"door", "window", "book", "cup", "laptop", "phone", "towel", "bag"};
  /// Explicit per-verb laws; verbs without one derive theirs from head_bias.
  std::map<std::string, RegionLaw> verb_laws;
  double head_bias = 0.8;
  /// Region boundaries as fractions of the duration: [0, head_end),
  /// [head_end, tail_start), [tail_start, 1].
  double head_end = 1.0 / 3.0;
  double tail_start = 2.0 / 3.0;
  /// Moment length law as a fraction of the video duration.
  double length_mean = 0.25;
  double length_std = 0.08;
  double min_length = 0.05;

  /// Verb i (in vocabulary order) puts head_bias on the head; even-indexed
  /// verbs send 80% of the remainder to the tail, odd-indexed ones to the
  /// middle.
  RegionLaw law_for(const std::string& verb) const;
  void validate() const;
};

/// Draws a moment for `verb`: a region from the verb's law, a start inside
/// that region (head starts follow lo + (hi - lo) u^2, others are
/// uniform), a length from the length law clipped to the video.
/// With num_clips > 0 the interval is snapped to clip boundaries while
/// keeping its start inside the drawn region.
TemporalInterval sample_biased_location(const BiasSpec& spec, const std::string& verb, double duration,
                                        std::mt19937_64& rng, int num_clips = 0);

/// Region whose start range contains `start_fraction`.
Region region_of(const BiasSpec& spec, double start_fraction);

struct SyntheticConfig {
  BiasSpec bias;
  int num_train = 2000;
  int num_val = 200;
  int num_test = 500;
  int num_clips = 16;
  int feature_dim = 32;
  /// Scale of the verb+object content signature inside target clips.
  double signal = 1.0;
  /// Standard deviation of the background clip noise.
  double noise = 1.0;
  double min_duration = 24.0;
  double max_duration = 36.0;
  int distractors = 1;

  void validate() const;
};

struct SyntheticDataset {
  DatasetSplit train;
  DatasetSplit val;
  DatasetSplit test;
};

/// One video and one "person VERB OBJECT" query per sample. Each sample
/// draws from its own stream seeded by (seed, split, index), so generation
/// is a pure function of (config, seed).
SyntheticDataset generate_dataset(const SyntheticConfig& config, std::uint64_t seed);

/// Unit content signature of a verb+object pair (depends on seed and f).
std::vector<double> content_signature(const SyntheticConfig& config, std::uint64_t seed, const std::string& verb,
                                      const std::string& object);

/// Stream for sample `index` of split `stream` under `seed`.
std::mt19937_64 derived_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

}  // namespace vmr
