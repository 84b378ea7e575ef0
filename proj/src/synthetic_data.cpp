#include "vmr/synthetic_data.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vmr {

namespace {

constexpr std::uint64_t kSignatureStream = 0x5167;
constexpr std::uint64_t kSplitStreams[] = {0x7261, 0x7661, 0x7465};  // train, val, test

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

bool known_verb(const BiasSpec& spec, const std::string& verb) {
  return spec.verb_laws.contains(verb) || std::find(spec.verbs.begin(), spec.verbs.end(), verb) != spec.verbs.end();
}

std::pair<double, double> region_range(const BiasSpec& spec, Region r) {
  switch (r) {
    case Region::kHead:
      return {0.0, spec.head_end};
    case Region::kMiddle:
      return {spec.head_end, spec.tail_start};
    case Region::kTail:
      return {spec.tail_start, 1.0};
  }
  return {0.0, 1.0};
}

bool overlaps(const TemporalInterval& a, const TemporalInterval& b) {
  return std::min(a.end, b.end) > std::max(a.start, b.start);
}

}  // namespace

RegionLaw BiasSpec::law_for(const std::string& verb) const {
  if (auto it = verb_laws.find(verb); it != verb_laws.end()) return it->second;
  const auto pos = std::find(verbs.begin(), verbs.end(), verb);
  if (pos == verbs.end()) throw std::invalid_argument("unknown verb '" + verb + "'");
  const double rest = 1.0 - head_bias;
  const bool tail_heavy = (pos - verbs.begin()) % 2 == 0;
  return tail_heavy ? RegionLaw{head_bias, 0.2 * rest, 0.8 * rest} : RegionLaw{head_bias, 0.8 * rest, 0.2 * rest};
}

void BiasSpec::validate() const {
  if (verbs.empty() || objects.empty()) throw std::invalid_argument("bias spec needs verbs and objects");
  if (!(head_bias >= 0.0 && head_bias <= 1.0)) throw std::invalid_argument("head_bias must lie in [0, 1]");
  if (!(0.0 < head_end && head_end < tail_start && tail_start < 1.0)) {
    throw std::invalid_argument("regions must partition [0, 1] as 0 < head_end < tail_start < 1");
  }
  if (!(length_mean > 0.0 && length_std >= 0.0 && min_length > 0.0 && min_length <= 1.0)) {
    throw std::invalid_argument("bad moment length law");
  }
  for (const auto& [verb, law] : verb_laws) {
    const double total = law.head + law.middle + law.tail;
    if (law.head < 0 || law.middle < 0 || law.tail < 0 || std::abs(total - 1.0) > 1e-9) {
      throw std::invalid_argument("region law for '" + verb + "' must be a probability vector");
    }
  }
}

Region region_of(const BiasSpec& spec, double start_fraction) {
  if (start_fraction < spec.head_end) return Region::kHead;
  if (start_fraction < spec.tail_start) return Region::kMiddle;
  return Region::kTail;
}

TemporalInterval sample_biased_location(const BiasSpec& spec, const std::string& verb, double duration,
                                        std::mt19937_64& rng, int num_clips) {
  if (!known_verb(spec, verb)) throw std::invalid_argument("unknown verb '" + verb + "'");
  if (!(duration > 0.0)) throw std::invalid_argument("duration must be positive");
  const RegionLaw law = spec.law_for(verb);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng);
  const Region region = u < law.head ? Region::kHead : (u < law.head + law.middle ? Region::kMiddle : Region::kTail);
  const auto [lo, hi] = region_range(spec, region);
  std::normal_distribution<double> length_law(spec.length_mean, spec.length_std);
  const double length_fraction = std::max(spec.min_length, length_law(rng));

  // Head moments crowd the opening of the video; other regions are flat.
  const double v = unit(rng);
  const double offset = region == Region::kHead ? v * v : v;

  if (num_clips <= 0) {
    const double start = (lo + (hi - lo) * offset) * duration;
    const double length = std::min(length_fraction * duration, duration - start);
    return {start, start + length};
  }

  const int first = static_cast<int>(std::ceil(lo * num_clips - 1e-12));
  const int last = std::min(num_clips, static_cast<int>(std::ceil(hi * num_clips - 1e-12))) - 1;
  if (last < first) throw std::invalid_argument("region is narrower than one clip; use more clips");
  const int a = std::min(last, first + static_cast<int>(offset * (last - first + 1)));
  const int clips = std::clamp(static_cast<int>(std::lround(length_fraction * num_clips)), 1, num_clips - a);
  const double step = duration / num_clips;
  return {a * step, (a + clips) * step};
}

void SyntheticConfig::validate() const {
  bias.validate();
  if (num_train < 1 || num_val < 0 || num_test < 1) throw std::invalid_argument("split sizes must be >= 1");
  if (num_clips < 3) throw std::invalid_argument("synthetic videos need at least 3 clips");
  if (feature_dim < 1) throw std::invalid_argument("feature_dim must be positive");
  if (!(signal >= 0.0) || !(noise >= 0.0)) throw std::invalid_argument("signal and noise must be non-negative");
  if (!(min_duration > 0.0 && max_duration >= min_duration)) throw std::invalid_argument("bad duration range");
  if (distractors < 0) throw std::invalid_argument("distractors must be non-negative");
}

std::mt19937_64 derived_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

std::vector<double> content_signature(const SyntheticConfig& config, std::uint64_t seed, const std::string& verb,
                                      const std::string& object) {
  std::vector<double> sig(static_cast<std::size_t>(config.feature_dim), 0.0);
  for (const std::string& word : {verb, object}) {
    auto rng = derived_rng(seed, kSignatureStream, fnv1a(word));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& v : sig) v += normal(rng);
  }
  double norm = 0.0;
  for (double v : sig) norm += v * v;
  norm = std::sqrt(norm);
  for (double& v : sig) v /= norm;
  return sig;
}

namespace {

void paint(FeatureMatrix& features, const TemporalInterval& span, double duration, const std::vector<double>& sig,
           double strength) {
  const auto clips = features.rows();
  const double step = duration / static_cast<double>(clips);
  const auto a = static_cast<Eigen::Index>(std::lround(span.start / step));
  const auto e = std::min<Eigen::Index>(clips, static_cast<Eigen::Index>(std::lround(span.end / step)));
  for (Eigen::Index r = a; r < e; ++r) {
    for (Eigen::Index c = 0; c < features.cols(); ++c) features(r, c) += strength * sig[static_cast<std::size_t>(c)];
  }
}

VideoSample generate_sample(const SyntheticConfig& config, std::uint64_t seed, const std::string& split,
                            std::uint64_t stream, std::size_t index) {
  auto rng = derived_rng(seed, stream, index);
  const BiasSpec& bias = config.bias;
  std::uniform_real_distribution<double> dur(config.min_duration, config.max_duration);
  std::uniform_int_distribution<std::size_t> pick_verb(0, bias.verbs.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_object(0, bias.objects.size() - 1);
  std::normal_distribution<double> background(0.0, 1.0);

  VideoSample s;
  char id[32];
  std::snprintf(id, sizeof id, "%s_%05zu", split.c_str(), index);
  s.video_id = id;
  // Durations are multiples of 1/16 s, so clip boundaries and shifted
  // timestamps are exact binary fractions.
  const double raw = config.max_duration > config.min_duration ? dur(rng) : config.min_duration;
  s.duration = std::max(1.0 / 16.0, std::round(raw * 16.0) / 16.0);

  const std::string& verb = bias.verbs[pick_verb(rng)];
  const std::string& object = bias.objects[pick_object(rng)];
  const TemporalInterval target = sample_biased_location(bias, verb, s.duration, rng, config.num_clips);
  s.annotations.push_back({{"person", verb, object}, target});

  s.clip_features.resize(config.num_clips, config.feature_dim);
  for (Eigen::Index i = 0; i < s.clip_features.size(); ++i) {
    s.clip_features.data()[i] = config.noise * background(rng);
  }
  paint(s.clip_features, target, s.duration, content_signature(config, seed, verb, object), config.signal);

  const bool single_combo = bias.verbs.size() * bias.objects.size() < 2;
  for (int k = 0; k < config.distractors && !single_combo; ++k) {
    std::string dv;
    std::string dob;
    do {
      dv = bias.verbs[pick_verb(rng)];
      dob = bias.objects[pick_object(rng)];
    } while (dv == verb && dob == object);
    std::vector<TemporalInterval> taken = {target};
    for (const auto& d : s.distractors) taken.push_back(d.span);
    for (int attempt = 0; attempt < 20; ++attempt) {
      const TemporalInterval span = sample_biased_location(bias, dv, s.duration, rng, config.num_clips);
      if (std::none_of(taken.begin(), taken.end(), [&](const auto& t) { return overlaps(t, span); })) {
        s.distractors.push_back({{"person", dv, dob}, span});
        paint(s.clip_features, span, s.duration, content_signature(config, seed, dv, dob), config.signal);
        break;
      }
    }
  }
  // Round to the on-disk precision so files and memory agree exactly.
  for (Eigen::Index i = 0; i < s.clip_features.size(); ++i) {
    s.clip_features.data()[i] = static_cast<double>(static_cast<float>(s.clip_features.data()[i]));
  }
  return s;
}

DatasetSplit generate_split(const SyntheticConfig& config, std::uint64_t seed, const std::string& name,
                            std::uint64_t stream, int count) {
  DatasetSplit split{name, {}};
  split.samples.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) split.samples.push_back(generate_sample(config, seed, name, stream, i));
  return split;
}

}  // namespace

SyntheticDataset generate_dataset(const SyntheticConfig& config, std::uint64_t seed) {
  config.validate();
  return {generate_split(config, seed, "train", kSplitStreams[0], config.num_train),
          generate_split(config, seed, "val", kSplitStreams[1], config.num_val),
          generate_split(config, seed, "test", kSplitStreams[2], config.num_test)};
}

}  // namespace vmr
