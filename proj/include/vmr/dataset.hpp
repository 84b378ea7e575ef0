#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "vmr/moment_grid.hpp"

namespace vmr {

using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Annotation {
  std::vector<std::string> tokens;
  TemporalInterval span;
};

struct VideoSample {
  std::string video_id;
  double duration = 0.0;
  FeatureMatrix clip_features;  // T_raw x f, clips evenly cover [0, duration]
  std::vector<Annotation> annotations;
  /// Content placed in the video that no query refers to. Used to keep
  /// counterfactual negatives honest; empty for ingested data.
  std::vector<Annotation> distractors;
};

struct DatasetSplit {
  std::string name;  // train, val or test
  std::vector<VideoSample> samples;

  std::size_t num_queries() const;
};

/// One query against one video: the unit that is scored and evaluated.
struct QueryRef {
  std::size_t sample = 0;
  std::size_t annotation = 0;
};

std::vector<QueryRef> enumerate_queries(const DatasetSplit& split);

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public std::runtime_error {
 public:
  ValidationError(const std::string& what, std::vector<std::string> offenders)
      : std::runtime_error(what), offenders_(std::move(offenders)) {}
  const std::vector<std::string>& offenders() const { return offenders_; }

 private:
  std::vector<std::string> offenders_;
};

/// Lowercases and splits on whitespace; punctuation becomes its own token.
std::vector<std::string> tokenize(const std::string& sentence);

/// The content words of a query (stopwords dropped), sorted and joined.
/// Two queries with equal keys describe the same action.
std::string content_key(const std::vector<std::string>& tokens);

/// Throws ValidationError listing every annotation outside [0, duration]
/// and every video with non-finite features.
void validate_split(const DatasetSplit& split);

enum class AnnotationFormat { kCanonicalJson, kCharadesText };

/// Loads annotations (features are attached separately). For the Charades
/// text format, `durations` supplies each video's length; videos missing
/// from it take the largest annotated end time.
DatasetSplit load_annotations(const std::filesystem::path& path, AnnotationFormat format,
                              const std::map<std::string, double>& durations = {});

void save_annotations_json(const DatasetSplit& split, const std::filesystem::path& path);

/// Attaches clip features from either a 3D container (videos x clips x f,
/// in split order) or a directory of per-video 2D containers named
/// <video_id>.vmrt.
void attach_features(DatasetSplit& split, const std::filesystem::path& path);

/// Writes all clip features as one videos x clips x f container; every video
/// must have the same clip count.
void save_features(const DatasetSplit& split, const std::filesystem::path& path);

/// Fixed-interval selection of `num_clips` rows out of T_raw.
FeatureMatrix resample_clips(const FeatureMatrix& clips, int num_clips);

/// FNV-1a checksum over ids, durations, annotations and clip features in split order.
std::uint64_t checksum(const DatasetSplit& split);

}  // namespace vmr
