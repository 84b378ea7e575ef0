#include "vmr/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "vmr/feature_io.hpp"

namespace vmr {

using nlohmann::json;

std::size_t DatasetSplit::num_queries() const {
  std::size_t n = 0;
  for (const auto& s : samples) n += s.annotations.size();
  return n;
}

std::vector<QueryRef> enumerate_queries(const DatasetSplit& split) {
  std::vector<QueryRef> out;
  for (std::size_t i = 0; i < split.samples.size(); ++i) {
    for (std::size_t j = 0; j < split.samples[i].annotations.size(); ++j) out.push_back({i, j});
  }
  return out;
}

std::vector<std::string> tokenize(const std::string& sentence) {
  std::vector<std::string> tokens;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) tokens.push_back(std::move(word));
    word.clear();
  };
  for (unsigned char ch : sentence) {
    if (std::isspace(ch)) {
      flush();
    } else if (std::ispunct(ch) && ch != '\'' && ch != '-') {
      flush();
      tokens.emplace_back(1, static_cast<char>(ch));
    } else {
      word.push_back(static_cast<char>(std::tolower(ch)));
    }
  }
  flush();
  return tokens;
}

std::string content_key(const std::vector<std::string>& tokens) {
  static const std::set<std::string> kStopwords = {
      "a", "an", "the", "person", "someone", "is", "are", "was", "his", "her", "their", "then",
      "and", "of", "to", "in", "on", "at", "with", ".", ",", "!", "?", ";", ":"};
  std::vector<std::string> words;
  for (const auto& t : tokens) {
    if (!kStopwords.contains(t)) words.push_back(t);
  }
  std::sort(words.begin(), words.end());
  std::string key;
  for (const auto& w : words) {
    if (!key.empty()) key.push_back(' ');
    key += w;
  }
  return key;
}

void validate_split(const DatasetSplit& split) {
  std::vector<std::string> offenders;
  std::set<std::string> ids;
  for (const auto& s : split.samples) {
    if (!ids.insert(s.video_id).second) offenders.push_back(s.video_id + ": duplicate video id");
    if (!(s.duration > 0.0) || !std::isfinite(s.duration)) offenders.push_back(s.video_id + ": bad duration");
    for (std::size_t k = 0; k < s.annotations.size(); ++k) {
      const auto& span = s.annotations[k].span;
      if (!(span.start >= 0.0 && span.end > span.start && span.end <= s.duration)) {
        std::ostringstream msg;
        msg << s.video_id << "#" << k << ": [" << span.start << ", " << span.end << "] outside [0, " << s.duration
            << "]";
        offenders.push_back(msg.str());
      }
    }
    if (s.clip_features.size() > 0 && !s.clip_features.allFinite()) {
      offenders.push_back(s.video_id + ": non-finite clip features");
    }
  }
  if (!offenders.empty()) {
    std::string what = "split '" + split.name + "' failed validation: " + std::to_string(offenders.size()) +
                       " offender(s), first: " + offenders.front();
    throw ValidationError(what, std::move(offenders));
  }
}

namespace {

std::size_t line_of_offset(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<long>(offset), '\n'));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<Annotation> parse_annotation_list(const json& list, const std::string& where) {
  std::vector<Annotation> out;
  for (std::size_t k = 0; k < list.size(); ++k) {
    const json& a = list[k];
    const std::string at = where + "[" + std::to_string(k) + "]";
    if (!a.is_object() || !a.contains("tokens") || !a.contains("start") || !a.contains("end")) {
      throw ParseError(at + ": annotation needs tokens, start and end", 0);
    }
    Annotation ann;
    ann.tokens = a.at("tokens").get<std::vector<std::string>>();
    ann.span = {a.at("start").get<double>(), a.at("end").get<double>()};
    out.push_back(std::move(ann));
  }
  return out;
}

DatasetSplit parse_canonical_json(const std::string& text, const std::string& name) {
  DatasetSplit split;
  split.name = name;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed annotation JSON: ") + e.what(), line_of_offset(text, e.byte));
  }
  if (!doc.is_object() || !doc.contains("videos") || !doc["videos"].is_array()) {
    throw ParseError("annotation JSON must be an object with a \"videos\" array", 1);
  }
  if (doc.contains("split") && doc["split"].is_string()) split.name = doc["split"].get<std::string>();
  const json& videos = doc["videos"];
  for (std::size_t i = 0; i < videos.size(); ++i) {
    const json& v = videos[i];
    const std::string at = "videos[" + std::to_string(i) + "]";
    try {
      VideoSample s;
      s.video_id = v.at("id").get<std::string>();
      s.duration = v.at("duration").get<double>();
      s.annotations = parse_annotation_list(v.at("annotations"), at + ".annotations");
      if (v.contains("distractors")) s.distractors = parse_annotation_list(v["distractors"], at + ".distractors");
      split.samples.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw ParseError(at + ": " + e.what(), 0);
    }
  }
  return split;
}

DatasetSplit parse_charades_text(const std::string& text, const std::string& name,
                                 const std::map<std::string, double>& durations) {
  DatasetSplit split;
  split.name = name;
  std::unordered_map<std::string, std::size_t> index;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto sep = line.find("##");
    if (sep == std::string::npos) throw ParseError("expected 'video_id start end##sentence'", line_no);
    std::istringstream head(line.substr(0, sep));
    std::string id;
    double start = 0.0;
    double end = 0.0;
    std::string extra;
    if (!(head >> id >> start >> end) || (head >> extra)) {
      throw ParseError("expected 'video_id start end' before '##'", line_no);
    }
    Annotation ann{tokenize(line.substr(sep + 2)), {start, end}};
    if (ann.tokens.empty()) throw ParseError("empty query sentence", line_no);
    auto [it, inserted] = index.try_emplace(id, split.samples.size());
    if (inserted) {
      VideoSample s;
      s.video_id = id;
      split.samples.push_back(std::move(s));
    }
    split.samples[it->second].annotations.push_back(std::move(ann));
  }
  for (auto& s : split.samples) {
    if (auto d = durations.find(s.video_id); d != durations.end()) {
      s.duration = d->second;
    } else {
      for (const auto& a : s.annotations) s.duration = std::max(s.duration, a.span.end);
    }
  }
  return split;
}

json annotation_list_json(const std::vector<Annotation>& list) {
  json arr = json::array();
  for (const auto& a : list) arr.push_back({{"tokens", a.tokens}, {"start", a.span.start}, {"end", a.span.end}});
  return arr;
}

}  // namespace

DatasetSplit load_annotations(const std::filesystem::path& path, AnnotationFormat format,
                              const std::map<std::string, double>& durations) {
  const std::string text = read_file(path);
  const std::string name = path.stem().string();
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
    spdlog::warn("annotation file {} is empty; returning an empty split", path.string());
    return DatasetSplit{name, {}};
  }
  DatasetSplit split = format == AnnotationFormat::kCanonicalJson ? parse_canonical_json(text, name)
                                                                   : parse_charades_text(text, name, durations);
  validate_split(split);
  return split;
}

void save_annotations_json(const DatasetSplit& split, const std::filesystem::path& path) {
  json videos = json::array();
  for (const auto& s : split.samples) {
    json v = {{"id", s.video_id}, {"duration", s.duration}, {"annotations", annotation_list_json(s.annotations)}};
    if (!s.distractors.empty()) v["distractors"] = annotation_list_json(s.distractors);
    videos.push_back(std::move(v));
  }
  json doc = {{"split", split.name}, {"videos", std::move(videos)}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << doc.dump(1) << '\n';
}

void attach_features(DatasetSplit& split, const std::filesystem::path& path) {
  auto to_matrix = [](const FeatureTensor& t, std::size_t offset, std::size_t rows, std::size_t cols) {
    FeatureMatrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) m(r, c) = t.values[offset + r * cols + c];
    }
    return m;
  };
  if (std::filesystem::is_directory(path)) {
    for (auto& s : split.samples) {
      const FeatureTensor t = read_feature_tensor(path / (s.video_id + ".vmrt"));
      if (t.dims.size() != 2) throw std::runtime_error("per-video feature file must be 2D: " + s.video_id);
      s.clip_features = to_matrix(t, 0, t.dims[0], t.dims[1]);
    }
  } else {
    const FeatureTensor t = read_feature_tensor(path);
    if (t.dims.size() != 3 || t.dims[0] != split.samples.size()) {
      throw std::runtime_error("feature container must be videos x clips x f and match the split size");
    }
    const std::size_t per = t.dims[1] * t.dims[2];
    for (std::size_t i = 0; i < split.samples.size(); ++i) {
      split.samples[i].clip_features = to_matrix(t, i * per, t.dims[1], t.dims[2]);
    }
  }
  validate_split(split);
}

void save_features(const DatasetSplit& split, const std::filesystem::path& path) {
  FeatureTensor t;
  std::uint64_t clips = 0;
  std::uint64_t dim = 0;
  if (!split.samples.empty()) {
    clips = static_cast<std::uint64_t>(split.samples[0].clip_features.rows());
    dim = static_cast<std::uint64_t>(split.samples[0].clip_features.cols());
  }
  t.dims = {split.samples.size(), clips, dim};
  t.values.reserve(split.samples.size() * clips * dim);
  for (const auto& s : split.samples) {
    if (static_cast<std::uint64_t>(s.clip_features.rows()) != clips ||
        static_cast<std::uint64_t>(s.clip_features.cols()) != dim) {
      throw std::invalid_argument("save_features needs equal clip counts; video " + s.video_id + " differs");
    }
    for (Eigen::Index r = 0; r < s.clip_features.rows(); ++r) {
      for (Eigen::Index c = 0; c < s.clip_features.cols(); ++c) {
        t.values.push_back(static_cast<float>(s.clip_features(r, c)));
      }
    }
  }
  write_feature_tensor(t, path);
}

FeatureMatrix resample_clips(const FeatureMatrix& clips, int num_clips) {
  if (num_clips <= 0) throw std::invalid_argument("resample needs a positive clip count");
  if (clips.rows() == 0) throw std::invalid_argument("cannot resample a video without clips");
  if (clips.rows() == num_clips) return clips;
  FeatureMatrix out(num_clips, clips.cols());
  const double step = static_cast<double>(clips.rows()) / num_clips;
  for (int j = 0; j < num_clips; ++j) {
    const auto src = std::min<Eigen::Index>(static_cast<Eigen::Index>((j + 0.5) * step), clips.rows() - 1);
    out.row(j) = clips.row(src);
  }
  return out;
}

std::uint64_t checksum(const DatasetSplit& split) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix_bytes = [&h](const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 1099511628211ULL;
    }
  };
  auto mix_double = [&](double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    mix_bytes(&bits, sizeof bits);
  };
  for (const auto& s : split.samples) {
    mix_bytes(s.video_id.data(), s.video_id.size());
    mix_double(s.duration);
    for (const auto& a : s.annotations) {
      for (const auto& t : a.tokens) mix_bytes(t.data(), t.size());
      mix_double(a.span.start);
      mix_double(a.span.end);
    }
    for (Eigen::Index i = 0; i < s.clip_features.size(); ++i) mix_double(s.clip_features.data()[i]);
  }
  return h;
}

}  // namespace vmr
