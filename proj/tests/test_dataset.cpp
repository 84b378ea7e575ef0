#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "vmr/dataset.hpp"
#include "vmr/feature_io.hpp"
#include "vmr/synthetic_data.hpp"

using namespace vmr;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("vmr_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

}  // namespace

TEST(Tokenize, LowercasesAndSplitsPunctuation) {
  EXPECT_EQ(tokenize("Person opens the Door."), (std::vector<std::string>{"person", "opens", "the", "door", "."}));
  EXPECT_EQ(tokenize("  a person's  well-known,cup "),
            (std::vector<std::string>{"a", "person's", "well-known", ",", "cup"}));
  EXPECT_TRUE(tokenize("   ").empty());
}

TEST(ContentKey, IgnoresStopwordsAndOrder) {
  EXPECT_EQ(content_key(tokenize("person opens the door")), content_key(tokenize("door opens")));
  EXPECT_NE(content_key(tokenize("person opens the door")), content_key(tokenize("person closes the door")));
}

TEST(Charades, ParsesLines) {
  const auto dir = scratch_dir("charades");
  write_text(dir / "train.txt",
             "AO8RW 0.0 6.9##a person is putting a book on a shelf.\n"
             "\n"
             "AO8RW 5.2 11.1##Person takes a Book.\r\n"
             "Y6R7T 1.5 3.0##someone opens the door\n");
  const auto split = load_annotations(dir / "train.txt", AnnotationFormat::kCharadesText, {{"AO8RW", 33.67}});
  ASSERT_EQ(split.samples.size(), 2u);
  EXPECT_EQ(split.samples[0].video_id, "AO8RW");
  EXPECT_DOUBLE_EQ(split.samples[0].duration, 33.67);
  ASSERT_EQ(split.samples[0].annotations.size(), 2u);
  EXPECT_DOUBLE_EQ(split.samples[0].annotations[1].span.start, 5.2);
  EXPECT_DOUBLE_EQ(split.samples[0].annotations[1].span.end, 11.1);
  EXPECT_EQ(split.samples[0].annotations[1].tokens, (std::vector<std::string>{"person", "takes", "a", "book", "."}));
  // No declared duration: the largest annotated end.
  EXPECT_DOUBLE_EQ(split.samples[1].duration, 3.0);
  EXPECT_EQ(split.num_queries(), 3u);
  fs::remove_all(dir);
}

TEST(Charades, ReportsLineOfBadInput) {
  const auto dir = scratch_dir("charades_bad");
  write_text(dir / "a.txt", "V1 0 2##fine\nV1 0 two##broken\n");
  try {
    load_annotations(dir / "a.txt", AnnotationFormat::kCharadesText);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  write_text(dir / "b.txt", "V1 0 2 fine\n");
  EXPECT_THROW(load_annotations(dir / "b.txt", AnnotationFormat::kCharadesText), ParseError);
  fs::remove_all(dir);
}

TEST(Charades, OutOfRangeAnnotationsListed) {
  const auto dir = scratch_dir("charades_range");
  write_text(dir / "a.txt", "V1 0 12##x y\nV2 1 2##x z\nV2 4 1##z\n");
  try {
    load_annotations(dir / "a.txt", AnnotationFormat::kCharadesText, {{"V1", 10.0}, {"V2", 5.0}});
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.offenders().size(), 2u);
  }
  fs::remove_all(dir);
}

TEST(CanonicalJson, RoundTrip) {
  SyntheticConfig c;
  c.num_train = 20;
  c.num_val = 1;
  c.num_test = 1;
  const auto d = generate_dataset(c, 2);
  const auto dir = scratch_dir("json");
  save_annotations_json(d.train, dir / "train.json");
  save_features(d.train, dir / "train.vmrt");
  auto back = load_annotations(dir / "train.json", AnnotationFormat::kCanonicalJson);
  attach_features(back, dir / "train.vmrt");
  EXPECT_EQ(back.name, "train");
  EXPECT_EQ(checksum(back), checksum(d.train));
  ASSERT_EQ(back.samples.size(), d.train.samples.size());
  for (std::size_t i = 0; i < back.samples.size(); ++i) {
    EXPECT_EQ(back.samples[i].annotations[0].span, d.train.samples[i].annotations[0].span);
    EXPECT_EQ(back.samples[i].distractors.size(), d.train.samples[i].distractors.size());
  }
  fs::remove_all(dir);
}

TEST(CanonicalJson, EmptyFileGivesEmptySplit) {
  const auto dir = scratch_dir("json_empty");
  write_text(dir / "val.json", "\n");
  EXPECT_TRUE(load_annotations(dir / "val.json", AnnotationFormat::kCanonicalJson).samples.empty());
  write_text(dir / "bad.json", "{\"videos\": [ {\"id\": 3 ]}");
  EXPECT_ANY_THROW(load_annotations(dir / "bad.json", AnnotationFormat::kCanonicalJson));
  fs::remove_all(dir);
}

TEST(Validation, DuplicateIdsAndNonFiniteFeatures) {
  DatasetSplit s{"train", {}};
  VideoSample v;
  v.video_id = "a";
  v.duration = 10.0;
  v.annotations.push_back({{"x"}, {1.0, 2.0}});
  v.clip_features = FeatureMatrix::Zero(4, 2);
  s.samples = {v, v};
  s.samples[1].clip_features(0, 0) = std::nan("");
  try {
    validate_split(s);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.offenders().size(), 2u);
  }
}

TEST(FeatureIo, ContainerRoundTripAndMagic) {
  const auto dir = scratch_dir("vmrt");
  FeatureTensor t{{2, 3, 4}, {}};
  for (int i = 0; i < 24; ++i) t.values.push_back(0.5f * i - 3.0f);
  write_feature_tensor(t, dir / "t.vmrt");
  const auto back = read_feature_tensor(dir / "t.vmrt");
  EXPECT_EQ(back.dims, t.dims);
  EXPECT_EQ(back.values, t.values);
  EXPECT_EQ(fs::file_size(dir / "t.vmrt"), 4u + 4 + 4 + 3 * 8 + 24 * 4);
  std::ifstream in(dir / "t.vmrt", std::ios::binary);
  char magic[4];
  in.read(magic, 4);
  EXPECT_EQ(std::string(magic, 4), "VMRT");

  write_text(dir / "bad.vmrt", "NOPE....");
  EXPECT_ANY_THROW(read_feature_tensor(dir / "bad.vmrt"));
  fs::resize_file(dir / "t.vmrt", 40);
  EXPECT_ANY_THROW(read_feature_tensor(dir / "t.vmrt"));
  fs::remove_all(dir);
}

TEST(FeatureIo, PerVideoDirectory) {
  const auto dir = scratch_dir("pervideo");
  DatasetSplit s{"test", {}};
  for (int i = 0; i < 3; ++i) {
    VideoSample v;
    v.video_id = "v" + std::to_string(i);
    v.duration = 5.0;
    v.annotations.push_back({{"x"}, {0.0, 1.0}});
    s.samples.push_back(v);
    FeatureTensor t{{std::uint64_t(5 + i), 2}, std::vector<float>((5 + i) * 2, float(i))};
    write_feature_tensor(t, dir / (v.video_id + ".vmrt"));
  }
  attach_features(s, dir);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(s.samples[i].clip_features.rows(), 5 + i);
    EXPECT_EQ(s.samples[i].clip_features(0, 1), double(i));
  }
  fs::remove_all(dir);
}

TEST(Resample, FixedIntervalSelection) {
  FeatureMatrix m(10, 1);
  for (int i = 0; i < 10; ++i) m(i, 0) = i;
  const auto r = resample_clips(m, 4);
  ASSERT_EQ(r.rows(), 4);
  // Centres of 4 equal bins over 10 rows: 1.25, 3.75, 6.25, 8.75.
  EXPECT_EQ(r(0, 0), 1.0);
  EXPECT_EQ(r(1, 0), 3.0);
  EXPECT_EQ(r(2, 0), 6.0);
  EXPECT_EQ(r(3, 0), 8.0);
  EXPECT_EQ(resample_clips(m, 10), m);
  EXPECT_THROW(resample_clips(m, 0), std::invalid_argument);
}

TEST(Queries, EnumerationOrder) {
  DatasetSplit s{"x", {}};
  for (int v = 0; v < 3; ++v) {
    VideoSample sample;
    sample.video_id = std::to_string(v);
    sample.duration = 9.0;
    for (int a = 0; a <= v; ++a) sample.annotations.push_back({{"q"}, {0.0, 1.0}});
    s.samples.push_back(sample);
  }
  const auto q = enumerate_queries(s);
  ASSERT_EQ(q.size(), 6u);
  EXPECT_EQ(q[3].sample, 2u);
  EXPECT_EQ(q[3].annotation, 0u);
  EXPECT_EQ(q[5].annotation, 2u);
}
