#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "vmr/harness.hpp"

using namespace vmr;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json tiny_json() {
  return json::parse(R"({
    "data": {"synthetic": {"num_train": 60, "num_val": 15, "num_test": 20, "num_clips": 6, "feature_dim": 8}},
    "train": {"d": 8, "num_clips": 6, "feature_dim": 8, "embed_dim": 8, "lstm_layers": 1, "epochs": 1,
              "batch_size": 16, "learning_rate": 0.001},
    "ood_rhos": [10, 15],
    "methods": ["baseline", "dcm", "freq_prior"],
    "seeds": [0, 1]
  })");
}

// Runs once per binary; the experiment is shared by the report tests.
const ExperimentReport& tiny_report() {
  static const ExperimentReport report = run_experiment(experiment_config_from_json(tiny_json()), 1);
  return report;
}

std::size_t count_lines(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) n += !line.empty();
  return n;
}

}  // namespace

TEST(ExperimentConfig, DefaultsAndRoundTrip) {
  const auto d = experiment_config_from_json(json::object());
  ASSERT_EQ(d.methods.size(), 2u);
  EXPECT_EQ(d.methods[0].name, "baseline");
  EXPECT_EQ(d.methods[1].name, "dcm");
  EXPECT_EQ(d.seeds, std::vector<std::uint64_t>{0});

  json j = tiny_json();
  j["methods"].push_back({{"name", "dcm_l2_0"}, {"base", "dcm"}, {"train", {{"lambda2", 0.0}}}});
  j["ablations"] = {"no_interv", "no_recon"};
  j["precision"] = "double";
  j["ood_placement"] = "append";
  const auto c = experiment_config_from_json(j);
  EXPECT_EQ(c.methods.back().train.lambda2, 0.0);
  EXPECT_EQ(c.methods.back().train.model.mode, Mode::kDcm);
  const auto cells = c.cells();
  ASSERT_EQ(cells.size(), 6u);
  EXPECT_EQ(cells[4].name, "dcm-no_interv");
  EXPECT_TRUE(cells[4].train.model.ablations.no_interv);
  EXPECT_FALSE(cells[4].train.model.ablations.no_recon);
  EXPECT_EQ(to_json(experiment_config_from_json(to_json(c))), to_json(c));
}

TEST(ExperimentConfig, FileDataRoundTrip) {
  const auto c = experiment_config_from_json(json::parse(R"({
    "data": {"format": "charades", "train": "a.txt", "test": "b.txt", "train_features": "fa", "test_features": "fb"}
  })"));
  EXPECT_FALSE(c.data.synthetic.has_value());
  EXPECT_EQ(c.data.format, AnnotationFormat::kCharadesText);
  EXPECT_EQ(to_json(experiment_config_from_json(to_json(c))), to_json(c));
}

TEST(ExperimentConfig, Rejections) {
  auto bad = [](json j) { EXPECT_THROW(experiment_config_from_json(j), ConfigError) << j.dump(); };
  bad({{"seedz", {1}}});
  bad({{"seeds", json::array()}});
  bad({{"methods", {"baseline", "baseline"}}});
  bad({{"methods", {"oracle"}}});
  bad({{"ablations", {"no_everything"}}});
  bad({{"ood_rhos", {-1.0}}});
  bad({{"precision", "half"}});
  bad({{"train", {{"lambda1", -1.0}}}});
  bad({{"methods", {{{"name", "x"}, {"base", "dcm"}, {"tran", json::object()}}}}});
  bad({{"data", {{"synthetic", {{"num_trian", 3}}}}}});
}

TEST(Experiment, CellsSplitsAndTags) {
  const auto& r = tiny_report();
  ASSERT_EQ(r.cells.size(), 6u);
  EXPECT_EQ(r.failed(), 0u);
  for (const char* m : {"baseline", "dcm", "freq_prior"}) {
    for (std::uint64_t seed : {0, 1}) {
      const auto* cell = r.find(m, seed);
      ASSERT_NE(cell, nullptr) << m << seed;
      ASSERT_EQ(cell->metrics.size(), 3u);
      EXPECT_EQ(cell->metrics[0].split_tag, "iid");
      EXPECT_EQ(cell->metrics[1].split_tag, "ood-1");
      EXPECT_EQ(cell->metrics[2].split_tag, "ood-2");
      for (const auto& mr : cell->metrics) {
        EXPECT_EQ(mr.n_queries, 20u);
        EXPECT_GE(mr.miou, 0.0);
        EXPECT_LE(mr.miou, 1.0);
      }
      if (std::string(m) != "freq_prior") EXPECT_EQ(cell->trace.size(), 1u);
    }
  }
  EXPECT_EQ(r.heatmaps.size(), 2u);
}

TEST(Experiment, AggregatesRecomputableFromCells) {
  const auto& r = tiny_report();
  ASSERT_EQ(r.aggregates.size(), 9u);
  for (const auto& a : r.aggregates) {
    std::vector<double> v;
    for (const auto& c : r.cells) {
      if (c.method != a.method) continue;
      for (const auto& m : c.metrics) {
        if (m.split_tag == a.split_tag) v.push_back(m.miou);
      }
    }
    ASSERT_EQ(v.size(), 2u);
    const double mean = (v[0] + v[1]) / 2;
    const double sd = std::sqrt(((v[0] - mean) * (v[0] - mean) + (v[1] - mean) * (v[1] - mean)) / 1.0);
    EXPECT_NEAR(a.miou_mean, mean, 1e-12);
    EXPECT_NEAR(a.miou_std, sd, 1e-12);
    EXPECT_EQ(a.seeds, 2u);
  }
}

TEST(Experiment, ReportJsonRoundTrip) {
  const auto& r = tiny_report();
  const json j = to_json(r);
  const auto back = report_from_json(json::parse(j.dump()));
  EXPECT_EQ(to_json(back), j);
  ASSERT_EQ(back.cells.size(), r.cells.size());
  for (std::size_t i = 0; i < r.cells.size(); ++i) {
    EXPECT_EQ(back.cells[i].parameter_checksum, r.cells[i].parameter_checksum);
    for (std::size_t k = 0; k < r.cells[i].metrics.size(); ++k) {
      EXPECT_NEAR(back.cells[i].metrics[k].miou, r.cells[i].metrics[k].miou, 1e-12);
    }
  }
}

TEST(Experiment, WrittenReportLayout) {
  const auto dir = fs::temp_directory_path() / "vmr_test_report";
  fs::remove_all(dir);
  write_report(tiny_report(), dir);
  for (const char* f : {"metrics.json", "metrics.csv", "summary.txt", "environment.json", "heatmap_seed0.csv",
                        "heatmap_seed1.png", "trace_dcm_seed1.csv", "trace_baseline_seed0.csv"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  // 3 methods x 2 seeds x 3 splits, plus the header.
  EXPECT_EQ(count_lines(dir / "metrics.csv"), 19u);
  std::ifstream csv(dir / "metrics.csv");
  std::string header;
  std::getline(csv, header);
  EXPECT_EQ(header, "method,seed,split,n_queries,miou,r1_iou_gt_0.5,r1_iou_gt_0.7");
  std::ifstream mj(dir / "metrics.json");
  const auto doc = json::parse(mj);
  EXPECT_FALSE(doc.dump().find("timestamp") != std::string::npos);
  EXPECT_EQ(report_from_json(doc).cells.size(), 6u);
  fs::remove_all(dir);
}

TEST(Experiment, WorkerCountDoesNotChangeResults) {
  const auto parallel = run_experiment(experiment_config_from_json(tiny_json()), 3);
  EXPECT_EQ(to_json(parallel), to_json(tiny_report()));
}

TEST(Experiment, NoAblationFlagsMatchesDefaultDcm) {
  json j = tiny_json();
  j["methods"] = {"dcm", {{"name", "dcm_again"}, {"base", "dcm"}, {"train", {{"ablations", json::array()}}}}};
  j["seeds"] = {0};
  j["ood_rhos"] = {10};
  const auto r = run_experiment(experiment_config_from_json(j), 1);
  const auto* a = r.find("dcm", 0);
  const auto* b = r.find("dcm_again", 0);
  ASSERT_TRUE(a && b);
  EXPECT_EQ(a->parameter_checksum, b->parameter_checksum);
  EXPECT_EQ(to_json(a->metrics[0]), to_json(b->metrics[0]));
  EXPECT_EQ(a->parameter_checksum, tiny_report().find("dcm", 0)->parameter_checksum);
}

TEST(Experiment, FailingCellIsRecordedAndOthersContinue) {
  json j = tiny_json();
  j["methods"] = {"baseline", {{"name", "diverges"}, {"base", "dcm"}, {"train", {{"learning_rate", 1e38}}}}};
  j["seeds"] = {0};
  const auto r = run_experiment(experiment_config_from_json(j), 1);
  EXPECT_EQ(r.failed(), 1u);
  EXPECT_TRUE(r.find("baseline", 0)->ok);
  EXPECT_FALSE(r.find("diverges", 0)->ok);
  EXPECT_FALSE(r.find("diverges", 0)->error.empty());
}

TEST(Experiment, EnvironmentFingerprint) {
  const auto env = environment_fingerprint();
  EXPECT_TRUE(env.is_object());
  EXPECT_FALSE(env.empty());
}
