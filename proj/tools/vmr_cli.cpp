// vmr: command-line front end for data generation, training, evaluation
// and experiment reports.

#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "vmr/harness.hpp"

using namespace vmr;
namespace fs = std::filesystem;

namespace {

struct Globals {
  std::string config;
  long long seed = -1;
  std::string out = "out";
  std::string precision = "single";
  bool quiet = false;
};

ExperimentConfig load_config(const Globals& g) {
  ExperimentConfig c = g.config.empty() ? experiment_config_from_json(nlohmann::json::object())
                                        : load_experiment_config(g.config);
  if (g.seed >= 0) c.seeds = {static_cast<std::uint64_t>(g.seed)};
  c.precision = precision_from_string(g.precision);
  return c;
}

std::uint64_t seed_of(const ExperimentConfig& c) { return c.seeds.front(); }

DatasetSplit load_dir_split(const fs::path& dir, const std::string& name) {
  DatasetSplit s = load_annotations(dir / (name + ".json"), AnnotationFormat::kCanonicalJson);
  s.name = name;
  attach_features(s, dir / (name + ".vmrt"));
  validate_split(s);
  return s;
}

/// Splits from a gen-data directory, or from the config's data source.
SyntheticDataset load_data(const ExperimentConfig& c, const std::string& data_dir) {
  SyntheticDataset d;
  if (!data_dir.empty()) {
    d.train = load_dir_split(data_dir, "train");
    if (fs::exists(fs::path(data_dir) / "val.json")) d.val = load_dir_split(data_dir, "val");
    d.test = load_dir_split(data_dir, "test");
    return d;
  }
  if (c.data.synthetic) return generate_dataset(*c.data.synthetic, seed_of(c));
  auto load = [&](const fs::path& ann, const fs::path& feat, const char* name) {
    DatasetSplit s = load_annotations(ann, c.data.format);
    s.name = name;
    attach_features(s, feat);
    validate_split(s);
    return s;
  };
  d.train = load(c.data.train_annotations, c.data.train_features, "train");
  if (!c.data.val_annotations.empty()) d.val = load(c.data.val_annotations, c.data.val_features, "val");
  d.test = load(c.data.test_annotations, c.data.test_features, "test");
  return d;
}

const MethodSpec& pick_method(const std::vector<MethodSpec>& cells, const std::string& name) {
  if (name.empty()) return cells.front();
  for (const auto& m : cells) {
    if (m.name == name) return m;
  }
  throw ConfigError("method '" + name + "' is not configured");
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << j.dump(2) << "\n";
}

template <typename T>
int do_train(const ExperimentConfig& c, const MethodSpec& method, const SyntheticDataset& data, const fs::path& out) {
  TrainConfig tc = method.train;
  tc.seed = seed_of(c);
  auto r = train<T>(tc, data.train, data.val, [](const TraceRow& row) {
    spdlog::info("epoch {:3d}  bce+ {:.4f}  bce- {:.4f}  recon {:.4f}  indep {:.4f}  val mIoU {:.4f}", row.epoch,
                 row.l_bce_pos, row.l_bce_neg, row.l_recon, row.l_indep, row.val_miou);
  });
  fs::create_directories(out);
  save_checkpoint(out / "model.ckpt", *r.model, r.vocab, tc, r.best_epoch);
  write_trace_csv(r.trace, out / "trace.csv");
  spdlog::info("best epoch {}; checkpoint written to {}", r.best_epoch, (out / "model.ckpt").string());
  return 0;
}

template <typename T>
nlohmann::json evaluate_checkpoint(const Checkpoint<T>& ck, const DatasetSplit& split, const std::string& tag,
                                   const std::vector<double>& thresholds, const fs::path& out) {
  std::vector<double> scores;
  const auto pred = predict_top1(*ck.model, ck.vocab, split, ck.config.eval_batch, &scores);
  const auto m = evaluate(pred, ground_truths(split), thresholds, tag);
  write_predictions_csv(split, pred, scores, out / ("predictions_" + tag + ".csv"));
  std::printf("%-8s mIoU %.4f", tag.c_str(), m.miou);
  for (const auto& [t, v] : m.r1_at) std::printf("  R@1,IoU>%g %.4f", t, v);
  std::printf("  (%zu queries)\n", m.n_queries);
  return to_json(m);
}

template <typename T>
int do_eval(const ExperimentConfig& c, const std::string& checkpoint, const SyntheticDataset& data,
            const std::string& split_name, const std::vector<double>& rhos, OodPlacement placement, const fs::path& out) {
  const auto ck = load_checkpoint<T>(checkpoint);
  const DatasetSplit& split = split_name == "val" ? data.val : split_name == "train" ? data.train : data.test;
  fs::create_directories(out);
  nlohmann::json all = nlohmann::json::array();
  if (rhos.empty()) all.push_back(evaluate_checkpoint(ck, split, "iid", c.thresholds, out));
  for (std::size_t r = 0; r < rhos.size(); ++r) {
    auto rng = derived_rng(seed_of(c), 0x4f4f44, r);
    const auto ood = ood_transform(split, rhos[r], rng, 0, placement);
    all.push_back(evaluate_checkpoint(ck, ood, "ood-" + std::to_string(r + 1), c.thresholds, out));
  }
  write_json(out / "metrics.json", all);
  return 0;
}

int do_analyze_bias(const ExperimentConfig& c, const SyntheticDataset& data, const fs::path& out) {
  fs::create_directories(out);
  const int clips = c.train.model.num_clips;
  nlohmann::json j;
  for (const auto* split : {&data.train, &data.test}) {
    const auto h = bias_heatmap(*split, clips);
    write_heatmap_csv(h, out / ("heatmap_" + split->name + ".csv"));
    write_heatmap_png(h, out / ("heatmap_" + split->name + ".png"));
    const double head_end = c.data.synthetic ? c.data.synthetic->bias.head_end : 0.25;
    const double share = h.total > 0 ? static_cast<double>(h.head_count(head_end)) / static_cast<double>(h.total) : 0.0;
    j[split->name] = {{"annotations", h.total}, {"head_share", share}};
    std::printf("%-6s %6ld annotations, %.3f start in the first %.0f%% of the video\n", split->name.c_str(), h.total,
                share, 100 * head_end);
  }
  const auto prior = FreqPrior::fit(data.train, clips);
  const auto iid = evaluate(prior.predict(data.test), ground_truths(data.test), c.thresholds, "iid");
  j["freq_prior"] = nlohmann::json::array({to_json(iid)});
  std::printf("freq-prior iid    mIoU %.4f\n", iid.miou);
  for (std::size_t r = 0; r < c.ood_rhos.size(); ++r) {
    auto rng = derived_rng(seed_of(c), 0x4f4f44, r);
    const auto ood = ood_transform(data.test, c.ood_rhos[r], rng, 0, c.ood_placement);
    const auto m = evaluate(prior.predict(ood), ground_truths(ood), c.thresholds, "ood-" + std::to_string(r + 1));
    j["freq_prior"].push_back(to_json(m));
    std::printf("freq-prior %-6s mIoU %.4f\n", m.split_tag.c_str(), m.miou);
  }
  nlohmann::json bins = nlohmann::json::array();
  for (const auto& b : length_report(prior.predict(data.test), data.test, {0.0, 0.1, 0.2, 0.3, 0.5, 1.0}, c.thresholds)) {
    bins.push_back({{"lo", b.lo}, {"hi", b.hi}, {"share", b.share}, {"metrics", to_json(b.metrics)}});
  }
  j["freq_prior_by_length"] = bins;
  write_json(out / "bias.json", j);
  return 0;
}

int do_grad_check(std::size_t coords, std::uint64_t seed) {
  GradCheckOptions o;
  o.coords_per_group = coords;
  o.seed = seed;
  const auto probes = run_grad_probes(o);
  double worst = 0.0;
  for (const auto& p : probes) {
    std::size_t checked = 0, skipped = 0;
    for (const auto& e : p.entries) {
      checked += e.coords;
      skipped += e.skipped;
    }
    std::printf("%-22s coords %5zu  kinks skipped %3zu  max rel err %.3e\n", p.probe.c_str(), checked, skipped,
                p.max_rel_error());
    worst = std::max(worst, p.max_rel_error());
  }
  std::printf("worst relative error %.3e (%s)\n", worst, worst < 1e-5 ? "ok" : "FAIL");
  return worst < 1e-5 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deconfounded video moment retrieval: data, training and evaluation"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "Experiment config (JSON)");
  app.add_option("--seed", g.seed, "Seed (replaces the config's seed list)");
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--precision", g.precision, "Floating point precision")->check(CLI::IsMember({"single", "double"}));
  app.add_flag("--quiet", g.quiet, "Only print warnings and errors");
  app.fallthrough();

  std::string data_dir, method, checkpoint, split = "test", placement = "prepend";
  std::vector<double> rhos;
  int workers = 0;
  std::size_t coords = 50;

  auto* gen = app.add_subcommand("gen-data", "Write synthetic train/val/test splits (annotations JSON + features)");
  auto* tr = app.add_subcommand("train", "Train one configured method and save its checkpoint");
  tr->add_option("--data", data_dir, "Directory written by gen-data");
  tr->add_option("--method", method, "Method name (default: the first configured)");
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on an unmodified split");
  auto* ood = app.add_subcommand("ood-eval", "Evaluate a checkpoint on OOD copies of a split");
  for (auto* sc : {ev, ood}) {
    sc->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
    sc->add_option("--data", data_dir, "Directory written by gen-data");
    sc->add_option("--split", split, "Split to evaluate")->check(CLI::IsMember({"train", "val", "test"}));
  }
  ood->add_option("--rho", rhos, "Inserted durations in seconds (default: the config's)");
  ood->add_option("--placement", placement, "Where the inserted clip goes")->check(CLI::IsMember({"prepend", "append"}));
  auto* bias = app.add_subcommand("analyze-bias", "Annotation heatmaps and the Freq-Prior reference");
  bias->add_option("--data", data_dir, "Directory written by gen-data");
  auto* rep = app.add_subcommand("report", "Run the configured experiment and write its report");
  rep->add_option("--workers", workers, "Parallel cells (default: VMR_NUM_WORKERS or 1)");
  auto* gc = app.add_subcommand("grad-check", "Finite-difference check of every trainable path");
  gc->add_option("--coords", coords, "Coordinates per parameter tensor");

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(g.quiet ? spdlog::level::warn : spdlog::level::info);

  try {
    const ExperimentConfig c = load_config(g);
    const fs::path out = g.out;
    const bool dbl = c.precision == Precision::kDouble;
    if (gen->parsed()) {
      if (!c.data.synthetic) throw ConfigError("gen-data needs a synthetic data source");
      const auto d = generate_dataset(*c.data.synthetic, seed_of(c));
      fs::create_directories(out);
      for (const auto* s : {&d.train, &d.val, &d.test}) {
        save_annotations_json(*s, out / (s->name + ".json"));
        save_features(*s, out / (s->name + ".vmrt"));
        std::printf("%-6s %5zu videos  checksum %016llx\n", s->name.c_str(), s->samples.size(),
                    static_cast<unsigned long long>(checksum(*s)));
      }
      return 0;
    }
    if (gc->parsed()) return do_grad_check(coords, seed_of(c));
    if (rep->parsed()) {
      const auto report = run_experiment(c, workers, out / "checkpoints");
      write_report(report, out);
      std::cout << summary_table(report);
      return report.failed() > 0 ? 1 : 0;
    }
    const auto data = load_data(c, data_dir);
    if (bias->parsed()) return do_analyze_bias(c, data, out);
    if (tr->parsed()) {
      const auto cells = c.cells();
      const MethodSpec& m = pick_method(cells, method);
      if (m.freq_prior) throw ConfigError("freq_prior has nothing to train");
      return dbl ? do_train<double>(c, m, data, out) : do_train<float>(c, m, data, out);
    }
    const auto place = placement == "append" ? OodPlacement::kAppend : OodPlacement::kPrepend;
    if (ev->parsed()) {
      return dbl ? do_eval<double>(c, checkpoint, data, split, {}, place, out)
                 : do_eval<float>(c, checkpoint, data, split, {}, place, out);
    }
    if (ood->parsed()) {
      if (rhos.empty()) rhos = c.ood_rhos;
      const auto place_cfg = ood->count("--placement") ? place : c.ood_placement;
      return dbl ? do_eval<double>(c, checkpoint, data, split, rhos, place_cfg, out)
                 : do_eval<float>(c, checkpoint, data, split, rhos, place_cfg, out);
    }
  } catch (const ConfigError& e) {
    spdlog::error("configuration error: {}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
