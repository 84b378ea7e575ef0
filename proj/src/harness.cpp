#include "vmr/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <mutex>
#include <thread>

#include <unistd.h>

#include <spdlog/spdlog.h>

namespace vmr {

using nlohmann::json;

namespace {

constexpr std::uint64_t kOodStream = 0x4f4f44;

std::string split_tag(std::size_t round) { return round == 0 ? "iid" : "ood-" + std::to_string(round); }

std::string threshold_label(double t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", t);
  return buf;
}

json trace_to_json(const std::vector<TraceRow>& trace) {
  json out = json::array();
  for (const auto& r : trace) {
    out.push_back({{"epoch", r.epoch},
                   {"l_bce_pos", r.l_bce_pos},
                   {"l_bce_neg", r.l_bce_neg},
                   {"l_recon", r.l_recon},
                   {"l_indep", r.l_indep},
                   {"dcor", r.dcor},
                   {"val_miou", r.val_miou}});
  }
  return out;
}

std::vector<TraceRow> trace_from_json(const json& j) {
  std::vector<TraceRow> out;
  for (const auto& r : j) {
    TraceRow t;
    t.epoch = r.at("epoch").get<int>();
    t.l_bce_pos = r.at("l_bce_pos").get<double>();
    t.l_bce_neg = r.at("l_bce_neg").get<double>();
    t.l_recon = r.at("l_recon").get<double>();
    t.l_indep = r.at("l_indep").get<double>();
    t.dcor = r.at("dcor").get<double>();
    t.val_miou = r.at("val_miou").get<double>();
    out.push_back(t);
  }
  return out;
}

const char* format_name(AnnotationFormat f) { return f == AnnotationFormat::kCharadesText ? "charades" : "json"; }

MethodSpec builtin_method(const std::string& name, const TrainConfig& base) {
  MethodSpec m;
  m.name = name;
  m.train = base;
  if (name == "freq_prior") {
    m.freq_prior = true;
  } else if (name == "dcm" || name == "baseline" || name == "blind") {
    m.train.model.mode = mode_from_string(name);
  } else {
    throw ConfigError("unknown method '" + name + "'");
  }
  return m;
}

DataSource data_from_json(const json& j) {
  DataSource d;
  if (j.contains("synthetic")) {
    reject_unknown_keys(j, {"synthetic"}, "data");
    d.synthetic = synthetic_config_from_json(j.at("synthetic"));
    return d;
  }
  reject_unknown_keys(j, {"format", "train", "val", "test", "train_features", "val_features", "test_features"}, "data");
  d.synthetic.reset();
  auto path = [&](const char* key) { return j.contains(key) ? std::filesystem::path(j.at(key).get<std::string>()) : std::filesystem::path(); };
  const std::string format = j.value("format", "json");
  if (format != "json" && format != "charades") throw ConfigError("data.format must be 'json' or 'charades'");
  d.format = format == "json" ? AnnotationFormat::kCanonicalJson : AnnotationFormat::kCharadesText;
  d.train_annotations = path("train");
  d.val_annotations = path("val");
  d.test_annotations = path("test");
  d.train_features = path("train_features");
  d.val_features = path("val_features");
  d.test_features = path("test_features");
  if (d.train_annotations.empty() || d.test_annotations.empty() || d.train_features.empty() || d.test_features.empty()) {
    throw ConfigError("data needs train, test, train_features and test_features paths");
  }
  if (d.val_annotations.empty() != d.val_features.empty()) throw ConfigError("data.val and data.val_features go together");
  return d;
}

json data_to_json(const DataSource& d) {
  if (d.synthetic) return {{"synthetic", to_json(*d.synthetic)}};
  json j = {{"format", format_name(d.format)},
            {"train", d.train_annotations.string()},
            {"test", d.test_annotations.string()},
            {"train_features", d.train_features.string()},
            {"test_features", d.test_features.string()}};
  if (!d.val_annotations.empty()) {
    j["val"] = d.val_annotations.string();
    j["val_features"] = d.val_features.string();
  }
  return j;
}

DatasetSplit load_split(const std::filesystem::path& ann, const std::filesystem::path& feat, AnnotationFormat format,
                        const std::string& name) {
  DatasetSplit s = load_annotations(ann, format);
  s.name = name;
  attach_features(s, feat);
  validate_split(s);
  return s;
}

struct SeedData {
  DatasetSplit train, val, test;
  std::vector<DatasetSplit> ood;
};

template <typename T>
void run_trained(const MethodSpec& method, const ExperimentConfig& config, const SeedData& data, std::uint64_t seed,
                 const std::filesystem::path& checkpoint_dir, CellResult& cell) {
  TrainConfig tc = method.train;
  tc.seed = seed;
  auto result = train<T>(tc, data.train, data.val);
  cell.trace = result.trace;
  cell.best_epoch = result.best_epoch;
  cell.skipped_negatives = result.skipped_negatives;
  cell.parameter_checksum = result.model->params().checksum();
  cell.metrics.push_back(evaluate(predict_top1(*result.model, result.vocab, data.test, tc.eval_batch),
                                  ground_truths(data.test), config.thresholds, split_tag(0)));
  for (std::size_t r = 0; r < data.ood.size(); ++r) {
    cell.metrics.push_back(evaluate(predict_top1(*result.model, result.vocab, data.ood[r], tc.eval_batch),
                                    ground_truths(data.ood[r]), config.thresholds, split_tag(r + 1)));
  }
  if (config.save_checkpoints && !checkpoint_dir.empty()) {
    std::filesystem::create_directories(checkpoint_dir);
    save_checkpoint(checkpoint_dir / (method.name + "_seed" + std::to_string(seed) + ".ckpt"), *result.model,
                    result.vocab, tc, result.best_epoch);
  }
}

void run_cell(const MethodSpec& method, const ExperimentConfig& config, const SeedData& data, std::uint64_t seed,
              const std::filesystem::path& checkpoint_dir, CellResult& cell) {
  if (method.freq_prior) {
    const auto prior = FreqPrior::fit(data.train, method.train.model.num_clips);
    cell.metrics.push_back(evaluate(prior.predict(data.test), ground_truths(data.test), config.thresholds, split_tag(0)));
    for (std::size_t r = 0; r < data.ood.size(); ++r) {
      cell.metrics.push_back(
          evaluate(prior.predict(data.ood[r]), ground_truths(data.ood[r]), config.thresholds, split_tag(r + 1)));
    }
    return;
  }
  if (config.precision == Precision::kDouble) {
    run_trained<double>(method, config, data, seed, checkpoint_dir, cell);
  } else {
    run_trained<float>(method, config, data, seed, checkpoint_dir, cell);
  }
}

int worker_count(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("VMR_NUM_WORKERS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 1;
}

}  // namespace

std::string to_string(Precision p) { return p == Precision::kDouble ? "double" : "single"; }

Precision precision_from_string(const std::string& s) {
  if (s == "single") return Precision::kSingle;
  if (s == "double") return Precision::kDouble;
  throw std::invalid_argument("precision must be 'single' or 'double', got '" + s + "'");
}

std::vector<MethodSpec> ExperimentConfig::cells() const {
  std::vector<MethodSpec> out = methods;
  for (const auto& flag : ablations) {
    MethodSpec m = builtin_method("dcm", train);
    m.name = "dcm-" + flag;
    m.train.model.ablations = ablations_from_json(json::array({flag}));
    out.push_back(m);
  }
  return out;
}

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw ConfigError("seeds must be non-empty");
  if (methods.empty() && ablations.empty()) throw ConfigError("no methods configured");
  for (double rho : ood_rhos) {
    if (!(rho > 0.0) || !std::isfinite(rho)) throw ConfigError("ood_rhos must be positive");
  }
  std::vector<std::string> names;
  for (const auto& m : cells()) {
    if (std::find(names.begin(), names.end(), m.name) != names.end()) throw ConfigError("duplicate method '" + m.name + "'");
    names.push_back(m.name);
    try {
      m.train.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError("method " + m.name + ": " + e.what());
    }
  }
  if (data.synthetic && data.synthetic->num_clips < 1) throw ConfigError("data.synthetic.num_clips must be positive");
}

ExperimentConfig experiment_config_from_json(const json& j) {
  reject_unknown_keys(j,
                      {"data", "train", "ood_rhos", "ood_placement", "methods", "ablations", "seeds", "precision",
                       "thresholds", "save_checkpoints"},
                      "experiment");
  ExperimentConfig c;
  try {
    if (j.contains("data")) c.data = data_from_json(j.at("data"));
    if (j.contains("train")) c.train = train_config_from_json(j.at("train"));
    if (j.contains("ood_rhos")) c.ood_rhos = j.at("ood_rhos").get<std::vector<double>>();
    if (j.contains("ood_placement")) {
      const auto p = j.at("ood_placement").get<std::string>();
      if (p != "prepend" && p != "append") throw ConfigError("ood_placement must be 'prepend' or 'append'");
      c.ood_placement = p == "prepend" ? OodPlacement::kPrepend : OodPlacement::kAppend;
    }
    if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("precision")) c.precision = precision_from_string(j.at("precision").get<std::string>());
    if (j.contains("thresholds")) c.thresholds = j.at("thresholds").get<std::vector<double>>();
    if (j.contains("save_checkpoints")) c.save_checkpoints = j.at("save_checkpoints").get<bool>();
    if (j.contains("ablations")) {
      ablations_from_json(j.at("ablations"));  // validates the names
      c.ablations = j.at("ablations").get<std::vector<std::string>>();
    }
    const json methods = j.contains("methods") ? j.at("methods") : json::array({"baseline", "dcm"});
    if (!methods.is_array()) throw ConfigError("methods must be a list");
    for (const auto& m : methods) {
      if (m.is_string()) {
        c.methods.push_back(builtin_method(m.get<std::string>(), c.train));
        continue;
      }
      reject_unknown_keys(m, {"name", "base", "train"}, "methods[]");
      MethodSpec spec = builtin_method(m.value("base", "dcm"), c.train);
      spec.name = m.at("name").get<std::string>();
      if (m.contains("train")) spec.train = train_config_from_json(m.at("train"), spec.train);
      c.methods.push_back(spec);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("experiment: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("experiment: ") + e.what());
  }
  c.validate();
  return c;
}

json to_json(const ExperimentConfig& c) {
  json methods = json::array();
  for (const auto& m : c.methods) {
    const std::string base = m.freq_prior ? "freq_prior" : to_string(m.train.model.mode);
    methods.push_back({{"name", m.name}, {"base", base}, {"train", to_json(m.train)}});
  }
  return {{"data", data_to_json(c.data)},
          {"train", to_json(c.train)},
          {"ood_rhos", c.ood_rhos},
          {"ood_placement", c.ood_placement == OodPlacement::kPrepend ? "prepend" : "append"},
          {"methods", methods},
          {"ablations", c.ablations},
          {"seeds", c.seeds},
          {"precision", to_string(c.precision)},
          {"thresholds", c.thresholds},
          {"save_checkpoints", c.save_checkpoints}};
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return experiment_config_from_json(j);
}

std::size_t ExperimentReport::failed() const {
  return static_cast<std::size_t>(std::count_if(cells.begin(), cells.end(), [](const CellResult& c) { return !c.ok; }));
}

const CellResult* ExperimentReport::find(const std::string& method, std::uint64_t seed) const {
  for (const auto& c : cells) {
    if (c.method == method && c.seed == seed) return &c;
  }
  return nullptr;
}

std::vector<Aggregate> aggregate(const std::vector<CellResult>& cells) {
  std::vector<Aggregate> out;
  std::vector<std::vector<const MetricsRecord*>> members;
  for (const auto& cell : cells) {
    if (!cell.ok) continue;
    for (const auto& m : cell.metrics) {
      auto it = std::find_if(out.begin(), out.end(),
                             [&](const Aggregate& a) { return a.method == cell.method && a.split_tag == m.split_tag; });
      if (it == out.end()) {
        out.push_back({cell.method, m.split_tag, 0, 0.0, 0.0, {}, {}});
        members.emplace_back();
        it = out.end() - 1;
      }
      members[static_cast<std::size_t>(it - out.begin())].push_back(&m);
    }
  }
  auto mean_std = [](const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::pair{mean, v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0};
  };
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& ms = members[i];
    out[i].seeds = ms.size();
    std::vector<double> miou;
    for (const auto* m : ms) miou.push_back(m->miou);
    std::tie(out[i].miou_mean, out[i].miou_std) = mean_std(miou);
    for (const auto& [t, v] : ms.front()->r1_at) {
      std::vector<double> r;
      for (const auto* m : ms) r.push_back(m->r1_at.count(t) ? m->r1_at.at(t) : 0.0);
      std::tie(out[i].r1_mean[t], out[i].r1_std[t]) = mean_std(r);
    }
  }
  return out;
}

ExperimentReport run_experiment(const ExperimentConfig& config, int workers,
                                const std::filesystem::path& checkpoint_dir) {
  config.validate();
  ExperimentReport report;
  report.config = to_json(config);
  const auto methods = config.cells();

  std::optional<SeedData> shared;
  if (!config.data.synthetic) {
    const DataSource& d = config.data;
    shared.emplace();
    shared->train = load_split(d.train_annotations, d.train_features, d.format, "train");
    shared->test = load_split(d.test_annotations, d.test_features, d.format, "test");
    if (!d.val_annotations.empty()) shared->val = load_split(d.val_annotations, d.val_features, d.format, "val");
  }

  for (std::uint64_t seed : config.seeds) {
    SeedData data;
    if (config.data.synthetic) {
      auto generated = generate_dataset(*config.data.synthetic, seed);
      data.train = std::move(generated.train);
      data.val = std::move(generated.val);
      data.test = std::move(generated.test);
    } else {
      data.train = shared->train;
      data.val = shared->val;
      data.test = shared->test;
    }
    const int clips = config.train.model.num_clips;
    for (std::size_t r = 0; r < config.ood_rhos.size(); ++r) {
      auto rng = derived_rng(seed, kOodStream, r);
      data.ood.push_back(ood_transform(data.test, config.ood_rhos[r], rng, 0, config.ood_placement));
    }
    report.heatmaps.emplace_back(seed, bias_heatmap(data.train, clips));

    const std::size_t first = report.cells.size();
    for (const auto& m : methods) {
      CellResult cell;
      cell.method = m.name;
      cell.seed = seed;
      report.cells.push_back(cell);
    }
    std::atomic<std::size_t> next{0};
    auto work = [&] {
      for (std::size_t i = next++; i < methods.size(); i = next++) {
        CellResult& cell = report.cells[first + i];
        const auto start = std::chrono::steady_clock::now();
        try {
          run_cell(methods[i], config, data, seed, checkpoint_dir, cell);
          cell.ok = true;
        } catch (const std::exception& e) {
          cell.ok = false;
          cell.error = e.what();
          cell.metrics.clear();
          spdlog::error("{} seed {} failed: {}", cell.method, seed, e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (cell.ok) {
          spdlog::info("{} seed {}: IID mIoU {:.4f}{} ({:.1f}s)", cell.method, seed, cell.metrics.front().miou,
                       cell.metrics.size() > 1 ? fmt::format(", OOD-1 mIoU {:.4f}", cell.metrics[1].miou) : "", secs);
        }
      }
    };
    const int n = std::min<int>(worker_count(workers), static_cast<int>(methods.size()));
    if (n <= 1) {
      work();
    } else {
      std::vector<std::thread> pool;
      for (int t = 0; t < n; ++t) pool.emplace_back(work);
      for (auto& t : pool) t.join();
    }
  }
  report.aggregates = aggregate(report.cells);
  return report;
}

json to_json(const ExperimentReport& r) {
  json cells = json::array();
  for (const auto& c : r.cells) {
    json metrics = json::array();
    for (const auto& m : c.metrics) metrics.push_back(to_json(m));
    char checksum[17];
    std::snprintf(checksum, sizeof checksum, "%016llx", static_cast<unsigned long long>(c.parameter_checksum));
    cells.push_back({{"method", c.method},
                     {"seed", c.seed},
                     {"ok", c.ok},
                     {"error", c.error},
                     {"metrics", metrics},
                     {"trace", trace_to_json(c.trace)},
                     {"best_epoch", c.best_epoch},
                     {"skipped_negatives", c.skipped_negatives},
                     {"parameter_checksum", checksum}});
  }
  json aggregates = json::array();
  for (const auto& a : r.aggregates) {
    json mean = json::object(), sd = json::object();
    for (const auto& [t, v] : a.r1_mean) mean[threshold_label(t)] = v;
    for (const auto& [t, v] : a.r1_std) sd[threshold_label(t)] = v;
    aggregates.push_back({{"method", a.method},
                          {"split_tag", a.split_tag},
                          {"seeds", a.seeds},
                          {"miou_mean", a.miou_mean},
                          {"miou_std", a.miou_std},
                          {"r1_mean", mean},
                          {"r1_std", sd}});
  }
  return {{"config", r.config}, {"cells", cells}, {"aggregates", aggregates}};
}

ExperimentReport report_from_json(const json& j) {
  ExperimentReport r;
  r.config = j.at("config");
  for (const auto& c : j.at("cells")) {
    CellResult cell;
    cell.method = c.at("method").get<std::string>();
    cell.seed = c.at("seed").get<std::uint64_t>();
    cell.ok = c.at("ok").get<bool>();
    cell.error = c.at("error").get<std::string>();
    for (const auto& m : c.at("metrics")) cell.metrics.push_back(metrics_from_json(m));
    cell.trace = trace_from_json(c.at("trace"));
    cell.best_epoch = c.at("best_epoch").get<int>();
    cell.skipped_negatives = c.at("skipped_negatives").get<std::size_t>();
    cell.parameter_checksum = std::stoull(c.at("parameter_checksum").get<std::string>(), nullptr, 16);
    r.cells.push_back(cell);
  }
  for (const auto& a : j.at("aggregates")) {
    Aggregate g;
    g.method = a.at("method").get<std::string>();
    g.split_tag = a.at("split_tag").get<std::string>();
    g.seeds = a.at("seeds").get<std::size_t>();
    g.miou_mean = a.at("miou_mean").get<double>();
    g.miou_std = a.at("miou_std").get<double>();
    for (const auto& [k, v] : a.at("r1_mean").items()) g.r1_mean[std::stod(k)] = v.get<double>();
    for (const auto& [k, v] : a.at("r1_std").items()) g.r1_std[std::stod(k)] = v.get<double>();
    r.aggregates.push_back(g);
  }
  return r;
}

std::string summary_table(const ExperimentReport& report) {
  std::vector<double> thresholds;
  for (const auto& a : report.aggregates) {
    for (const auto& [t, v] : a.r1_mean) {
      if (std::find(thresholds.begin(), thresholds.end(), t) == thresholds.end()) thresholds.push_back(t);
    }
  }
  std::sort(thresholds.begin(), thresholds.end());
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-24s %-8s %5s  %-17s", "method", "split", "seeds", "mIoU");
  out += buf;
  for (double t : thresholds) {
    std::snprintf(buf, sizeof buf, "  %-17s", ("R@1,IoU>" + threshold_label(t)).c_str());
    out += buf;
  }
  out += "\n";
  for (const auto& a : report.aggregates) {
    std::snprintf(buf, sizeof buf, "%-24s %-8s %5zu  %7.4f +- %6.4f", a.method.c_str(), a.split_tag.c_str(), a.seeds,
                  a.miou_mean, a.miou_std);
    out += buf;
    for (double t : thresholds) {
      const double m = a.r1_mean.count(t) ? a.r1_mean.at(t) : 0.0;
      const double s = a.r1_std.count(t) ? a.r1_std.at(t) : 0.0;
      std::snprintf(buf, sizeof buf, "  %7.4f +- %6.4f", m, s);
      out += buf;
    }
    out += "\n";
  }
  for (const auto& c : report.cells) {
    if (!c.ok) out += "FAILED " + c.method + " seed " + std::to_string(c.seed) + ": " + c.error + "\n";
  }
  return out;
}

json environment_fingerprint() {
  char host[256] = {0};
  gethostname(host, sizeof host - 1);
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char stamp[64];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
#if defined(__clang__)
  const std::string compiler = "clang " __clang_version__;
#elif defined(__GNUC__)
  const std::string compiler = "gcc " __VERSION__;
#else
  const std::string compiler = "unknown";
#endif
#ifdef NDEBUG
  const char* build = "release";
#else
  const char* build = "debug";
#endif
  return {{"compiler", compiler},
          {"build", build},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"host", host},
          {"hardware_threads", std::thread::hardware_concurrency()},
          {"time_utc", stamp}};
}

void write_report(const ExperimentReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  auto open = [&](const std::string& name) {
    std::ofstream f(dir / name);
    if (!f) throw std::runtime_error("cannot write " + (dir / name).string());
    return f;
  };
  open("metrics.json") << to_json(report).dump(2) << "\n";

  std::vector<double> thresholds;
  for (const auto& c : report.cells) {
    for (const auto& m : c.metrics) {
      for (const auto& [t, v] : m.r1_at) {
        if (std::find(thresholds.begin(), thresholds.end(), t) == thresholds.end()) thresholds.push_back(t);
      }
    }
  }
  std::sort(thresholds.begin(), thresholds.end());
  {
    auto f = open("metrics.csv");
    f << "method,seed,split,n_queries,miou";
    for (double t : thresholds) f << ",r1_iou_gt_" << threshold_label(t);
    f << "\n";
    char buf[64];
    for (const auto& c : report.cells) {
      for (const auto& m : c.metrics) {
        std::snprintf(buf, sizeof buf, "%.9g", m.miou);
        f << c.method << "," << c.seed << "," << m.split_tag << "," << m.n_queries << "," << buf;
        for (double t : thresholds) {
          std::snprintf(buf, sizeof buf, "%.9g", m.r1_at.count(t) ? m.r1_at.at(t) : 0.0);
          f << "," << buf;
        }
        f << "\n";
      }
    }
  }
  for (const auto& c : report.cells) {
    if (!c.trace.empty()) write_trace_csv(c.trace, dir / ("trace_" + c.method + "_seed" + std::to_string(c.seed) + ".csv"));
  }
  for (const auto& [seed, h] : report.heatmaps) {
    write_heatmap_csv(h, dir / ("heatmap_seed" + std::to_string(seed) + ".csv"));
    write_heatmap_png(h, dir / ("heatmap_seed" + std::to_string(seed) + ".png"));
  }
  open("summary.txt") << summary_table(report);
  open("environment.json") << environment_fingerprint().dump(2) << "\n";
}

}  // namespace vmr
