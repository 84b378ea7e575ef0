#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "vmr/config.hpp"
#include "vmr/encoders.hpp"
#include "vmr/evaluation.hpp"
#include "vmr/harness.hpp"
#include "vmr/synthetic_data.hpp"
#include "vmr/training.hpp"

namespace py = pybind11;
using namespace vmr;
using nlohmann::json;

namespace {

py::dict split_to_dict(const DatasetSplit& s) {
  py::list videos;
  for (const auto& v : s.samples) {
    py::list anns;
    for (const auto& a : v.annotations) anns.append(py::make_tuple(a.tokens, a.span.start, a.span.end));
    py::dict d;
    d["id"] = v.video_id;
    d["duration"] = v.duration;
    d["features"] = v.clip_features;
    d["annotations"] = anns;
    videos.append(d);
  }
  py::dict out;
  out["name"] = s.name;
  out["videos"] = videos;
  return out;
}

DatasetSplit split_from_dict(const py::dict& d) {
  DatasetSplit s;
  s.name = d.contains("name") ? d["name"].cast<std::string>() : "split";
  for (const auto& item : d["videos"].cast<py::list>()) {
    const auto v = item.cast<py::dict>();
    VideoSample sample;
    sample.video_id = v["id"].cast<std::string>();
    sample.duration = v["duration"].cast<double>();
    if (v.contains("features")) sample.clip_features = v["features"].cast<FeatureMatrix>();
    for (const auto& a : v["annotations"].cast<py::list>()) {
      const auto t = a.cast<py::tuple>();
      sample.annotations.push_back({t[0].cast<std::vector<std::string>>(), make_interval(t[1].cast<double>(), t[2].cast<double>())});
    }
    s.samples.push_back(std::move(sample));
  }
  return s;
}

py::dict metrics_dict(const MetricsRecord& m) {
  py::dict r1;
  for (const auto& [t, v] : m.r1_at) r1[py::float_(t)] = v;
  py::dict d;
  d["miou"] = m.miou;
  d["r1_at"] = r1;
  d["n_queries"] = m.n_queries;
  d["split_tag"] = m.split_tag;
  return d;
}

}  // namespace

PYBIND11_MODULE(_vmr, m) {
  m.doc() = "Moment retrieval with deconfounded cross-modal matching";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def("iou", [](double s1, double e1, double s2, double e2) { return iou(make_interval(s1, e1), make_interval(s2, e2)); },
        py::arg("start_a"), py::arg("end_a"), py::arg("start_b"), py::arg("end_b"));

  m.def("candidates", [](int num_clips, double clip_duration) {
    const MomentGrid g(num_clips, clip_duration);
    std::vector<std::pair<int, int>> cells;
    FeatureMatrix spans(static_cast<Eigen::Index>(g.num_candidates()), 2);
    for (std::size_t k = 0; k < g.num_candidates(); ++k) {
      cells.emplace_back(g.cell(k).start_clip, g.cell(k).end_clip);
      spans(static_cast<Eigen::Index>(k), 0) = g.interval(k).start;
      spans(static_cast<Eigen::Index>(k), 1) = g.interval(k).end;
    }
    return py::make_tuple(cells, spans);
  }, py::arg("num_clips"), py::arg("clip_duration") = 1.0, "Valid (start, end) clip cells and their [start, end) spans.");

  m.def("scaled_labels", [](double start, double end, int num_clips, double clip_duration, double t_min, double t_max) {
    return scaled_labels(make_interval(start, end), MomentGrid(num_clips, clip_duration), {t_min, t_max}).values;
  }, py::arg("start"), py::arg("end"), py::arg("num_clips"), py::arg("clip_duration") = 1.0, py::arg("t_min") = 0.5,
     py::arg("t_max") = 1.0);

  m.def("positional_embedding", [](double start, double end, int d) { return positional_embedding({start, end}, d); },
        py::arg("start"), py::arg("end"), py::arg("d"));

  m.def("distance_correlation", [](const FeatureMatrix& x, const FeatureMatrix& y) {
    if (x.rows() != y.rows() || x.rows() < 2) throw std::invalid_argument("need two paired samples or more");
    return distance_correlation<double>(x, y);
  }, py::arg("x"), py::arg("y"));

  m.def("generate_dataset", [](const std::string& config_json, std::uint64_t seed) {
    const auto d = generate_dataset(synthetic_config_from_json(json::parse(config_json)), seed);
    py::dict out;
    out["train"] = split_to_dict(d.train);
    out["val"] = split_to_dict(d.val);
    out["test"] = split_to_dict(d.test);
    return out;
  }, py::arg("config_json"), py::arg("seed"));

  m.def("ood_transform", [](const py::dict& split, double rho, std::uint64_t seed, int num_clips) {
    auto rng = derived_rng(seed, 0x4f4f44, 0);
    return split_to_dict(ood_transform(split_from_dict(split), rho, rng, num_clips));
  }, py::arg("split"), py::arg("rho"), py::arg("seed") = 0, py::arg("num_clips") = 0);

  m.def("evaluate", [](const std::vector<std::pair<double, double>>& predictions,
                       const std::vector<std::vector<std::pair<double, double>>>& ground_truths,
                       const std::vector<double>& thresholds) {
    std::vector<TemporalInterval> p;
    for (const auto& [s, e] : predictions) p.push_back(make_interval(s, e));
    std::vector<std::vector<TemporalInterval>> g;
    for (const auto& list : ground_truths) {
      auto& row = g.emplace_back();
      for (const auto& [s, e] : list) row.push_back(make_interval(s, e));
    }
    return metrics_dict(evaluate(p, g, thresholds));
  }, py::arg("predictions"), py::arg("ground_truths"), py::arg("thresholds") = kDefaultThresholds);

  m.def("freq_prior", [](const py::dict& train, int num_clips) {
    const auto fp = FreqPrior::fit(split_from_dict(train), num_clips);
    const auto c = MomentGrid(num_clips, 1.0).cell(fp.best_cell());
    return py::make_tuple(fp.scores(), std::make_pair(c.start_clip, c.end_clip));
  }, py::arg("train"), py::arg("num_clips"), "Vote shares per cell and the winning (start, end) clip cell.");

  m.def("bias_heatmap", [](const py::dict& split, int num_clips) {
    const auto h = bias_heatmap(split_from_dict(split), num_clips);
    Eigen::Matrix<long, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> out(num_clips, num_clips);
    for (int a = 0; a < num_clips; ++a) {
      for (int b = 0; b < num_clips; ++b) out(a, b) = h.at(a, b);
    }
    return out;
  }, py::arg("split"), py::arg("num_clips"));

  m.def("grad_probes", [](std::size_t coords, std::uint64_t seed) {
    GradCheckOptions o;
    o.coords_per_group = coords;
    o.seed = seed;
    py::list out;
    for (const auto& probe : run_grad_probes(o)) {
      for (const auto& e : probe.entries) {
        py::dict d;
        d["group"] = e.group;
        d["coords"] = e.coords;
        d["skipped"] = e.skipped;
        d["max_rel_error"] = e.max_rel_error;
        d["max_abs_error"] = e.max_abs_error;
        out.append(d);
      }
    }
    return out;
  }, py::arg("coords_per_group") = 50, py::arg("seed") = 0);

  m.def("experiment_config", [](const std::string& config_json) {
    return to_json(experiment_config_from_json(json::parse(config_json))).dump();
  }, py::arg("config_json"), "Validates a config and returns it with every default filled in.");

  m.def("run_experiment", [](const std::string& config_json, int workers, const std::string& out_dir) {
    const auto config = experiment_config_from_json(json::parse(config_json));
    ExperimentReport report;
    {
      py::gil_scoped_release release;
      report = run_experiment(config, workers);
      if (!out_dir.empty()) write_report(report, out_dir);
    }
    return to_json(report).dump();
  }, py::arg("config_json"), py::arg("workers") = 1, py::arg("out_dir") = "");

  m.def("summary_table", [](const std::string& report_json) {
    return summary_table(report_from_json(json::parse(report_json)));
  }, py::arg("report_json"));
}
