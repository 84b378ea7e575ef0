#include "vmr/training.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <spdlog/spdlog.h>

#include "vmr/config.hpp"
#include "vmr/synthetic_data.hpp"

namespace vmr {

namespace {

constexpr std::uint64_t kTrainStream = 0x545241494e;
constexpr char kCheckpointMagic[8] = {'V', 'M', 'R', 'C', 'K', 'P', 'T', '1'};

template <typename T>
void require_finite(const ag::Var<T>& v, const char* name) {
  if (v.valid() && !std::isfinite(static_cast<double>(v.item()))) {
    throw TrainingError(std::string("non-finite ") + name + " loss");
  }
}

double value_or_zero(const auto& v) { return v.valid() ? static_cast<double>(v.item()) : 0.0; }

std::size_t argmax(const std::vector<double>& s) {
  return static_cast<std::size_t>(std::max_element(s.begin(), s.end()) - s.begin());
}

}  // namespace

void TrainConfig::validate() const {
  model.validate();
  if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) throw std::invalid_argument("lambda1 and lambda2 must be >= 0");
  if (!(learning_rate >= 0.0)) throw std::invalid_argument("learning_rate must be >= 0");
  if (batch_size < 1 || epochs < 1 || eval_batch < 1) throw std::invalid_argument("batch sizes and epochs must be >= 1");
  if (!(0.0 <= labels.t_min && labels.t_min < labels.t_max && labels.t_max <= 1.0)) {
    throw std::invalid_argument("label range needs 0 <= t_min < t_max <= 1");
  }
}

double TrainConfig::effective_lambda1() const {
  const auto& a = model.ablations;
  return model.mode == Mode::kDcm && !a.no_recon && !a.no_disent ? lambda1 : 0.0;
}

double TrainConfig::effective_lambda2() const {
  const auto& a = model.ablations;
  return model.mode == Mode::kDcm && !a.no_indep && !a.no_disent ? lambda2 : 0.0;
}

bool TrainConfig::uses_counterfactual() const {
  const auto& a = model.ablations;
  return model.mode == Mode::kDcm && !a.no_counterf && !a.no_interv;
}

template <typename T>
LossTerms<T> total_loss(const Model<T>& model, Binding<T>& bind, std::span<const Pair> positives,
                        std::span<const Pair> negatives, double lambda1, double lambda2, DcorScope scope) {
  using ag::Index;
  if (positives.empty()) throw std::invalid_argument("total_loss: no positive pairs");
  const std::size_t n = model.grid().num_candidates();
  std::vector<std::vector<int>> queries;
  std::vector<const FeatureMatrix*> videos;
  std::vector<double> labels;
  for (const auto* group : {&positives, &negatives}) {
    for (const Pair& p : *group) {
      queries.push_back(*p.query);
      videos.push_back(p.clips);
      if (p.labels) {
        if (p.labels->size() != n) throw std::invalid_argument("total_loss: label map does not match the grid");
        labels.insert(labels.end(), p.labels->begin(), p.labels->end());
      } else {
        labels.insert(labels.end(), n, 0.0);
      }
    }
  }
  const ModelConfig& mc = model.config();
  const ag::Matrix<T> clips = mc.mode == Mode::kBlind ? ag::Matrix<T>()
                                                      : stack_clips<T>(videos, mc.num_clips, mc.feature_dim);
  const auto r = model.forward(bind, queries, clips);

  const auto np = static_cast<Index>(positives.size() * n);
  const auto nn = static_cast<Index>(negatives.size() * n);
  const std::span<const double> all_labels(labels);
  LossTerms<T> t;
  std::vector<ag::Var<T>> terms;
  std::vector<T> weights;

  t.bce_pos = ag::bce_mean(nn == 0 ? r.scores : ag::slice_rows(r.scores, 0, np), all_labels.first(np));
  require_finite(t.bce_pos, "positive bce");
  terms.push_back(t.bce_pos);
  weights.push_back(T(1));
  if (nn > 0) {
    t.bce_neg = ag::bce_mean(ag::slice_rows(r.scores, np, nn), all_labels.subspan(np));
    require_finite(t.bce_neg, "counterfactual bce");
    terms.push_back(t.bce_neg);
    weights.push_back(T(1));
  }
  if (lambda1 > 0.0 && r.location.valid()) {
    t.recon = recon_loss(ag::slice_rows(r.location, 0, np), ag::slice_rows(r.positional, 0, np));
    require_finite(t.recon, "reconstruction");
    terms.push_back(t.recon);
    weights.push_back(static_cast<T>(lambda1));
  }
  if (lambda2 > 0.0 && r.content.valid()) {
    std::vector<Index> rows;
    for (Index i = 0; i < np; ++i) {
      if (scope == DcorScope::kAllCells || all_labels[static_cast<std::size_t>(i)] >= kPositiveLabel) rows.push_back(i);
    }
    if (rows.size() >= 2) {
      const std::span<const Index> idx(rows);
      t.indep = ag::distance_correlation(ag::gather_rows(r.content, idx), ag::gather_rows(r.location, idx));
      require_finite(t.indep, "independence");
      terms.push_back(t.indep);
      weights.push_back(static_cast<T>(lambda2));
    }
  }
  t.total = ag::weighted_sum(std::span<const ag::Var<T>>(terms), std::span<const T>(weights));
  require_finite(t.total, "total");
  return t;
}

CounterfactualSampler::CounterfactualSampler(const DatasetSplit& corpus) {
  keys_.reserve(corpus.samples.size());
  for (const auto& s : corpus.samples) {
    std::vector<std::string> keys;
    for (const auto& a : s.annotations) keys.push_back(content_key(a.tokens));
    for (const auto& a : s.distractors) keys.push_back(content_key(a.tokens));
    keys_.push_back(std::move(keys));
  }
}

const std::vector<std::size_t>& CounterfactualSampler::eligible(const std::vector<std::string>& query_tokens) {
  const std::string key = content_key(query_tokens);
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;
  std::vector<std::size_t> ok;
  for (std::size_t v = 0; v < keys_.size(); ++v) {
    if (std::find(keys_[v].begin(), keys_[v].end(), key) == keys_[v].end()) ok.push_back(v);
  }
  return cache_.emplace(key, std::move(ok)).first->second;
}

std::optional<std::size_t> CounterfactualSampler::sample(const std::vector<std::string>& query_tokens,
                                                         std::mt19937_64& rng) {
  const auto& ok = eligible(query_tokens);
  if (ok.empty()) {
    ++skipped_;
    return std::nullopt;
  }
  std::uniform_int_distribution<std::size_t> pick(0, ok.size() - 1);
  return ok[pick(rng)];
}

template <typename T>
Adam<T>::Adam(ParameterSet<T>& params, double lr, double beta1, double beta2, double eps)
    : params_(params), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : params_) {
    m_.push_back(ag::Matrix<T>::Zero(p.value.rows(), p.value.cols()));
    v_.push_back(ag::Matrix<T>::Zero(p.value.rows(), p.value.cols()));
  }
}

template <typename T>
void Adam<T>::step() {
  ++t_;
  const T b1 = static_cast<T>(beta1_);
  const T b2 = static_cast<T>(beta2_);
  const T c1 = static_cast<T>(1.0 - std::pow(beta1_, static_cast<double>(t_)));
  const T c2 = static_cast<T>(1.0 - std::pow(beta2_, static_cast<double>(t_)));
  const T lr = static_cast<T>(lr_);
  const T eps = static_cast<T>(eps_);
  std::size_t i = 0;
  for (auto& p : params_) {
    auto& m = m_[i];
    auto& v = v_[i];
    ++i;
    if (p.grad.size() == 0) continue;
    m = b1 * m + (T(1) - b1) * p.grad;
    v = b2 * v + (T(1) - b2) * p.grad.cwiseAbs2();
    p.value.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  }
}

std::vector<std::vector<double>> query_labels(const DatasetSplit& split, const MomentGrid& grid, LabelRange range) {
  std::vector<std::vector<double>> out;
  for (const QueryRef& q : enumerate_queries(split)) {
    const VideoSample& s = split.samples[q.sample];
    const MomentGrid g = grid.rescaled(s.duration / grid.num_clips());
    out.push_back(scaled_labels(s.annotations[q.annotation].span, g, range).values);
  }
  return out;
}

template <typename T>
std::vector<TemporalInterval> predict_top1(const Model<T>& model, const Vocabulary& vocab, const DatasetSplit& split,
                                           int eval_batch, std::vector<double>* top_scores) {
  const auto queries = enumerate_queries(split);
  std::vector<TemporalInterval> out;
  out.reserve(queries.size());
  if (top_scores) top_scores->clear();
  const int t = model.config().num_clips;
  for (std::size_t begin = 0; begin < queries.size(); begin += static_cast<std::size_t>(eval_batch)) {
    const std::size_t end = std::min(queries.size(), begin + static_cast<std::size_t>(eval_batch));
    std::vector<std::vector<int>> tokens;
    std::vector<const FeatureMatrix*> videos;
    for (std::size_t i = begin; i < end; ++i) {
      const VideoSample& s = split.samples[queries[i].sample];
      tokens.push_back(vocab.encode(s.annotations[queries[i].annotation].tokens));
      videos.push_back(&s.clip_features);
    }
    const auto scores = model.score(tokens, videos);
    for (std::size_t i = begin; i < end; ++i) {
      const VideoSample& s = split.samples[queries[i].sample];
      const auto& sc = scores[i - begin];
      const std::size_t k = argmax(sc);
      out.push_back(model.grid().rescaled(s.duration / t).interval(k));
      if (top_scores) top_scores->push_back(sc[k]);
    }
  }
  return out;
}

template <typename T>
double probe_dcor(const Model<T>& model, const Vocabulary& vocab, const DatasetSplit& split, LabelRange range,
                  int eval_batch) {
  using ag::Index;
  if (model.config().mode != Mode::kDcm) return 0.0;
  const auto queries = enumerate_queries(split);
  const auto labels = query_labels(split, model.grid(), range);
  const std::size_t n = model.grid().num_candidates();
  const int d = model.config().d;
  std::vector<double> content;
  std::vector<double> location;
  for (std::size_t begin = 0; begin < queries.size(); begin += static_cast<std::size_t>(eval_batch)) {
    const std::size_t end = std::min(queries.size(), begin + static_cast<std::size_t>(eval_batch));
    std::vector<std::vector<int>> tokens;
    std::vector<const FeatureMatrix*> videos;
    for (std::size_t i = begin; i < end; ++i) {
      const VideoSample& s = split.samples[queries[i].sample];
      tokens.push_back(vocab.encode(s.annotations[queries[i].annotation].tokens));
      videos.push_back(&s.clip_features);
    }
    ag::Tape<T> tape;
    Binding<T> bind(tape, model.params());
    const auto r = model.forward(bind, tokens,
                                 stack_clips<T>(videos, model.config().num_clips, model.config().feature_dim));
    for (std::size_t i = begin; i < end; ++i) {
      for (std::size_t k = 0; k < n; ++k) {
        if (labels[i][k] < kPositiveLabel) continue;
        const auto row = static_cast<Index>((i - begin) * n + k);
        for (int c = 0; c < d; ++c) {
          content.push_back(static_cast<double>(r.content.value()(row, c)));
          location.push_back(static_cast<double>(r.location.value()(row, c)));
        }
      }
    }
  }
  const auto rows = static_cast<Index>(content.size() / static_cast<std::size_t>(d));
  if (rows < 2) return 0.0;
  const Eigen::Map<const ag::Matrix<double>> c(content.data(), rows, d);
  const Eigen::Map<const ag::Matrix<double>> l(location.data(), rows, d);
  return ag::distance_correlation_value<double>(c, l);
}

namespace {

double mean_top1_iou(const std::vector<TemporalInterval>& predictions, const DatasetSplit& split) {
  const auto queries = enumerate_queries(split);
  if (queries.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    total += iou(predictions[i], split.samples[queries[i].sample].annotations[queries[i].annotation].span);
  }
  return total / static_cast<double>(queries.size());
}

}  // namespace

template <typename T>
TrainResult<T> train(const TrainConfig& config, const DatasetSplit& train_split, const DatasetSplit& val,
                     const std::function<void(const TraceRow&)>& on_epoch) {
  config.validate();
  const auto queries = enumerate_queries(train_split);
  if (queries.empty()) throw std::invalid_argument("training split has no queries");

  TrainResult<T> result;
  result.vocab = Vocabulary::build(train_split);
  result.model = std::make_unique<Model<T>>(config.model, result.vocab.size());
  Model<T>& model = *result.model;
  model.init(config.seed);

  const auto labels = query_labels(train_split, model.grid(), config.labels);
  std::vector<std::vector<int>> tokens;
  for (const auto& q : queries) {
    tokens.push_back(result.vocab.encode(train_split.samples[q.sample].annotations[q.annotation].tokens));
  }
  const double lambda1 = config.effective_lambda1();
  const double lambda2 = config.effective_lambda2();
  const bool counterfactual = config.uses_counterfactual();

  CounterfactualSampler sampler(train_split);
  Adam<T> adam(model.params(), config.learning_rate);
  auto rng = derived_rng(config.seed, kTrainStream, 0);
  std::vector<std::size_t> order(queries.size());
  std::iota(order.begin(), order.end(), 0);

  double best_miou = -1.0;
  std::vector<ag::Matrix<T>> best;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    TraceRow row;
    row.epoch = epoch;
    std::size_t seen = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(config.batch_size));
      std::vector<Pair> pos;
      std::vector<Pair> neg;
      for (std::size_t i = begin; i < end; ++i) {
        const std::size_t qi = order[i];
        const VideoSample& s = train_split.samples[queries[qi].sample];
        pos.push_back({&tokens[qi], &s.clip_features, &labels[qi]});
        if (counterfactual) {
          const auto& words = s.annotations[queries[qi].annotation].tokens;
          if (const auto v = sampler.sample(words, rng)) {
            neg.push_back({&tokens[qi], &train_split.samples[*v].clip_features, nullptr});
          }
        }
      }
      ag::Tape<T> tape;
      Binding<T> bind(tape, model.params());
      LossTerms<T> terms;
      try {
        terms = total_loss<T>(model, bind, pos, neg, lambda1, lambda2, config.dcor_scope);
      } catch (const TrainingError& e) {
        throw TrainingError(std::string(e.what()) + " at epoch " + std::to_string(epoch) + ", batch starting " +
                            std::to_string(begin));
      }
      model.params().zero_grad();
      tape.backward(terms.total);
      adam.step();

      const auto w = static_cast<double>(end - begin);
      row.l_bce_pos += w * value_or_zero(terms.bce_pos);
      row.l_bce_neg += w * value_or_zero(terms.bce_neg);
      row.l_recon += w * value_or_zero(terms.recon);
      row.l_indep += w * value_or_zero(terms.indep);
      seen += end - begin;
    }
    row.l_bce_pos /= static_cast<double>(seen);
    row.l_bce_neg /= static_cast<double>(seen);
    row.l_recon /= static_cast<double>(seen);
    row.l_indep /= static_cast<double>(seen);
    if (!val.samples.empty()) {
      row.val_miou = mean_top1_iou(predict_top1(model, result.vocab, val, config.eval_batch), val);
      row.dcor = probe_dcor(model, result.vocab, val, config.labels, config.eval_batch);
    }
    result.trace.push_back(row);
    spdlog::debug("epoch {} bce+ {:.4f} bce- {:.4f} recon {:.4f} indep {:.4f} dcor {:.4f} val mIoU {:.4f}", epoch,
                  row.l_bce_pos, row.l_bce_neg, row.l_recon, row.l_indep, row.dcor, row.val_miou);
    if (on_epoch) on_epoch(row);
    if (val.samples.empty() || row.val_miou > best_miou) {
      best_miou = row.val_miou;
      result.best_epoch = epoch;
      best.clear();
      for (const auto& p : model.params()) best.push_back(p.value);
    }
  }
  std::size_t i = 0;
  for (auto& p : model.params()) p.value = best[i++];
  result.skipped_negatives = sampler.skipped();
  if (result.skipped_negatives > 0) {
    spdlog::warn("{} queries had no eligible counterfactual video", result.skipped_negatives);
  }
  return result;
}

void write_trace_csv(const std::vector<TraceRow>& trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trace: " + path.string());
  out << "epoch,l_bce_pos,l_bce_neg,l_recon,l_indep,dcor,val_miou\n";
  char buf[256];
  for (const auto& r : trace) {
    std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", r.epoch, r.l_bce_pos, r.l_bce_neg, r.l_recon,
                  r.l_indep, r.dcor, r.val_miou);
    out << buf;
  }
}

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const Model<T>& model, const Vocabulary& vocab,
                     const TrainConfig& config, int epoch, const std::string& rng_state) {
  nlohmann::json index = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& p : model.params()) {
    index.push_back({{"name", p.name}, {"shape", {p.value.rows(), p.value.cols()}}, {"offset", offset}});
    offset += static_cast<std::uint64_t>(p.value.size());
  }
  TrainConfig stored = config;
  stored.model = model.config();
  const nlohmann::json manifest = {{"format", "vmr-checkpoint"},
                                   {"version", 1},
                                   {"precision", sizeof(T) == 4 ? "single" : "double"},
                                   {"config", to_json(stored)},
                                   {"epoch", epoch},
                                   {"vocabulary", vocab.words()},
                                   {"rng_state", rng_state},
                                   {"parameters", index}};
  const std::string text = manifest.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path.string());
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  const auto put_u64 = [&out](std::uint64_t v) {
    char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    out.write(bytes, 8);
  };
  put_u64(text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& p : model.params()) {
    for (ag::Index i = 0; i < p.value.size(); ++i) put_u64(std::bit_cast<std::uint64_t>(double(p.value.data()[i])));
  }
  if (!out) throw std::runtime_error("failed writing checkpoint: " + path.string());
}

template <typename T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path.string());
  char magic[8];
  if (!in.read(magic, 8) || !std::equal(magic, magic + 8, kCheckpointMagic)) {
    throw std::runtime_error("not a checkpoint file: " + path.string());
  }
  const auto get_u64 = [&in, &path]() {
    unsigned char bytes[8];
    if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw std::runtime_error("truncated checkpoint: " + path.string());
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    return v;
  };
  const std::uint64_t size = get_u64();
  std::string text(size, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(size))) throw std::runtime_error("truncated checkpoint manifest");
  const auto manifest = nlohmann::json::parse(text);

  Checkpoint<T> ck;
  ck.config = train_config_from_json(manifest.at("config"));
  ck.vocab = Vocabulary::from_words(manifest.at("vocabulary").get<std::vector<std::string>>());
  ck.epoch = manifest.at("epoch").get<int>();
  ck.rng_state = manifest.value("rng_state", "");
  ck.model = std::make_unique<Model<T>>(ck.config.model, ck.vocab.size());
  auto& params = ck.model->params();
  std::vector<bool> seen(params.size(), false);
  std::uint64_t expected_offset = 0;
  for (const auto& entry : manifest.at("parameters")) {
    const auto name = entry.at("name").get<std::string>();
    const auto shape = entry.at("shape").get<std::vector<ag::Index>>();
    if (entry.at("offset").get<std::uint64_t>() != expected_offset) throw std::runtime_error("checkpoint offsets are not contiguous");
    const ParamId id = params.find(name);
    auto& p = params[id];
    if (shape.size() != 2 || shape[0] != p.value.rows() || shape[1] != p.value.cols()) {
      throw std::runtime_error("checkpoint shape mismatch for " + name);
    }
    for (ag::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = static_cast<T>(std::bit_cast<double>(get_u64()));
    seen[id] = true;
    expected_offset += static_cast<std::uint64_t>(p.value.size());
  }
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (!seen[i]) throw std::runtime_error("checkpoint lacks parameter " + params[i].name);
  }
  params.zero_grad();
  return ck;
}

std::vector<GradCheckEntry> grad_check(ParameterSet<double>& params, const LossBuilder& loss,
                                       const GradCheckOptions& options,
                                       const std::function<void(ParameterSet<double>&)>& corrupt) {
  params.zero_grad();
  {
    ag::Tape<double> tape;
    Binding<double> bind(tape, params);
    tape.backward(loss(bind));
  }
  if (corrupt) corrupt(params);
  std::vector<ag::Matrix<double>> analytic;
  for (const auto& p : params) analytic.push_back(p.grad);

  const auto eval = [&]() {
    ag::Tape<double> tape;
    tape.track_branches(true);
    Binding<double> bind(tape, params, false);
    const double v = loss(bind).item();
    return std::pair{v, tape.branch_signature()};
  };
  std::mt19937_64 rng(options.seed);
  std::vector<GradCheckEntry> report;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& p = params[pi];
    GradCheckEntry e;
    e.group = p.name;
    std::vector<ag::Index> coords(static_cast<std::size_t>(p.value.size()));
    std::iota(coords.begin(), coords.end(), 0);
    std::shuffle(coords.begin(), coords.end(), rng);
    for (ag::Index c : coords) {
      if (e.coords >= options.coords_per_group) break;
      double& x = p.value.data()[c];
      const double x0 = x;
      const std::uint64_t base = eval().second;
      bool kink = false;
      double f[4];
      const double h = options.step;
      const double offsets[4] = {2 * h, h, -h, -2 * h};
      for (int k = 0; k < 4; ++k) {
        x = x0 + offsets[k];
        const auto [v, sig] = eval();
        f[k] = v;
        kink = kink || sig != base;
      }
      x = x0;
      if (kink) {
        ++e.skipped;
        continue;
      }
      const double n1 = (-f[0] + 8 * f[1] - 8 * f[2] + f[3]) / (12 * h);
      const double a = analytic[pi].data()[c];
      const double err = std::abs(a - n1);
      e.max_abs_error = std::max(e.max_abs_error, err);
      e.max_rel_error = std::max(e.max_rel_error, err / std::max({std::abs(a), std::abs(n1), options.floor}));
      ++e.coords;
    }
    report.push_back(e);
  }
  params.zero_grad();
  return report;
}

#define VMR_INSTANTIATE_TRAINING(T)                                                                           \
  template LossTerms<T> total_loss(const Model<T>&, Binding<T>&, std::span<const Pair>, std::span<const Pair>, \
                                   double, double, DcorScope);                                                \
  template class Adam<T>;                                                                                     \
  template TrainResult<T> train(const TrainConfig&, const DatasetSplit&, const DatasetSplit&,                 \
                                const std::function<void(const TraceRow&)>&);                                 \
  template std::vector<TemporalInterval> predict_top1(const Model<T>&, const Vocabulary&, const DatasetSplit&, \
                                                      int, std::vector<double>*);                             \
  template double probe_dcor(const Model<T>&, const Vocabulary&, const DatasetSplit&, LabelRange, int);       \
  template void save_checkpoint(const std::filesystem::path&, const Model<T>&, const Vocabulary&,             \
                                const TrainConfig&, int, const std::string&);                                 \
  template Checkpoint<T> load_checkpoint(const std::filesystem::path&);

VMR_INSTANTIATE_TRAINING(float)
VMR_INSTANTIATE_TRAINING(double)

#undef VMR_INSTANTIATE_TRAINING

}  // namespace vmr
