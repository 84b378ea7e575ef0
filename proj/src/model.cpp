#include "vmr/model.hpp"

#include <stdexcept>

#include "vmr/synthetic_data.hpp"

namespace vmr {

void ModelConfig::validate() const {
  if (d < 4 || d % 4 != 0) throw std::invalid_argument("d must be a positive multiple of 4");
  if (num_clips < 1) throw std::invalid_argument("num_clips must be positive");
  if (feature_dim < 1 || embed_dim < 1 || lstm_layers < 1) throw std::invalid_argument("model sizes must be positive");
  for (const auto& c : conv_stack) {
    if (c.kernel <= 0 || c.kernel % 2 == 0) throw std::invalid_argument("conv kernels must be odd and positive");
  }
  if (!(max_period > 0.0)) throw std::invalid_argument("max_period must be positive");
}

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::kDcm:
      return "dcm";
    case Mode::kBaseline:
      return "baseline";
    case Mode::kBlind:
      return "blind";
  }
  return "?";
}

std::string to_string(HeadKind head) { return head == HeadKind::kCmi ? "cmi" : "tcn"; }
std::string to_string(PriorMode prior) { return prior == PriorMode::kAbsorbed ? "absorbed" : "literal"; }

Mode mode_from_string(const std::string& s) {
  if (s == "dcm") return Mode::kDcm;
  if (s == "baseline") return Mode::kBaseline;
  if (s == "blind") return Mode::kBlind;
  throw std::invalid_argument("unknown mode '" + s + "' (expected dcm, baseline or blind)");
}

HeadKind head_from_string(const std::string& s) {
  if (s == "cmi") return HeadKind::kCmi;
  if (s == "tcn") return HeadKind::kTcn;
  throw std::invalid_argument("unknown head '" + s + "' (expected cmi or tcn)");
}

PriorMode prior_from_string(const std::string& s) {
  if (s == "absorbed") return PriorMode::kAbsorbed;
  if (s == "literal") return PriorMode::kLiteral;
  throw std::invalid_argument("unknown prior mode '" + s + "' (expected absorbed or literal)");
}

template <typename T>
ag::Matrix<T> stack_clips(std::span<const FeatureMatrix* const> videos, int num_clips, int feature_dim) {
  ag::Matrix<T> out(static_cast<ag::Index>(videos.size()) * num_clips, feature_dim);
  for (std::size_t v = 0; v < videos.size(); ++v) {
    const FeatureMatrix& f = *videos[v];
    if (f.rows() != num_clips || f.cols() != feature_dim) {
      throw std::invalid_argument("video features must be " + std::to_string(num_clips) + " x " +
                                  std::to_string(feature_dim) + ", got " + std::to_string(f.rows()) + " x " +
                                  std::to_string(f.cols()));
    }
    out.middleRows(static_cast<ag::Index>(v) * num_clips, num_clips) = f.cast<T>();
  }
  return out;
}

namespace {

ModelConfig checked(ModelConfig c) {
  c.validate();
  return c;
}

}  // namespace

template <typename T>
Model<T>::Model(ModelConfig config, std::size_t vocab_size)
    : config_(checked(std::move(config))),
      vocab_size_(vocab_size),
      grid_(enumerate_candidates(config_.num_clips, 1.0)) {
  if (vocab_size < 1) throw std::invalid_argument("vocabulary must contain the unknown token");
  const int d = config_.d;
  query_ = QueryEncoder<T>::create(params_, static_cast<int>(vocab_size), config_.embed_dim, d, config_.lstm_layers);
  moment_ = MomentEncoder<T>::create(params_, config_.feature_dim, d);
  disentangler_ = Disentangler<T>::create(params_, d);
  intervention_ = Intervention<T>::create(params_, d);
  matcher_ = Matcher<T>::create(params_, config_.head, d, config_.conv_stack, config_.cmi_bias);
  positional_ = positional_bank(grid_, d, config_.max_period).template cast<T>();
  plans_ = std::make_unique<ConvPlanCache>(grid_);
}

template <typename T>
void Model<T>::init(std::uint64_t seed) {
  constexpr std::uint64_t kInitStream = 0x494e4954;
  auto rng = derived_rng(seed, kInitStream, 0);
  query_.init(params_, rng);
  rng = derived_rng(seed, kInitStream, 1);
  moment_.init(params_, rng);
  rng = derived_rng(seed, kInitStream, 2);
  disentangler_.init(params_, rng);
  rng = derived_rng(seed, kInitStream, 3);
  intervention_.init(params_, rng);
  rng = derived_rng(seed, kInitStream, 4);
  matcher_.init(params_, rng);
  params_.zero_grad();
}

template <typename T>
ForwardResult<T> Model<T>::forward(Binding<T>& bind, std::span<const std::vector<int>> queries,
                                   const ag::Matrix<T>& clips) const {
  using ag::Index;
  if (queries.empty()) throw std::invalid_argument("forward: empty batch");
  ag::Tape<T>& tape = bind.tape();
  const auto videos = static_cast<Index>(queries.size());
  const auto n = static_cast<Index>(grid_.num_candidates());

  ForwardResult<T> r;
  r.videos = static_cast<int>(videos);
  ag::Matrix<T> pos(videos * n, config_.d);
  std::vector<Index> owner(static_cast<std::size_t>(videos * n));
  for (Index v = 0; v < videos; ++v) {
    pos.middleRows(v * n, n) = positional_;
    std::fill(owner.begin() + v * n, owner.begin() + (v + 1) * n, v);
  }
  r.positional = tape.constant(std::move(pos));
  const auto q = query_.encode(bind, queries);

  ag::Var<T> x;
  if (config_.mode == Mode::kBlind) {
    x = r.positional;
  } else {
    if (clips.rows() != videos * config_.num_clips) {
      throw std::invalid_argument("forward: expected " + std::to_string(videos * config_.num_clips) + " clip rows");
    }
    const auto v = moment_.encode(bind, tape.constant(clips), grid_);
    if (config_.mode == Mode::kBaseline) {
      x = v;
    } else {
      const Ablations& ab = config_.ablations;
      if (ab.no_disent) {
        r.content = v;
        r.location = r.positional;
      } else {
        const auto parts = disentangler_.apply(bind, v);
        r.content = parts.content;
        r.location = parts.location;
      }
      x = ab.no_loc_feat ? r.content
                         : transform_inputs(q, r.content, r.location, bind(intervention_.w2), bind(matcher_.w3)).v_bar;
      if (!ab.no_interv) {
        x = ag::add(x, intervention_.expected_effect(bind, q, r.content, r.location, config_.prior));
      }
    }
  }
  const auto q_bar = ag::matmul_nt(q, bind(matcher_.w3));
  const auto q_cells = ag::gather_rows(q_bar, std::span<const Index>(owner));
  r.scores = ag::sigmoid(matcher_.logits(bind, q_cells, x, *plans_, r.videos));
  return r;
}

template <typename T>
std::vector<std::vector<double>> Model<T>::score(std::span<const std::vector<int>> queries,
                                                 std::span<const FeatureMatrix* const> videos) const {
  if (queries.size() != videos.size()) throw std::invalid_argument("score: one video per query");
  if (queries.empty()) return {};
  ag::Tape<T> tape;
  Binding<T> bind(tape, params_);
  const ag::Matrix<T> clips = config_.mode == Mode::kBlind
                                  ? ag::Matrix<T>()
                                  : stack_clips<T>(videos, config_.num_clips, config_.feature_dim);
  const auto r = forward(bind, queries, clips);
  const auto n = grid_.num_candidates();
  std::vector<std::vector<double>> out(queries.size(), std::vector<double>(n));
  for (std::size_t v = 0; v < queries.size(); ++v) {
    for (std::size_t k = 0; k < n; ++k) {
      out[v][k] = static_cast<double>(r.scores.value()(static_cast<ag::Index>(v * n + k), 0));
    }
  }
  return out;
}

template class Model<float>;
template class Model<double>;
template ag::Matrix<float> stack_clips(std::span<const FeatureMatrix* const>, int, int);
template ag::Matrix<double> stack_clips(std::span<const FeatureMatrix* const>, int, int);

}  // namespace vmr
