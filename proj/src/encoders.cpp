#include "vmr/encoders.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "vmr/grid_ops.hpp"

namespace vmr {

Vocabulary::Vocabulary() { add("<unk>"); }

Vocabulary Vocabulary::build(const DatasetSplit& split) {
  std::set<std::string> words;
  for (const auto& s : split.samples) {
    for (const auto& a : s.annotations) words.insert(a.tokens.begin(), a.tokens.end());
  }
  Vocabulary v;
  for (const auto& w : words) v.add(w);
  return v;
}

Vocabulary Vocabulary::from_words(const std::vector<std::string>& words) {
  Vocabulary v;
  for (std::size_t i = 1; i < words.size(); ++i) v.add(words[i]);
  if (words.empty() || words[0] != "<unk>") throw std::invalid_argument("vocabulary must start with <unk>");
  return v;
}

int Vocabulary::add(const std::string& word) {
  if (auto it = ids_.find(word); it != ids_.end()) return it->second;
  const int id = static_cast<int>(words_.size());
  words_.push_back(word);
  ids_.emplace(word, id);
  return id;
}

int Vocabulary::id(const std::string& word) const {
  const auto it = ids_.find(word);
  return it == ids_.end() ? kUnknown : it->second;
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

std::vector<double> positional_embedding(const TemporalInterval& loc, int d, double max_period) {
  if (d <= 0 || d % 4 != 0) throw std::invalid_argument("positional embedding size must be a positive multiple of 4");
  if (!(max_period > 0.0)) throw std::invalid_argument("max_period must be positive");
  const int half = d / 2;
  std::vector<double> e(static_cast<std::size_t>(d));
  const double ends[2] = {loc.start, loc.end};
  for (int part = 0; part < 2; ++part) {
    for (int i = 0; i < half / 2; ++i) {
      const double omega = std::pow(max_period, -2.0 * i / half);
      e[static_cast<std::size_t>(part * half + 2 * i)] = std::sin(ends[part] * omega);
      e[static_cast<std::size_t>(part * half + 2 * i + 1)] = std::cos(ends[part] * omega);
    }
  }
  return e;
}

FeatureMatrix positional_bank(const MomentGrid& grid, int d, double max_period) {
  FeatureMatrix bank(static_cast<Eigen::Index>(grid.num_candidates()), d);
  for (std::size_t k = 0; k < grid.num_candidates(); ++k) {
    const CellIndex& c = grid.cell(k);
    const auto e = positional_embedding({double(c.start_clip), double(c.end_clip + 1)}, d, max_period);
    for (int j = 0; j < d; ++j) bank(static_cast<Eigen::Index>(k), j) = e[static_cast<std::size_t>(j)];
  }
  return bank;
}

std::map<std::string, std::vector<double>> load_word_vectors(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open word vectors: " + path.string());
  std::map<std::string, std::vector<double>> out;
  std::string line;
  std::size_t line_no = 0;
  std::size_t dim = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream row(line);
    std::string word;
    if (!(row >> word)) continue;
    std::vector<double> v;
    for (double x; row >> x;) v.push_back(x);
    if (!row.eof()) throw ParseError("non-numeric word vector entry", line_no);
    if (dim == 0) dim = v.size();
    if (v.empty() || v.size() != dim) throw ParseError("word vector has the wrong dimension", line_no);
    out[word] = std::move(v);
  }
  return out;
}

template <typename T>
QueryEncoder<T> QueryEncoder<T>::create(ParameterSet<T>& params, int vocab_size, int embed_dim, int hidden,
                                        int num_layers) {
  if (vocab_size < 1 || embed_dim < 1 || hidden < 1 || num_layers < 1) {
    throw std::invalid_argument("query encoder sizes must be positive");
  }
  QueryEncoder enc;
  enc.hidden = hidden;
  enc.embedding = params.add("query.embedding", vocab_size, embed_dim);
  for (int l = 0; l < num_layers; ++l) {
    const std::string p = "query.lstm" + std::to_string(l) + ".";
    Layer layer;
    layer.w_ih = params.add(p + "w_ih", 4 * hidden, l == 0 ? embed_dim : hidden);
    layer.w_hh = params.add(p + "w_hh", 4 * hidden, hidden);
    layer.bias = params.add(p + "bias", 1, 4 * hidden);
    enc.layers.push_back(layer);
  }
  return enc;
}

template <typename T>
void QueryEncoder<T>::init(ParameterSet<T>& params, std::mt19937_64& rng) const {
  init_fan_in(params[embedding], 1.0, rng);
  for (const auto& l : layers) {
    init_fan_in(params[l.w_ih], static_cast<double>(params[l.w_ih].value.cols()), rng);
    init_fan_in(params[l.w_hh], static_cast<double>(hidden), rng);
    params[l.bias].value.setZero();
  }
}

template <typename T>
int QueryEncoder<T>::load_pretrained(ParameterSet<T>& params, const Vocabulary& vocab,
                                     const std::map<std::string, std::vector<double>>& vectors) const {
  auto& table = params[embedding].value;
  int loaded = 0;
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    const auto it = vectors.find(vocab.words()[i]);
    if (it == vectors.end()) continue;
    if (static_cast<ag::Index>(it->second.size()) != table.cols()) {
      throw std::invalid_argument("pretrained vectors do not match the embedding size");
    }
    for (ag::Index j = 0; j < table.cols(); ++j) table(static_cast<ag::Index>(i), j) = static_cast<T>(it->second[j]);
    ++loaded;
  }
  return loaded;
}

template <typename T>
ag::Var<T> QueryEncoder<T>::encode(Binding<T>& bind, std::span<const std::vector<int>> batch) const {
  using ag::Index;
  if (batch.empty()) throw std::invalid_argument("encode_query: empty batch");
  std::size_t max_len = 0;
  for (const auto& seq : batch) {
    if (seq.empty()) throw std::invalid_argument("encode_query: empty token sequence");
    max_len = std::max(max_len, seq.size());
  }
  ag::Tape<T>& tape = bind.tape();
  const auto b = static_cast<Index>(batch.size());
  const ag::Var<T> table = bind(embedding);

  std::vector<ag::Var<T>> inputs;
  std::vector<ag::Matrix<T>> keep(max_len);  // empty when every row is still active
  for (std::size_t t = 0; t < max_len; ++t) {
    std::vector<Index> ids(batch.size());
    bool ragged = false;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const bool active = t < batch[i].size();
      ragged = ragged || !active;
      ids[i] = active ? batch[i][t] : Vocabulary::kUnknown;
      if (ids[i] < 0 || ids[i] >= table.rows()) throw std::invalid_argument("encode_query: token id out of range");
    }
    inputs.push_back(ag::gather_rows(table, std::span<const Index>(ids)));
    if (ragged) {
      keep[t].resize(b, hidden);
      for (Index i = 0; i < b; ++i) keep[t].row(i).setConstant(t < batch[i].size() ? T(1) : T(0));
    }
  }

  ag::Var<T> h;
  for (const auto& layer : layers) {
    const auto w_ih = bind(layer.w_ih);
    const auto w_hh = bind(layer.w_hh);
    const auto bias = bind(layer.bias);
    h = tape.constant(ag::Matrix<T>::Zero(b, hidden));
    ag::Var<T> c = tape.constant(ag::Matrix<T>::Zero(b, hidden));
    for (std::size_t t = 0; t < max_len; ++t) {
      const auto z = ag::add_row(ag::add(ag::matmul_nt(inputs[t], w_ih), ag::matmul_nt(h, w_hh)), bias);
      const auto gi = ag::sigmoid(ag::slice_cols(z, 0, hidden));
      const auto gf = ag::sigmoid(ag::slice_cols(z, hidden, hidden));
      const auto gg = ag::tanh(ag::slice_cols(z, 2 * hidden, hidden));
      const auto go = ag::sigmoid(ag::slice_cols(z, 3 * hidden, hidden));
      auto c_next = ag::add(ag::mul(gf, c), ag::mul(gi, gg));
      auto h_next = ag::mul(go, ag::tanh(c_next));
      if (keep[t].size() != 0) {
        const auto on = tape.constant(keep[t]);
        const auto off = tape.constant(ag::Matrix<T>::Ones(b, hidden) - keep[t]);
        c_next = ag::add(ag::mul(on, c_next), ag::mul(off, c));
        h_next = ag::add(ag::mul(on, h_next), ag::mul(off, h));
      }
      c = c_next;
      h = h_next;
      inputs[t] = h;
    }
  }
  return h;
}

template <typename T>
MomentEncoder<T> MomentEncoder<T>::create(ParameterSet<T>& params, int feature_dim, int d) {
  if (feature_dim < 1 || d < 1) throw std::invalid_argument("moment encoder sizes must be positive");
  MomentEncoder enc;
  enc.clip_w = params.add("moment.clip_w", d, feature_dim);
  enc.clip_b = params.add("moment.clip_b", 1, d);
  enc.out_w = params.add("moment.out_w", d, d);
  enc.out_b = params.add("moment.out_b", 1, d);
  return enc;
}

template <typename T>
void MomentEncoder<T>::init(ParameterSet<T>& params, std::mt19937_64& rng) const {
  init_fan_in(params[clip_w], static_cast<double>(params[clip_w].value.cols()), rng);
  init_fan_in(params[out_w], static_cast<double>(params[out_w].value.cols()), rng);
  params[clip_b].value.setZero();
  params[out_b].value.setZero();
}

template <typename T>
ag::Var<T> MomentEncoder<T>::pooled(Binding<T>& bind, const ag::Var<T>& clips, const MomentGrid& grid) const {
  const auto w = bind(clip_w);
  if (clips.cols() != w.cols()) throw std::invalid_argument("encode_moments: clip feature size mismatch");
  if (clips.rows() == 0 || clips.rows() % grid.num_clips() != 0) {
    throw std::invalid_argument("encode_moments: clip count does not match the grid");
  }
  const auto projected = ag::add_row(ag::matmul_nt(clips, w), bind(clip_b));
  return ag::stacked_max_pool(projected, grid);
}

template <typename T>
ag::Var<T> MomentEncoder<T>::encode(Binding<T>& bind, const ag::Var<T>& clips, const MomentGrid& grid) const {
  return ag::add_row(ag::matmul_nt(pooled(bind, clips, grid), bind(out_w)), bind(out_b));
}

template struct QueryEncoder<float>;
template struct QueryEncoder<double>;
template struct MomentEncoder<float>;
template struct MomentEncoder<double>;

}  // namespace vmr
