#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "vmr/dataset.hpp"
#include "vmr/moment_grid.hpp"
#include "vmr/params.hpp"

namespace vmr {

/// Token ids; id 0 is the reserved "<unk>" token.
class Vocabulary {
 public:
  static constexpr int kUnknown = 0;

  Vocabulary();
  /// Sorted vocabulary of every annotation token in `split`.
  static Vocabulary build(const DatasetSplit& split);
  static Vocabulary from_words(const std::vector<std::string>& words);

  int add(const std::string& word);
  int id(const std::string& word) const;
  std::vector<int> encode(const std::vector<std::string>& tokens) const;
  std::size_t size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }

 private:
  std::vector<std::string> words_;
  std::map<std::string, int> ids_;
};

/// Sinusoidal embedding of a (start, end) pair: two d/2 halves, one per
/// endpoint, each interleaving sin (even entries) and cos (odd entries) at
/// angular frequency max_period^(-2i/(d/2)) for pair i. d must be a
/// multiple of 4.
std::vector<double> positional_embedding(const TemporalInterval& loc, int d, double max_period = 10000.0);

/// One positional embedding per candidate, in grid order, with cell (a, b)
/// embedded as (a, b + 1) in clip units. Clip units keep the bank the same
/// for every video of a given clip count.
FeatureMatrix positional_bank(const MomentGrid& grid, int d, double max_period = 10000.0);

/// Reads "word v1 ... vk" rows; every row must have the same k.
std::map<std::string, std::vector<double>> load_word_vectors(const std::filesystem::path& path);

/// Token embeddings followed by stacked unidirectional LSTM layers; the
/// query vector is the top layer's last hidden state.
template <typename T>
struct QueryEncoder {
  ParamId embedding = 0;  // vocab x embed_dim
  struct Layer {
    ParamId w_ih = 0;  // 4h x in, gate blocks ordered input, forget, cell, output
    ParamId w_hh = 0;  // 4h x h
    ParamId bias = 0;  // 1 x 4h
  };
  std::vector<Layer> layers;
  int hidden = 0;

  static QueryEncoder create(ParameterSet<T>& params, int vocab_size, int embed_dim, int hidden, int num_layers = 3);
  void init(ParameterSet<T>& params, std::mt19937_64& rng) const;
  /// Copies known words' vectors into the embedding table (dims must match).
  int load_pretrained(ParameterSet<T>& params, const Vocabulary& vocab,
                      const std::map<std::string, std::vector<double>>& vectors) const;

  /// B x hidden. Sequences may differ in length; each row stops updating
  /// after its last token.
  ag::Var<T> encode(Binding<T>& bind, std::span<const std::vector<int>> batch) const;
};

/// Clip projection, stacked max pooling over the moment grid, and an
/// output projection applied per cell.
template <typename T>
struct MomentEncoder {
  ParamId clip_w = 0;  // d x f
  ParamId clip_b = 0;  // 1 x d
  ParamId out_w = 0;   // d x d
  ParamId out_b = 0;   // 1 x d

  static MomentEncoder create(ParameterSet<T>& params, int feature_dim, int d);
  void init(ParameterSet<T>& params, std::mt19937_64& rng) const;

  /// clips holds V videos stacked row-wise (V*T x f); returns V*N x d.
  ag::Var<T> encode(Binding<T>& bind, const ag::Var<T>& clips, const MomentGrid& grid) const;
  /// Clip projection followed by pooling, without the output projection.
  ag::Var<T> pooled(Binding<T>& bind, const ag::Var<T>& clips, const MomentGrid& grid) const;
};

}  // namespace vmr
