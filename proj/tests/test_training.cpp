#include <gtest/gtest.h>

#include <filesystem>

#include "vmr/config.hpp"
#include "vmr/synthetic_data.hpp"
#include "vmr/training.hpp"

using namespace vmr;

namespace {

SyntheticConfig tiny_data() {
  SyntheticConfig sc;
  sc.num_train = 40;
  sc.num_val = 10;
  sc.num_test = 10;
  sc.num_clips = 6;
  sc.feature_dim = 8;
  return sc;
}

TrainConfig tiny_train(Mode mode = Mode::kDcm) {
  TrainConfig tc;
  tc.model.d = 8;
  tc.model.num_clips = 6;
  tc.model.feature_dim = 8;
  tc.model.embed_dim = 8;
  tc.model.lstm_layers = 1;
  tc.model.mode = mode;
  tc.epochs = 2;
  tc.batch_size = 8;
  tc.learning_rate = 1e-3;
  tc.seed = 3;
  return tc;
}

// Model, data and one batch of positives with counterfactual negatives.
struct Batch {
  DatasetSplit split;
  Vocabulary vocab;
  std::vector<std::vector<int>> tokens;
  std::vector<std::vector<double>> labels;
  std::vector<Pair> positives, negatives;

  explicit Batch(std::size_t count) {
    split = generate_dataset(tiny_data(), 1).train;
    vocab = Vocabulary::build(split);
    const auto queries = enumerate_queries(split);
    labels = query_labels(split, MomentGrid(6, 1.0), LabelRange{});
    tokens.reserve(queries.size());
    for (const auto& q : queries) tokens.push_back(vocab.encode(split.samples[q.sample].annotations[q.annotation].tokens));
    CounterfactualSampler sampler(split);
    auto rng = derived_rng(1, 2, 3);
    for (std::size_t i = 0; i < count; ++i) {
      const auto& s = split.samples[queries[i].sample];
      positives.push_back({&tokens[i], &s.clip_features, &labels[i]});
      if (auto v = sampler.sample(s.annotations[0].tokens, rng)) {
        negatives.push_back({&tokens[i], &split.samples[*v].clip_features, nullptr});
      }
    }
  }
};

}  // namespace

TEST(Loss, TermsNonNegativeAndSumToTotal) {
  Batch b(6);
  for (Mode mode : {Mode::kDcm, Mode::kBaseline, Mode::kBlind}) {
    for (HeadKind head : {HeadKind::kCmi, HeadKind::kTcn}) {
      auto tc = tiny_train(mode);
      tc.model.head = head;
      Model<double> model(tc.model, b.vocab.size());
      model.init(5);
      ag::Tape<double> tape;
      Binding<double> bind(tape, model.params());
      const double l1 = 0.7, l2 = 0.3;
      const auto t = total_loss<double>(model, bind, b.positives, b.negatives, l1, l2);
      const auto val = [](const ag::Var<double>& v) { return v.valid() ? v.item() : 0.0; };
      for (const auto* v : {&t.bce_pos, &t.bce_neg, &t.recon, &t.indep}) EXPECT_GE(val(*v), 0.0);
      EXPECT_GE(t.total.item(), 0.0);
      const double parts = val(t.bce_pos) + val(t.bce_neg) + (mode == Mode::kDcm ? l1 * val(t.recon) + l2 * val(t.indep) : 0.0);
      EXPECT_NEAR(t.total.item(), parts, 1e-12);
    }
  }
}

TEST(Loss, BaselineLeavesFactorParametersWithoutGradient) {
  Batch b(5);
  Model<double> model(tiny_train(Mode::kBaseline).model, b.vocab.size());
  model.init(1);
  model.params().zero_grad();
  ag::Tape<double> tape;
  Binding<double> bind(tape, model.params());
  auto t = total_loss<double>(model, bind, b.positives, {}, 1.0, 1.0);
  tape.backward(t.total);
  bool touched_any = false;
  for (const auto& p : model.params()) {
    const bool factor = p.name.starts_with("disentangle") || p.name.starts_with("intervention");
    if (factor) {
      EXPECT_EQ(p.grad.cwiseAbs().maxCoeff(), 0.0) << p.name;
    } else {
      touched_any |= p.grad.cwiseAbs().maxCoeff() > 0.0;
    }
  }
  EXPECT_TRUE(touched_any);
}

TEST(Adam, ZeroLearningRateKeepsParametersBitIdentical) {
  Batch b(4);
  Model<double> model(tiny_train().model, b.vocab.size());
  model.init(2);
  const auto before = model.params().checksum();
  Adam<double> adam(model.params(), 0.0);
  for (int step = 0; step < 3; ++step) {
    model.params().zero_grad();
    ag::Tape<double> tape;
    Binding<double> bind(tape, model.params());
    tape.backward(total_loss<double>(model, bind, b.positives, b.negatives, 1.0, 0.001).total);
    adam.step();
  }
  EXPECT_EQ(adam.steps(), 3);
  EXPECT_EQ(model.params().checksum(), before);
}

TEST(Adam, MatchesHandComputedUpdate) {
  ParameterSet<double> params;
  const auto id = params.add("w", 1, 2);
  params[id].value << 1.0, -2.0;
  Adam<double> adam(params, 0.1);
  params[id].grad = ag::Matrix<double>(1, 2);
  params[id].grad << 0.5, -4.0;
  adam.step();
  // First step: m_hat = g, v_hat = g^2, so the update is lr * g / (|g| + eps).
  EXPECT_NEAR(params[id].value(0, 0), 1.0 - 0.1 * 0.5 / (0.5 + 1e-8), 1e-12);
  EXPECT_NEAR(params[id].value(0, 1), -2.0 + 0.1 * 4.0 / (4.0 + 1e-8), 1e-12);
}

TEST(Counterfactual, NeverPicksSameContent) {
  auto sc = tiny_data();
  sc.num_train = 200;
  const auto split = generate_dataset(sc, 4).train;
  CounterfactualSampler sampler(split);
  auto rng = derived_rng(4, 9, 0);
  for (const auto& s : split.samples) {
    const auto key = content_key(s.annotations[0].tokens);
    for (int i = 0; i < 5; ++i) {
      const auto v = sampler.sample(s.annotations[0].tokens, rng);
      ASSERT_TRUE(v.has_value());
      const auto& neg = split.samples[*v];
      for (const auto& a : neg.annotations) EXPECT_NE(content_key(a.tokens), key);
      for (const auto& a : neg.distractors) EXPECT_NE(content_key(a.tokens), key);
    }
  }
  EXPECT_EQ(sampler.skipped(), 0u);
}

TEST(Counterfactual, SkipsWhenNoVideoQualifies) {
  auto sc = tiny_data();
  sc.bias.verbs = {"open"};
  sc.bias.objects = {"door"};
  const auto split = generate_dataset(sc, 5).train;
  CounterfactualSampler sampler(split);
  auto rng = derived_rng(0, 0, 0);
  EXPECT_FALSE(sampler.sample(split.samples[0].annotations[0].tokens, rng).has_value());
  EXPECT_EQ(sampler.skipped(), 1u);
}

TEST(TrainConfig, AblationsSetEffectiveWeights) {
  TrainConfig tc;
  EXPECT_EQ(tc.effective_lambda1(), 1.0);
  EXPECT_EQ(tc.effective_lambda2(), 0.001);
  EXPECT_TRUE(tc.uses_counterfactual());
  tc.model.ablations.no_recon = true;
  EXPECT_EQ(tc.effective_lambda1(), 0.0);
  tc.model.ablations = {};
  tc.model.ablations.no_indep = true;
  EXPECT_EQ(tc.effective_lambda2(), 0.0);
  tc.model.ablations = {};
  tc.model.ablations.no_interv = true;
  EXPECT_FALSE(tc.uses_counterfactual());
  tc.model.ablations = {};
  tc.model.mode = Mode::kBaseline;
  EXPECT_EQ(tc.effective_lambda1(), 0.0);
  EXPECT_FALSE(tc.uses_counterfactual());
  tc = {};
  tc.lambda1 = -1.0;
  EXPECT_THROW(tc.validate(), std::invalid_argument);
}

TEST(TrainConfig, JsonRoundTripAndUnknownKeys) {
  auto tc = tiny_train();
  tc.model.ablations.no_loc_feat = true;
  tc.model.head = HeadKind::kCmi;
  tc.dcor_scope = DcorScope::kAllCells;
  tc.labels = {0.3, 0.9};
  const auto j = to_json(tc);
  EXPECT_EQ(to_json(train_config_from_json(j)), j);
  nlohmann::json bad = j;
  bad["lamda1"] = 2.0;
  EXPECT_THROW(train_config_from_json(bad), ConfigError);
  const auto sj = to_json(tiny_data());
  EXPECT_EQ(to_json(synthetic_config_from_json(sj)), sj);
}

TEST(Train, DeterministicAndTraced) {
  const auto data = generate_dataset(tiny_data(), 6);
  const auto tc = tiny_train();
  const auto a = train<double>(tc, data.train, data.val);
  const auto b = train<double>(tc, data.train, data.val);
  EXPECT_EQ(a.model->params().checksum(), b.model->params().checksum());
  ASSERT_EQ(a.trace.size(), 2u);
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    EXPECT_EQ(a.trace[i].epoch, int(i) + 1);
    EXPECT_EQ(a.trace[i].l_bce_pos, b.trace[i].l_bce_pos);
    EXPECT_GT(a.trace[i].l_bce_neg, 0.0);
    EXPECT_GE(a.trace[i].dcor, 0.0);
  }
  EXPECT_GE(a.best_epoch, 1);
  EXPECT_LE(a.best_epoch, 2);
}

TEST(Train, NoCounterfactualHasNoNegativeLoss) {
  const auto data = generate_dataset(tiny_data(), 7);
  auto tc = tiny_train();
  tc.epochs = 1;
  tc.model.ablations.no_counterf = true;
  const auto r = train<double>(tc, data.train, data.val);
  EXPECT_EQ(r.trace[0].l_bce_neg, 0.0);
}

TEST(Train, LossDecreasesOverEpochs) {
  auto sc = tiny_data();
  sc.num_train = 120;
  const auto data = generate_dataset(sc, 8);
  auto tc = tiny_train(Mode::kBaseline);
  tc.epochs = 6;
  tc.learning_rate = 3e-3;
  const auto r = train<double>(tc, data.train, data.val);
  EXPECT_LT(r.trace.back().l_bce_pos, r.trace.front().l_bce_pos);
}

TEST(Checkpoint, RoundTripIsBitIdentical) {
  const auto data = generate_dataset(tiny_data(), 9);
  auto tc = tiny_train();
  tc.epochs = 1;
  const auto r = train<float>(tc, data.train, data.val);
  const auto path = std::filesystem::temp_directory_path() / "vmr_test_ckpt.bin";
  save_checkpoint(path, *r.model, r.vocab, tc, 1, "state");
  const auto ck = load_checkpoint<float>(path);
  EXPECT_EQ(ck.epoch, 1);
  EXPECT_EQ(ck.rng_state, "state");
  EXPECT_EQ(ck.vocab.words(), r.vocab.words());
  EXPECT_EQ(to_json(ck.config), to_json(tc));
  EXPECT_EQ(ck.model->params().checksum(), r.model->params().checksum());
  EXPECT_EQ(predict_top1(*ck.model, ck.vocab, data.test), predict_top1(*r.model, r.vocab, data.test));
  std::vector<double> s1, s2;
  predict_top1(*ck.model, ck.vocab, data.test, 64, &s1);
  predict_top1(*r.model, r.vocab, data.test, 64, &s2);
  EXPECT_EQ(s1, s2);
  std::filesystem::resize_file(path, 20);
  EXPECT_ANY_THROW(load_checkpoint<float>(path));
  std::filesystem::remove(path);
}
