#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "vmr/grid_ops.hpp"
#include "vmr/training.hpp"

using namespace vmr;
using ag::Var;
using M = ag::Matrix<double>;

namespace {

M random(long r, long c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  M m(r, c);
  for (long i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

double worst(const std::vector<GradCheckEntry>& entries) {
  double w = 0.0;
  for (const auto& e : entries) {
    EXPECT_GT(e.coords, 0u) << e.group;
    w = std::max(w, e.max_rel_error);
  }
  return w;
}

// Parameters a (3x4), b (4x4), c (3x4) and a loss built from them.
struct Fixture {
  ParameterSet<double> params;
  ParamId a, b, c;

  explicit Fixture(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    a = params.add("a", 3, 4);
    b = params.add("b", 4, 4);
    c = params.add("c", 3, 4);
    params[a].value = random(3, 4, rng);
    params[b].value = random(4, 4, rng);
    params[c].value = random(3, 4, rng);
  }

  double check(const std::function<Var<double>(Binding<double>&)>& f) {
    GradCheckOptions o;
    o.coords_per_group = 12;
    return worst(grad_check(params, f, o));
  }
};

}  // namespace

TEST(Autograd, LinearAlgebraGradients) {
  Fixture fx(1);
  EXPECT_LT(fx.check([&](Binding<double>& bd) {
              auto y = ag::matmul(bd(fx.a), bd(fx.b));
              return ag::sum(ag::mul(ag::tanh(y), bd(fx.c)));
            }),
            1e-5);
  EXPECT_LT(fx.check([&](Binding<double>& bd) {
              auto y = ag::matmul_nt(bd(fx.a), bd(fx.b));
              auto z = ag::add_row(ag::sub(y, bd(fx.c)), ag::slice_rows(bd(fx.b), 1, 1));
              return ag::mean(ag::mul(z, z));
            }),
            1e-5);
  EXPECT_LT(fx.check([&](Binding<double>& bd) {
              auto y = ag::mul_row(bd(fx.a), ag::slice_rows(bd(fx.c), 2, 1));
              return ag::sum(ag::scale(ag::sigmoid(y), 3.0));
            }),
            1e-5);
}

TEST(Autograd, StructuralOpGradients) {
  Fixture fx(2);
  EXPECT_LT(fx.check([&](Binding<double>& bd) {
              auto cat = ag::concat_cols(bd(fx.a), bd(fx.c));
              auto part = ag::slice_cols(cat, 2, 4);
              const std::vector<ag::Index> rows = {2, 0, 2, 1};
              auto g = ag::gather_rows(part, rows);
              std::vector<Var<double>> parts = {g, bd(fx.b)};
              auto stacked = ag::concat_rows<double>(parts);
              return ag::sum(ag::mul(ag::tanh(stacked), stacked));
            }),
            1e-5);
  EXPECT_LT(fx.check([&](Binding<double>& bd) {
              auto s = ag::softmax_rows(ag::matmul(bd(fx.a), bd(fx.b)));
              return ag::sum(ag::mul(s, bd(fx.c)));
            }),
            1e-5);
  EXPECT_LT(fx.check([&](Binding<double>& bd) {
              std::vector<Var<double>> terms = {ag::sum(bd(fx.a)), ag::sum(ag::row_norms(bd(fx.c)))};
              const std::vector<double> w = {0.3, -1.7};
              return ag::weighted_sum<double>(terms, w);
            }),
            1e-5);
}

TEST(Autograd, RectifierGradientWithKinkSkipping) {
  Fixture fx(3);
  EXPECT_LT(fx.check([&](Binding<double>& bd) { return ag::sum(ag::relu(ag::matmul(bd(fx.a), bd(fx.b)))); }), 1e-5);
}

TEST(Autograd, BceValueAndGradient) {
  Fixture fx(4);
  const std::vector<double> labels = {0.0, 1.0, 0.25};
  ag::Tape<double> tape;
  M s(3, 1);
  s << 0.2, 0.9, 0.5;
  const double got = ag::bce_mean(tape.constant(s), labels).item();
  double want = 0.0;
  for (int i = 0; i < 3; ++i) want -= labels[i] * std::log(s(i, 0)) + (1 - labels[i]) * std::log(1 - s(i, 0));
  EXPECT_NEAR(got, want / 3, 1e-12);
  EXPECT_LT(fx.check([&](Binding<double>& bd) {
              auto scores = ag::sigmoid(ag::slice_cols(bd(fx.a), 1, 1));
              return ag::bce_mean(scores, labels);
            }),
            1e-5);
  // Saturated scores stay finite.
  M sat(2, 1);
  sat << 0.0, 1.0;
  const std::vector<double> y = {1.0, 0.0};
  EXPECT_TRUE(std::isfinite(ag::bce_mean(tape.constant(sat), y).item()));
}

TEST(Autograd, DistanceCorrelationMatchesOracle) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const M x = random(7 + trial, 4, rng), y = random(7 + trial, 3, rng);
    EXPECT_NEAR(ag::distance_correlation_value(x, y), oracle::dcor(x, y), 1e-9);
  }
}

TEST(Autograd, DistanceCorrelationSymmetricAndTranslationInvariant) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const M x = random(12, 5, rng), y = random(12, 5, rng);
    M shifted = x;
    const M row = random(1, 5, rng, 10.0);
    shifted.rowwise() += row.row(0);
    const double d = distance_correlation<double>(x, y);
    EXPECT_NEAR(d, distance_correlation<double>(y, x), 1e-8);
    EXPECT_NEAR(d, distance_correlation<double>(shifted, y), 1e-8);
    EXPECT_GE(d, 0.0);
    EXPECT_LE(d, 1.0 + 1e-12);
  }
  const M x = random(9, 3, rng);
  EXPECT_NEAR(distance_correlation<double>(x, x), 1.0, 1e-8);
  EXPECT_EQ(distance_correlation<double>(x, M::Zero(9, 3)), 0.0);
}

TEST(Autograd, DistanceCorrelationGradient) {
  ParameterSet<double> params;
  std::mt19937_64 rng(7);
  const auto x = params.add("x", 10, 3), y = params.add("y", 10, 2);
  params[x].value = random(10, 3, rng);
  params[y].value = params[x].value.leftCols(2).array().square().matrix() + 0.3 * random(10, 2, rng);
  GradCheckOptions o;
  o.coords_per_group = 30;
  const auto entries = grad_check(params, [&](Binding<double>& bd) { return ag::distance_correlation(bd(x), bd(y)); }, o);
  EXPECT_LT(worst(entries), 1e-5);
}

TEST(Autograd, GradCheckDetectsCorruptedGradient) {
  Fixture fx(8);
  const LossBuilder f = [&](Binding<double>& bd) { return ag::sum(ag::tanh(ag::matmul(bd(fx.a), bd(fx.b)))); };
  const auto clean = grad_check(fx.params, f);
  EXPECT_LT(worst(clean), 1e-6);
  const auto bad = grad_check(fx.params, f, {}, [&](ParameterSet<double>& p) { p[fx.b].grad *= 1.01; });
  bool flagged = false;
  for (const auto& e : bad) flagged |= e.group == "b" && e.max_rel_error > 5e-3;
  EXPECT_TRUE(flagged);
}

TEST(Autograd, ParameterGradAccumulatesAcrossUses) {
  ag::Tape<double> tape;
  ag::Parameter<double> p{"p", M::Constant(1, 1, 2.0), {}};
  p.zero_grad();
  auto v = tape.parameter(p);
  tape.backward(ag::mul(v, v));
  EXPECT_DOUBLE_EQ(p.grad(0, 0), 4.0);
}

TEST(Autograd, BranchSignatureOnlyWhenTracking) {
  ag::Tape<double> tape;
  const auto before = tape.branch_signature();
  M m(1, 3);
  m << -1.0, 2.0, 0.5;
  ag::relu(tape.constant(m));
  EXPECT_EQ(tape.branch_signature(), before);
  tape.track_branches(true);
  ag::relu(tape.constant(m));
  EXPECT_NE(tape.branch_signature(), before);
}

TEST(GridOps, ConvMatchesPerCellOracle) {
  std::mt19937_64 rng(9);
  for (int t : {3, 5, 6}) {
    for (int k : {1, 3, 5}) {
      const MomentGrid grid(t, 1.0);
      const long n = long(grid.num_candidates());
      const M x = random(n, 3, rng), w = random(long(k) * k * 3, 4, rng), b = random(1, 4, rng);
      const auto plan = ag::ConvPlan::build(grid, k);
      ag::Tape<double> tape;
      const M got = ag::grid_conv(tape.constant(x), tape.constant(w), tape.constant(b), plan).value();
      const M want = oracle::conv_cells(x, w, b, t, k, false);
      EXPECT_LT((got - want).cwiseAbs().maxCoeff(), 1e-12) << "T=" << t << " K=" << k;
    }
  }
}

TEST(GridOps, ConvOverStackedVideosIsPerVideo) {
  std::mt19937_64 rng(10);
  const MomentGrid grid(4, 1.0);
  const long n = long(grid.num_candidates());
  const M x = random(3 * n, 2, rng), w = random(9 * 2, 2, rng), b = random(1, 2, rng);
  ag::Tape<double> tape;
  const M got =
      ag::grid_conv(tape.constant(x), tape.constant(w), tape.constant(b), ag::ConvPlan::build(grid, 3, 3)).value();
  for (int v = 0; v < 3; ++v) {
    const M want = oracle::conv_cells(x.middleRows(v * n, n), w, b, 4, 3, false);
    EXPECT_LT((got.middleRows(v * n, n) - want).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(GridOps, ConvGradient) {
  std::mt19937_64 rng(11);
  const MomentGrid grid(5, 1.0);
  const long n = long(grid.num_candidates());
  ParameterSet<double> params;
  const auto x = params.add("x", 2 * n, 3), w = params.add("w", 9 * 3, 3), b = params.add("b", 1, 3);
  params[x].value = random(2 * n, 3, rng);
  params[w].value = random(27, 3, rng);
  params[b].value = random(1, 3, rng);
  const auto plan = ag::ConvPlan::build(grid, 3, 2);
  const auto entries = grad_check(params, [&](Binding<double>& bd) {
    auto y = ag::grid_conv(bd(x), bd(w), bd(b), plan);
    return ag::sum(ag::mul(ag::tanh(y), y));
  });
  EXPECT_LT(worst(entries), 1e-5);
}

TEST(GridOps, StackedMaxPoolIsRangeMaxAndMonotone) {
  std::mt19937_64 rng(12);
  const MomentGrid grid(6, 1.0);
  const M clips = random(6, 4, rng);
  ag::Tape<double> tape;
  const M pooled = ag::stacked_max_pool(tape.constant(clips), grid).value();
  for (std::size_t k = 0; k < grid.num_candidates(); ++k) {
    const auto c = grid.cell(k);
    const M want = clips.middleRows(c.start_clip, c.end_clip - c.start_clip + 1).colwise().maxCoeff();
    EXPECT_EQ(pooled.row(long(k)), want.row(0));
    // A superset range pools to an elementwise larger vector.
    for (int a = 0; a <= c.start_clip; ++a) {
      for (int b = c.end_clip; b < 6; ++b) {
        EXPECT_TRUE((pooled.row(grid.index_of(a, b)).array() >= pooled.row(long(k)).array()).all());
      }
    }
  }
}

TEST(GridOps, StackedMaxPoolGradient) {
  std::mt19937_64 rng(13);
  const MomentGrid grid(5, 1.0);
  ParameterSet<double> params;
  const auto x = params.add("x", 10, 3);
  params[x].value = random(10, 3, rng);
  const auto entries = grad_check(params, [&](Binding<double>& bd) {
    auto p = ag::stacked_max_pool(bd(x), grid);
    return ag::sum(ag::mul(p, p));
  });
  EXPECT_LT(worst(entries), 1e-5);
}
