#include <gtest/gtest.h>

#include <random>

#include "vmr/disentangle.hpp"
#include "vmr/training.hpp"

using namespace vmr;
using M = ag::Matrix<double>;

namespace {

M random(long r, long c, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  M m(r, c);
  for (long i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

}  // namespace

TEST(Disentangler, AffineMapsPerRow) {
  ParameterSet<double> params;
  const auto g = Disentangler<double>::create(params, 4);
  std::mt19937_64 rng(1);
  g.init(params, rng);
  params[g.content_b].value = random(1, 4, rng);
  params[g.location_b].value = random(1, 4, rng);
  const M v = random(6, 4, rng);
  ag::Tape<double> tape;
  Binding<double> bind(tape, params);
  const auto out = g.apply(bind, tape.constant(v));
  for (long i = 0; i < 6; ++i) {
    const auto c = (params[g.content_w].value * v.row(i).transpose()).transpose() + params[g.content_b].value;
    const auto l = (params[g.location_w].value * v.row(i).transpose()).transpose() + params[g.location_b].value;
    EXPECT_LT((out.content.value().row(i) - c).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LT((out.location.value().row(i) - l).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Recon, NonNegativeAndZeroOnlyAtEquality) {
  std::mt19937_64 rng(2);
  ag::Tape<double> tape;
  for (int i = 0; i < 50; ++i) {
    const M a = random(5, 3, rng), b = random(5, 3, rng);
    const double got = recon_loss(tape.constant(a), tape.constant(b)).item();
    double want = 0.0;
    for (long r = 0; r < 5; ++r) want += (a.row(r) - b.row(r)).norm() / 5;
    EXPECT_NEAR(got, want, 1e-12);
    EXPECT_GT(got, 0.0);
    EXPECT_EQ(recon_loss(tape.constant(a), tape.constant(a)).item(), 0.0);
  }
  const M a = random(1, 4, rng), b = random(1, 4, rng);
  EXPECT_NEAR(recon_loss(tape.constant(a), tape.constant(b)).item(), (a - b).norm(), 1e-14);
}

TEST(Recon, Gradient) {
  ParameterSet<double> params;
  std::mt19937_64 rng(3);
  const auto l = params.add("l", 6, 4), p = params.add("p", 6, 4);
  params[l].value = random(6, 4, rng);
  params[p].value = random(6, 4, rng);
  double w = 0.0;
  for (const auto& e : grad_check(params, [&](Binding<double>& bd) { return recon_loss(bd(l), bd(p)); })) {
    w = std::max(w, e.max_rel_error);
  }
  EXPECT_LT(w, 1e-5);
}

TEST(Disentangler, GradientThroughBothFactors) {
  ParameterSet<double> params;
  const auto g = Disentangler<double>::create(params, 4);
  std::mt19937_64 rng(4);
  g.init(params, rng);
  const auto v = params.add("v", 9, 4);
  params[v].value = random(9, 4, rng);
  const M p = random(9, 4, rng);
  double w = 0.0;
  const auto entries = grad_check(params, [&](Binding<double>& bd) {
    auto out = g.apply(bd, bd(v));
    std::vector<ag::Var<double>> terms = {recon_loss(out.location, bd.tape().constant(p)),
                                          ag::distance_correlation(out.content, out.location)};
    const std::vector<double> weights = {1.0, 1.0};
    return ag::weighted_sum<double>(terms, weights);
  });
  for (const auto& e : entries) {
    EXPECT_GT(e.coords, 0u);
    w = std::max(w, e.max_rel_error);
  }
  EXPECT_LT(w, 1e-5);
}
