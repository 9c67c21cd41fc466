#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "amfir/ami.hpp"
#include "amfir/metric.hpp"
#include "amfir/trainer.hpp"
#include "test_util.hpp"

namespace amfir {
namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

TEST(FusionWeights, KnownValues) {
  const auto eq = fusion_weights(0.4, 0.4);
  EXPECT_DOUBLE_EQ(eq.rgb, 0.5);
  EXPECT_DOUBLE_EQ(eq.flow, 0.5);
  const auto w = fusion_weights(0.9, 0.3);
  EXPECT_NEAR(w.rgb, 0.75, 1e-15);
  EXPECT_NEAR(w.flow, 0.25, 1e-15);
  const auto scaled = fusion_weights(0.9 * 0.5, 0.3 * 0.5);
  EXPECT_NEAR(scaled.rgb, w.rgb, 1e-15);
}

TEST(FusionWeights, SimplexFuzz) {
  std::mt19937_64 gen(13);
  std::uniform_real_distribution<double> c(0.05, 1.0);
  for (int trial = 0; trial < 10000; ++trial) {
    const auto w = fusion_weights(c(gen), c(gen));
    ASSERT_NEAR(w.rgb + w.flow, 1.0, 1e-12);
    ASSERT_GT(w.rgb, 0.0);
    ASSERT_LT(w.rgb, 1.0);
  }
}

TEST(FusedPosterior, KnownValues) {
  const Vector shared = vec({0.3, 1.2, 2.0});
  EXPECT_LT((fused_posterior(shared, shared, fusion_weights(0.8, 0.4)) - posterior(shared)).norm(),
            1e-15);

  const Vector half = fused_posterior(vec({0, 2}), vec({2, 0}), {0.5, 0.5});
  EXPECT_NEAR(half[0], 0.5, 1e-15);
  EXPECT_NEAR(half[1], 0.5, 1e-15);

  const Vector p = fused_posterior(vec({0, std::log(3.0) * 4.0 / 3.0}), vec({0, 0}), {0.75, 0.25});
  EXPECT_NEAR(p[0], 0.75, 1e-12);
  EXPECT_NEAR(p[1], 0.25, 1e-12);
  EXPECT_THROW(fused_posterior(vec({0, 1}), vec({0, 1, 2}), {0.5, 0.5}), DataError);
}

TEST(FusedPosterior, DegenerateWeightLimit) {
  std::mt19937_64 gen(14);
  std::uniform_real_distribution<double> e(0.0, 10.0);
  for (int trial = 0; trial < 100; ++trial) {
    Vector r(5), f(5);
    for (int j = 0; j < 5; ++j) {
      r[j] = e(gen);
      f[j] = e(gen);
    }
    const Vector p = fused_posterior(r, f, {1.0 - 1e-9, 1e-9});
    ASSERT_LT((p - posterior(r)).cwiseAbs().maxCoeff(), 1e-6);
    const Vector shifted = fused_posterior((r.array() + 40.0).matrix(), (f.array() + 40.0).matrix(),
                                           fusion_weights(0.7, 0.2));
    ASSERT_EQ(argmax(shifted), argmax(fused_posterior(r, f, fusion_weights(0.7, 0.2))));
  }
}

TEST(Argmax, LowestIndexWinsTies) {
  EXPECT_EQ(argmax(vec({0.2, 0.4, 0.4})), 1);
  EXPECT_EQ(argmax(vec({0.5, 0.5})), 0);
  EXPECT_EQ(argmax(vec({0.1, 0.2, 0.7})), 2);
}

// RGB row is a scaled identity so its posterior is one-hot on the truth; the
// flow row is noise.
EpisodeBatch crafted_batch() {
  EpisodeBatch b;
  b.n_way = 3;
  b.support_rgb = 50.0 * Matrix::Identity(3, 3);
  b.query_rgb.resize(6, 3);
  b.query_rgb << b.support_rgb, b.support_rgb;
  b.support_flow = (Matrix(3, 2) << 0, 0, 1, 0, 0, 1).finished();
  b.query_flow = (Matrix(6, 2) << 1, 1, 0, 0, 0.3, 0.3, 1, 0, 0.5, 0.5, 0, 0).finished();
  b.support_labels = {0, 1, 2};
  b.query_labels = {0, 1, 2, 0, 1, 2};
  b.query_dominant.assign(6, Modality::kRgb);
  return b;
}

ModelBundle identity_model() {
  ModelBundle m;
  m.rgb = identity_head(3);
  m.flow = identity_head(2);
  m.hyper.d_proj = 3;
  return m;
}

TEST(EvaluateEpisode, RgbOnlyWithOneHotRgbIsPerfect) {
  const auto r = evaluate_episode(crafted_batch(), identity_model(), FusionMode::kRgbOnly);
  EXPECT_DOUBLE_EQ(r.accuracy, 1.0);
  EXPECT_DOUBLE_EQ(r.accuracy_rgb, 1.0);
  EXPECT_LT(r.accuracy_flow, 1.0);
  for (const auto& q : r.queries) EXPECT_EQ(q.predicted, argmax(q.fused));
}

TEST(EvaluateEpisode, FlowOnlyUsesFlowPredictions) {
  const auto r = evaluate_episode(crafted_batch(), identity_model(), FusionMode::kFlowOnly);
  EXPECT_DOUBLE_EQ(r.accuracy, r.accuracy_flow);
  for (const auto& q : r.queries) EXPECT_EQ(q.predicted, q.predicted_flow);
}

TEST(EvaluateEpisode, AgreementCountsTrackDominance) {
  auto b = crafted_batch();
  const auto r = evaluate_episode(b, identity_model(), FusionMode::kAdaptive);
  EXPECT_EQ(r.dominance_known, 6u);
  EXPECT_EQ(r.rgb_group + r.flow_group, 6u);
  b.query_dominant.assign(6, std::nullopt);
  const auto none = evaluate_episode(b, identity_model(), FusionMode::kAdaptive);
  EXPECT_EQ(none.dominance_known, 0u);
  for (const auto& q : none.queries) EXPECT_FALSE(q.asi_agrees.has_value());
}

TEST(EvaluateEpisode, MeanEqualsAdaptiveWhenCertaintiesMatch) {
  const auto d = generate_synthetic(testing::small_spec(5));
  Rng rng(1);
  auto b = gather_batch(d, sample_episode(d, {3, 2, 3}, rng));
  // Flow = permuted copy of RGB: identical distance rows, so c_r = c_f.
  b.support_flow = b.support_rgb.rowwise().reverse();
  b.query_flow = b.query_rgb.rowwise().reverse();
  ModelBundle m;
  m.rgb = identity_head(static_cast<int>(b.support_rgb.cols()));
  m.flow = m.rgb;
  const auto a = evaluate_episode(b, m, FusionMode::kAdaptive);
  const auto mean = evaluate_episode(b, m, FusionMode::kMean);
  ASSERT_EQ(a.queries.size(), mean.queries.size());
  for (std::size_t i = 0; i < a.queries.size(); ++i) {
    EXPECT_EQ(a.queries[i].predicted, mean.queries[i].predicted);
    EXPECT_NEAR(a.queries[i].weights.rgb, 0.5, 1e-12);
  }
}

EpisodeResult result_with_accuracy(double acc) {
  EpisodeResult r;
  r.accuracy = r.accuracy_rgb = r.accuracy_flow = acc;
  return r;
}

TEST(AggregateMetrics, KnownValues) {
  const std::vector<EpisodeResult> one{result_with_accuracy(0.6)};
  const auto m1 = aggregate_metrics(one, FusionMode::kAdaptive);
  EXPECT_EQ(m1.episodes, 1u);
  EXPECT_DOUBLE_EQ(m1.mean_accuracy, 0.6);
  EXPECT_EQ(m1.ci95, 0.0);

  const std::vector<EpisodeResult> perfect(5, result_with_accuracy(1.0));
  const auto mp = aggregate_metrics(perfect, FusionMode::kMean);
  EXPECT_DOUBLE_EQ(mp.mean_accuracy, 1.0);
  EXPECT_EQ(mp.ci95, 0.0);
  EXPECT_EQ(mp.fusion, FusionMode::kMean);

  const std::vector<EpisodeResult> two{result_with_accuracy(0.8), result_with_accuracy(1.0)};
  const auto m2 = aggregate_metrics(two, FusionMode::kAdaptive);
  EXPECT_NEAR(m2.mean_accuracy, 0.9, 1e-15);
  // sample std of (0.8, 1.0) is 0.1 * sqrt(2)
  EXPECT_NEAR(m2.ci95, 1.96 * 0.1 * std::sqrt(2.0) / std::sqrt(2.0), 1e-12);
  EXPECT_FALSE(m2.asi_agreement.has_value());

  EXPECT_THROW(aggregate_metrics(std::vector<EpisodeResult>{}, FusionMode::kAdaptive), ConfigError);
}

TEST(AggregateMetrics, AgreementOnlyOverKnownDominance) {
  auto a = result_with_accuracy(1.0);
  a.dominance_known = 4;
  a.dominance_agree = 3;
  auto b = result_with_accuracy(1.0);
  const auto m = aggregate_metrics(std::vector<EpisodeResult>{a, b}, FusionMode::kAdaptive);
  ASSERT_TRUE(m.asi_agreement.has_value());
  EXPECT_DOUBLE_EQ(*m.asi_agreement, 0.75);
}

TEST(EvaluateRun, FusionModesShareEpisodesAndThreadsAgree) {
  const auto d = generate_synthetic(testing::small_spec(6));
  Rng rng(0, streams::kInit);
  const auto m = init_heads(d.meta().dim_rgb, d.meta().dim_flow, 4, rng);
  const EpisodeConfig cfg{3, 1, 2};
  const auto a = evaluate_run(d, m, cfg, 40, FusionMode::kAdaptive, 11);
  const auto r = evaluate_run(d, m, cfg, 40, FusionMode::kRgbOnly, 11);
  const auto t = evaluate_run(d, m, cfg, 40, FusionMode::kAdaptive, 11, 4);
  ASSERT_EQ(a.size(), 40u);
  for (std::size_t e = 0; e < a.size(); ++e) {
    EXPECT_EQ(a[e].accuracy_rgb, r[e].accuracy_rgb);
    EXPECT_EQ(a[e].rgb_group, r[e].rgb_group);
    EXPECT_EQ(a[e].accuracy, t[e].accuracy);
    ASSERT_EQ(a[e].queries.size(), r[e].queries.size());
    for (std::size_t i = 0; i < a[e].queries.size(); ++i)
      EXPECT_EQ(a[e].queries[i].truth, r[e].queries[i].truth);
  }
}

TEST(EvaluateRun, RejectsIncompatibleModel) {
  const auto d = generate_synthetic(testing::small_spec(6));
  Rng rng(0);
  const auto m = init_heads(d.meta().dim_rgb + 1, d.meta().dim_flow, 4, rng);
  EXPECT_THROW(evaluate_run(d, m, {3, 1, 2}, 5, FusionMode::kAdaptive, 0), DataError);
}

}  // namespace
}  // namespace amfir
