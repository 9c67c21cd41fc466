#include <gtest/gtest.h>

#include <random>

#include "amfir/amd.hpp"
#include "oracle/gradient_check.hpp"

namespace amfir {
namespace {

TEST(GradientOracle, SquaredEuclideanMatchesCentralDifferences) {
  std::mt19937_64 gen(20240611);
  double worst = 0.0;
  for (int trial = 0; trial < 150; ++trial) {
    const auto ep = oracle::random_episode(gen, /*squared=*/true);
    const double err = oracle::max_gradient_error(ep);
    worst = std::max(worst, err);
    ASSERT_LT(err, 1e-4) << "trial " << trial;
  }
  RecordProperty("worst_relative_error", std::to_string(worst));
}

TEST(GradientOracle, EuclideanMatchesCentralDifferences) {
  std::mt19937_64 gen(77);
  for (int trial = 0; trial < 100; ++trial) {
    const auto ep = oracle::random_episode(gen, /*squared=*/false);
    ASSERT_LT(oracle::max_gradient_error(ep), 1e-4) << "trial " << trial;
  }
}

TEST(GradientOracle, ObjectiveAgreesWithOracleForward) {
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto ep = oracle::random_episode(gen, trial % 2 == 0);
    const auto& p = ep.problem;
    const ModalityBatch batch{ep.support_x, ep.query_x, p.support_labels, p.query_labels, p.n_way};
    const auto mode = p.squared ? DistanceMode::kSquaredEuclidean : DistanceMode::kEuclidean;
    const double lib = modality_objective(ep.head, batch, ep.target, p.lambda, mode);
    std::vector<double> b(ep.head.bias.data(), ep.head.bias.data() + ep.head.bias.size());
    EXPECT_NEAR(lib, oracle::objective(oracle::to_rows(ep.head.weight), b, p), 1e-10);
  }
}

// With squared distances every feature shift cancels, so the bias gradient
// is exactly zero.
TEST(GradientOracle, SquaredDistanceBiasGradientVanishes) {
  std::mt19937_64 gen(9);
  const auto ep = oracle::random_episode(gen, true);
  const auto& p = ep.problem;
  const ModalityBatch batch{ep.support_x, ep.query_x, p.support_labels, p.query_labels, p.n_way};
  const auto g = modality_gradient(ep.head, batch, ep.target, p.lambda, DistanceMode::kSquaredEuclidean);
  EXPECT_LT(g.bias.cwiseAbs().maxCoeff(), 1e-12);
}

}  // namespace
}  // namespace amfir
