#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "amfir/asi.hpp"
#include "amfir/metric.hpp"

namespace amfir {
namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

ReliabilityScores scores(std::initializer_list<std::pair<double, double>> rows,
                         ReliabilityMode mode = ReliabilityMode::kVfe) {
  ReliabilityScores s;
  s.mode = mode;
  s.energies.resize(static_cast<Eigen::Index>(rows.size()), 2);
  Eigen::Index i = 0;
  for (const auto& [r, f] : rows) {
    s.energies(i, 0) = r;
    s.energies(i, 1) = f;
    ++i;
  }
  return s;
}

ModalityPosterior from_distances(const Matrix& d) {
  ModalityPosterior mp;
  mp.distances = d;
  mp.probs = posteriors(d);
  mp.certainty = certainties(mp.probs);
  return mp;
}

TEST(FreeEnergy, KnownValues) {
  const Vector psi = vec({0, std::log(3.0)});
  const Vector p = posterior(psi);
  EXPECT_NEAR(free_energy(psi, p, ReliabilityMode::kVfe), -std::log(4.0 / 3.0), 1e-12);
  EXPECT_NEAR(free_energy(psi, p, ReliabilityMode::kVfe), -0.287682, 1e-6);
  EXPECT_NEAR(free_energy_closed_form(psi), -0.287682, 1e-6);

  const Vector zeros = Vector::Zero(5);
  const Vector uniform = posterior(zeros);
  EXPECT_NEAR(free_energy(zeros, uniform, ReliabilityMode::kEntropy), std::log(5.0), 1e-12);
  EXPECT_NEAR(free_energy(zeros, uniform, ReliabilityMode::kVfe), -std::log(5.0), 1e-12);
  EXPECT_THROW(free_energy(zeros, vec({1, 0}), ReliabilityMode::kVfe), DataError);
}

TEST(FreeEnergy, IdentityFuzz) {
  std::mt19937_64 gen(6);
  std::uniform_int_distribution<int> width(2, 10);
  std::uniform_real_distribution<double> unit(0.0, 50.0);
  for (int trial = 0; trial < 10000; ++trial) {
    const int n = width(gen);
    Vector psi(n);
    for (int j = 0; j < n; ++j) psi[j] = unit(gen);
    const Vector p = posterior(psi);
    const double f = free_energy(psi, p, ReliabilityMode::kVfe);
    // -log sum exp(-psi), evaluated independently with the max-shift trick
    const double m = psi.minCoeff();
    double s = 0.0;
    for (int j = 0; j < n; ++j) s += std::exp(-(psi[j] - m));
    ASSERT_NEAR(f, m - std::log(s), 1e-6);

    const double h = free_energy(psi, p, ReliabilityMode::kEntropy);
    ASSERT_GE(h, -1e-12);
    ASSERT_LE(h, std::log(static_cast<double>(n)) + 1e-12);
    ASSERT_NEAR(h, shannon_entropy(p), 1e-15);
  }
}

TEST(AssignGroups, LowerEnergyWins) {
  const auto g = assign_groups(scores({{-0.5, -0.2}, {1.0, 0.3}}));
  EXPECT_EQ(g.tags[0], Modality::kRgb);
  EXPECT_EQ(g.tags[1], Modality::kFlow);
  EXPECT_EQ(g.rgb_group, std::vector<std::size_t>{0});
  EXPECT_EQ(g.flow_group, std::vector<std::size_t>{1});
}

TEST(AssignGroups, TieGoesToRgb) {
  const auto g = assign_groups(scores({{0.4, 0.4}}));
  EXPECT_EQ(g.tags[0], Modality::kRgb);
}

TEST(AssignGroups, SwappingModalitiesSwapsGroupsAndPartitions) {
  std::mt19937_64 gen(8);
  std::normal_distribution<double> n;
  for (int trial = 0; trial < 200; ++trial) {
    ReliabilityScores s;
    s.energies.resize(1 + trial % 30, 2);
    for (Eigen::Index i = 0; i < s.energies.rows(); ++i) {
      s.energies(i, 0) = n(gen);
      s.energies(i, 1) = n(gen);
    }
    ReliabilityScores swapped = s;
    swapped.energies.col(0) = s.energies.col(1);
    swapped.energies.col(1) = s.energies.col(0);
    const auto a = assign_groups(s);
    const auto b = assign_groups(swapped);
    ASSERT_EQ(a.rgb_group, b.flow_group);
    ASSERT_EQ(a.flow_group, b.rgb_group);
    ASSERT_EQ(a.rgb_group.size() + a.flow_group.size(), s.size());
    std::vector<int> seen(s.size(), 0);
    for (auto i : a.rgb_group) ++seen[i];
    for (auto i : a.flow_group) ++seen[i];
    for (int c : seen) ASSERT_EQ(c, 1);
  }
}

TEST(AssignGroups, MarginControlsDecisiveFlag) {
  const auto g = assign_groups(scores({{0.0, 0.05}, {0.0, 1.0}}), 0.1);
  EXPECT_FALSE(g.decisive[0]);
  EXPECT_TRUE(g.decisive[1]);
  EXPECT_EQ(g.tags[0], Modality::kRgb);
  const auto all = assign_groups(scores({{0.0, 0.0}}), 0.0);
  EXPECT_TRUE(all.decisive[0]);
}

TEST(ForceGroups, PutsEveryQueryInOneGroup) {
  const auto g = force_groups(4, Modality::kFlow);
  EXPECT_TRUE(g.rgb_group.empty());
  EXPECT_EQ(g.flow_group.size(), 4u);
  for (auto t : g.tags) EXPECT_EQ(t, Modality::kFlow);
}

// Posterior entropy only depends on distance differences within a row.
TEST(ScoreReliability, EntropyIgnoresPerRowShifts) {
  const Matrix dr = (Matrix(2, 3) << 0, 1, 2, 4, 4, 1).finished();
  const Matrix df = (Matrix(2, 3) << 0, 0.5, 3, 2, 1, 1).finished();
  Matrix dr_shift = dr;
  dr_shift.row(0).array() += 7.0;
  dr_shift.row(1).array() += 100.0;
  const auto a = score_reliability(from_distances(dr), from_distances(df), ReliabilityMode::kEntropy);
  const auto b =
      score_reliability(from_distances(dr_shift), from_distances(df), ReliabilityMode::kEntropy);
  EXPECT_LT((a.energies - b.energies).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(assign_groups(a).tags, assign_groups(b).tags);

  // Free energy moves with the shift.
  const auto va = score_reliability(from_distances(dr), from_distances(df), ReliabilityMode::kVfe);
  const auto vb =
      score_reliability(from_distances(dr_shift), from_distances(df), ReliabilityMode::kVfe);
  EXPECT_NEAR(vb.energies(0, 0) - va.energies(0, 0), 7.0, 1e-12);
}

TEST(ScoreReliability, RejectsMismatchedQueryCounts) {
  EXPECT_THROW(score_reliability(from_distances(Matrix::Zero(2, 3)),
                                 from_distances(Matrix::Zero(3, 3)), ReliabilityMode::kVfe),
               DataError);
}

}  // namespace
}  // namespace amfir
