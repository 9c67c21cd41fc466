#include "amfir/asi.hpp"

#include <cmath>

namespace amfir {

double shannon_entropy(const Eigen::Ref<const Vector>& probs) {
  double h = 0.0;
  for (Eigen::Index k = 0; k < probs.size(); ++k) {
    const double p = probs[k];
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

double free_energy(const Eigen::Ref<const Vector>& distance_row,
                   const Eigen::Ref<const Vector>& probs, ReliabilityMode mode) {
  if (distance_row.size() != probs.size()) {
    throw DataError("free_energy: distance and posterior rows differ in length");
  }
  const double entropy = shannon_entropy(probs);
  if (mode == ReliabilityMode::kEntropy) return entropy;
  return probs.dot(distance_row) - entropy;
}

double free_energy_closed_form(const Eigen::Ref<const Vector>& distance_row) {
  const double lo = distance_row.minCoeff();
  return lo - std::log((-(distance_row.array() - lo)).unaryExpr([](double x) { return std::exp(x); }).sum());
}

ReliabilityScores score_reliability(const ModalityPosterior& rgb, const ModalityPosterior& flow,
                                    ReliabilityMode mode) {
  if (rgb.probs.rows() != flow.probs.rows()) {
    throw DataError("score_reliability: modalities disagree on query count");
  }
  ReliabilityScores s;
  s.mode = mode;
  s.energies.resize(rgb.probs.rows(), 2);
  for (Eigen::Index i = 0; i < rgb.probs.rows(); ++i) {
    s.energies(i, 0) = free_energy(rgb.distances.row(i).transpose(), rgb.probs.row(i).transpose(), mode);
    s.energies(i, 1) =
        free_energy(flow.distances.row(i).transpose(), flow.probs.row(i).transpose(), mode);
  }
  return s;
}

GroupAssignment assign_groups(const ReliabilityScores& scores, double margin) {
  GroupAssignment g;
  const auto m = scores.size();
  g.tags.reserve(m);
  g.decisive.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const double fr = scores.energies(row, 0);
    const double ff = scores.energies(row, 1);
    const Modality tag = ff < fr ? Modality::kFlow : Modality::kRgb;
    g.tags.push_back(tag);
    (tag == Modality::kRgb ? g.rgb_group : g.flow_group).push_back(i);
    g.decisive.push_back(std::abs(fr - ff) >= margin);
  }
  return g;
}

GroupAssignment force_groups(std::size_t num_queries, Modality m) {
  GroupAssignment g;
  g.tags.assign(num_queries, m);
  g.decisive.assign(num_queries, true);
  auto& members = m == Modality::kRgb ? g.rgb_group : g.flow_group;
  for (std::size_t i = 0; i < num_queries; ++i) members.push_back(i);
  return g;
}

}  // namespace amfir
