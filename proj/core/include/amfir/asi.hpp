#pragma once

#include <cstddef>
#include <vector>

#include "amfir/metric.hpp"
#include "amfir/options.hpp"
#include "amfir/types.hpp"

namespace amfir {

// Shannon entropy in nats; zero-probability entries contribute nothing.
double shannon_entropy(const Eigen::Ref<const Vector>& probs);

// Reliability score of one query in one modality; lower is more reliable.
//   kVfe:     sum_k p(k) psi(k) - H(p)  (the variational free energy of the
//             Boltzmann posterior under a uniform class prior)
//   kEntropy: H(p)
// `probs` must be the posterior of `distance_row`.
double free_energy(const Eigen::Ref<const Vector>& distance_row,
                   const Eigen::Ref<const Vector>& probs, ReliabilityMode mode);

// Closed form of the kVfe score, -log sum_k exp(-psi(k)). Used as a
// cross-check only.
double free_energy_closed_form(const Eigen::Ref<const Vector>& distance_row);

struct ReliabilityScores {
  Matrix energies;  // M x 2, column 0 = RGB, column 1 = flow
  ReliabilityMode mode = ReliabilityMode::kEntropy;

  std::size_t size() const { return static_cast<std::size_t>(energies.rows()); }
};

ReliabilityScores score_reliability(const ModalityPosterior& rgb, const ModalityPosterior& flow,
                                    ReliabilityMode mode);

// Partition of the queries of an episode into RGB- and flow-dominant groups.
struct GroupAssignment {
  std::vector<Modality> tags;         // per query
  std::vector<std::size_t> rgb_group;
  std::vector<std::size_t> flow_group;
  // Queries whose reliability gap reaches the margin; only these take part in
  // distillation. All true when the margin is 0.
  std::vector<bool> decisive;

  const std::vector<std::size_t>& group(Modality m) const {
    return m == Modality::kRgb ? rgb_group : flow_group;
  }
};

// Query i is RGB-dominant iff F_r < F_f, flow-dominant iff F_f < F_r; exact
// ties go to RGB.
GroupAssignment assign_groups(const ReliabilityScores& scores, double margin = 0.0);

// Every query placed in the group of `m`.
GroupAssignment force_groups(std::size_t num_queries, Modality m);

}  // namespace amfir
