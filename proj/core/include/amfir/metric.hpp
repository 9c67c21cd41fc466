#pragma once

#include <span>

#include "amfir/options.hpp"
#include "amfir/types.hpp"

namespace amfir {

// Row k is the mean of the support features (rows) labeled k.
// Throws DataError when some class in [0, n_way) has no support row.
Matrix compute_prototypes(const Matrix& support_features, std::span<const int> labels, int n_way);

// M x N matrix of query-to-prototype distances.
Matrix distances(const Matrix& queries, const Matrix& prototypes, DistanceMode mode);

// Softmax of the negated distances, max-subtracted.
Vector posterior(const Eigen::Ref<const Vector>& distance_row);
Matrix posteriors(const Matrix& distance_matrix);

// Log of posterior(), computed without forming the probabilities so that
// entries far below the best class stay finite.
Vector log_posterior(const Eigen::Ref<const Vector>& distance_row);
Matrix log_posteriors(const Matrix& distance_matrix);

// Largest posterior mass.
double certainty(const Eigen::Ref<const Vector>& probs);
Vector certainties(const Matrix& probs);

// Distances and posteriors of one modality for every query of an episode.
struct ModalityPosterior {
  Matrix distances;  // M x N
  Matrix probs;      // M x N, rows on the simplex
  Vector certainty;  // M
};

ModalityPosterior modality_posterior(const Matrix& query_features, const Matrix& prototypes,
                                     DistanceMode mode);

}  // namespace amfir
