#include "amfir/metric.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace amfir {

Matrix compute_prototypes(const Matrix& support_features, std::span<const int> labels, int n_way) {
  if (static_cast<Eigen::Index>(labels.size()) != support_features.rows()) {
    throw DataError("compute_prototypes: label count does not match support rows");
  }
  Matrix protos = Matrix::Zero(n_way, support_features.cols());
  std::vector<int> counts(static_cast<std::size_t>(n_way), 0);
  for (std::size_t j = 0; j < labels.size(); ++j) {
    const int k = labels[j];
    if (k < 0 || k >= n_way) throw DataError("compute_prototypes: label out of range");
    protos.row(k) += support_features.row(static_cast<Eigen::Index>(j));
    ++counts[static_cast<std::size_t>(k)];
  }
  for (int k = 0; k < n_way; ++k) {
    const int c = counts[static_cast<std::size_t>(k)];
    if (c == 0) throw DataError("compute_prototypes: class " + std::to_string(k) + " is empty");
    protos.row(k) /= static_cast<double>(c);
  }
  return protos;
}

Matrix distances(const Matrix& queries, const Matrix& prototypes, DistanceMode mode) {
  if (queries.cols() != prototypes.cols()) {
    throw DataError("distances: query and prototype dimensions differ");
  }
  Matrix d(queries.rows(), prototypes.rows());
  for (Eigen::Index i = 0; i < queries.rows(); ++i) {
    for (Eigen::Index k = 0; k < prototypes.rows(); ++k) {
      const double sq = (queries.row(i) - prototypes.row(k)).squaredNorm();
      d(i, k) = mode == DistanceMode::kSquaredEuclidean ? sq : std::sqrt(sq);
    }
  }
  return d;
}

Vector posterior(const Eigen::Ref<const Vector>& distance_row) {
  // -psi shifted by its maximum, i.e. psi shifted by its minimum.
  const double shift = distance_row.minCoeff();
  // Scalar exp: the vectorised path flushes to zero earlier than the scalar
  // tail, which can break monotonicity near underflow.
  Vector p = (-(distance_row.array() - shift)).unaryExpr([](double x) { return std::exp(x); }).matrix();
  p /= p.sum();
  return p;
}

Matrix posteriors(const Matrix& distance_matrix) {
  Matrix p(distance_matrix.rows(), distance_matrix.cols());
  for (Eigen::Index i = 0; i < distance_matrix.rows(); ++i) {
    p.row(i) = posterior(distance_matrix.row(i).transpose()).transpose();
  }
  return p;
}

Vector log_posterior(const Eigen::Ref<const Vector>& distance_row) {
  const double shift = distance_row.minCoeff();
  const Vector z = -(distance_row.array() - shift).matrix();
  const double log_norm =
      std::log(z.array().unaryExpr([](double x) { return std::exp(x); }).sum());
  return (z.array() - log_norm).matrix();
}

Matrix log_posteriors(const Matrix& distance_matrix) {
  Matrix lp(distance_matrix.rows(), distance_matrix.cols());
  for (Eigen::Index i = 0; i < distance_matrix.rows(); ++i) {
    lp.row(i) = log_posterior(distance_matrix.row(i).transpose()).transpose();
  }
  return lp;
}

double certainty(const Eigen::Ref<const Vector>& probs) { return probs.maxCoeff(); }

Vector certainties(const Matrix& probs) { return probs.rowwise().maxCoeff(); }

ModalityPosterior modality_posterior(const Matrix& query_features, const Matrix& prototypes,
                                     DistanceMode mode) {
  ModalityPosterior out;
  out.distances = distances(query_features, prototypes, mode);
  out.probs = posteriors(out.distances);
  out.certainty = certainties(out.probs);
  return out;
}

}  // namespace amfir
