#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "amfir/asi.hpp"
#include "amfir/dataset.hpp"
#include "amfir/encoder.hpp"
#include "amfir/metric.hpp"

namespace amfir {

// Raw embeddings of one episode, gathered row-wise from the dataset.
struct EpisodeBatch {
  int n_way = 0;
  Matrix support_rgb, support_flow;  // (N*K) x D
  Matrix query_rgb, query_flow;      // M x D
  std::vector<int> support_labels;
  std::vector<int> query_labels;
  std::vector<std::optional<Modality>> query_dominant;

  const Matrix& support(Modality m) const { return m == Modality::kRgb ? support_rgb : support_flow; }
  const Matrix& query(Modality m) const { return m == Modality::kRgb ? query_rgb : query_flow; }
  std::size_t num_queries() const { return query_labels.size(); }
};

EpisodeBatch gather_batch(const MultimodalDataset& dataset, const Episode& episode);

// Throws DataError when the heads do not accept the dataset's embeddings.
void check_compatible(const ModelBundle& model, const DatasetMeta& meta);

struct ModalityForward {
  Matrix support_features;
  Matrix query_features;
  Matrix prototypes;
  ModalityPosterior posterior;
  Matrix log_probs;
};

ModalityForward forward_modality(const HeadParams& head, const Matrix& support_x,
                                 const Matrix& query_x, std::span<const int> support_labels,
                                 int n_way, DistanceMode mode);

struct EpisodeForward {
  ModalityForward rgb;
  ModalityForward flow;
  ReliabilityScores scores;
  GroupAssignment groups;

  const ModalityForward& of(Modality m) const { return m == Modality::kRgb ? rgb : flow; }
};

// Embeds, builds prototypes and posteriors for both modalities, scores
// reliability and forms the dominance groups (honoring hyper.asi_force).
EpisodeForward forward_episode(const EpisodeBatch& batch, const ModelBundle& model);

// sum_k p(k) (log p(k) - log q(k)) in nats.
double kl_divergence(const Eigen::Ref<const Vector>& p, const Eigen::Ref<const Vector>& q);

// Certainty-weighted mean of KL(teacher_i || student_i) over the group; zero
// for an empty group.
double distillation_loss(std::span<const std::size_t> group, const Matrix& teacher_probs,
                         const Vector& teacher_certainty, const Matrix& student_probs);

// Mean over queries of -log p_i(y_i).
double cross_entropy_loss(const Matrix& probs, std::span<const int> labels);

struct LossBreakdown {
  double ce_r = 0.0;
  double ce_f = 0.0;
  double distill_r_to_f = 0.0;  // RGB teaches flow
  double distill_f_to_r = 0.0;  // flow teaches RGB
  double lambda = 0.0;
  double total = 0.0;
};

// Frozen teacher side of one distillation direction. The student modality's
// objective treats these values as constants.
struct DistillationTarget {
  bool active = false;
  std::vector<std::size_t> members;
  Matrix teacher_probs;
  Vector teacher_certainty;
};

// Target for `student`: teacher is the other modality, members are the
// decisive queries the teacher dominates. Inactive when the distill mode
// disables that direction.
DistillationTarget distillation_target(const EpisodeForward& forward, Modality student,
                                       DistillMode mode);

// Inputs of one modality's objective.
struct ModalityBatch {
  const Matrix& support_x;
  const Matrix& query_x;
  std::span<const int> support_labels;
  std::span<const int> query_labels;
  int n_way;
};

ModalityBatch modality_batch(const EpisodeBatch& batch, Modality m);

// CE(theta) + lambda * distillation-into-this-modality(theta).
double modality_objective(const HeadParams& head, const ModalityBatch& batch,
                          const DistillationTarget& target, double lambda, DistanceMode mode);

struct HeadGradient {
  Matrix weight;
  Vector bias;
};

// Exact gradient of modality_objective with respect to the head, flowing
// through both the query features and the prototypes.
HeadGradient modality_gradient(const HeadParams& head, const ModalityBatch& batch,
                               const DistillationTarget& target, double lambda, DistanceMode mode);

struct GradientSet {
  HeadGradient rgb;
  HeadGradient flow;

  const HeadGradient& of(Modality m) const { return m == Modality::kRgb ? rgb : flow; }
};

LossBreakdown total_loss(const EpisodeBatch& batch, const ModelBundle& model);
GradientSet grad_total_loss(const EpisodeBatch& batch, const ModelBundle& model);

// One forward pass yielding loss, gradients and the forward state.
struct StepEvaluation {
  LossBreakdown loss;
  GradientSet gradients;
  EpisodeForward forward;
};

StepEvaluation evaluate_step(const EpisodeBatch& batch, const ModelBundle& model);

// theta_m <- theta_m - gamma * grad_m for both modalities.
void sgd_step(ModelBundle& model, const GradientSet& gradients, double gamma);

}  // namespace amfir
