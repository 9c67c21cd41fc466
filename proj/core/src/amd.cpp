#include "amfir/amd.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace amfir {
namespace {

bool teaches(DistillMode mode, Modality teacher) {
  switch (mode) {
    case DistillMode::kBoth: return true;
    case DistillMode::kTeacherRgb: return teacher == Modality::kRgb;
    case DistillMode::kTeacherFlow: return teacher == Modality::kFlow;
    case DistillMode::kNone: return false;
  }
  return false;
}

// KL(p || q) with the student given in log space.
double kl_from_logs(const Eigen::Ref<const Vector>& p, const Eigen::Ref<const Vector>& log_q) {
  double kl = 0.0;
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    if (p[k] > 0.0) kl += p[k] * (std::log(p[k]) - log_q[k]);
  }
  // Rounding can leave a tiny negative value when p == q.
  return std::max(kl, 0.0);
}

double weighted_distillation(std::span<const std::size_t> group, const Matrix& teacher_probs,
                             const Vector& teacher_certainty, const Matrix& student_log_probs) {
  double weight_sum = 0.0;
  double acc = 0.0;
  for (const auto i : group) {
    const auto row = static_cast<Eigen::Index>(i);
    const double c = teacher_certainty[row];
    weight_sum += c;
    acc += c * kl_from_logs(teacher_probs.row(row).transpose(), student_log_probs.row(row).transpose());
  }
  return weight_sum > 0.0 ? acc / weight_sum : 0.0;
}

double mean_nll(const Matrix& log_probs, std::span<const int> labels) {
  if (static_cast<Eigen::Index>(labels.size()) != log_probs.rows()) {
    throw DataError("cross_entropy_loss: label count does not match posterior rows");
  }
  if (labels.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i];
    if (y < 0 || y >= log_probs.cols()) {
      throw DataError("cross_entropy_loss: label " + std::to_string(y) + " out of range");
    }
    acc -= log_probs(static_cast<Eigen::Index>(i), y);
  }
  return acc / static_cast<double>(labels.size());
}

}  // namespace

EpisodeBatch gather_batch(const MultimodalDataset& dataset, const Episode& episode) {
  const auto& meta = dataset.meta();
  EpisodeBatch b;
  b.n_way = episode.config.n_way;
  const auto ns = static_cast<Eigen::Index>(episode.support.size());
  const auto nq = static_cast<Eigen::Index>(episode.query.size());
  b.support_rgb.resize(ns, meta.dim_rgb);
  b.support_flow.resize(ns, meta.dim_flow);
  b.query_rgb.resize(nq, meta.dim_rgb);
  b.query_flow.resize(nq, meta.dim_flow);
  for (Eigen::Index j = 0; j < ns; ++j) {
    const auto& r = dataset.record(episode.support[static_cast<std::size_t>(j)]);
    b.support_rgb.row(j) = r.rgb.transpose();
    b.support_flow.row(j) = r.flow.transpose();
  }
  for (Eigen::Index i = 0; i < nq; ++i) {
    const auto& r = dataset.record(episode.query[static_cast<std::size_t>(i)]);
    b.query_rgb.row(i) = r.rgb.transpose();
    b.query_flow.row(i) = r.flow.transpose();
    b.query_dominant.push_back(r.dominant);
  }
  b.support_labels = episode.support_labels;
  b.query_labels = episode.query_labels;
  return b;
}

void check_compatible(const ModelBundle& model, const DatasetMeta& meta) {
  if (model.rgb.d_in() != meta.dim_rgb || model.flow.d_in() != meta.dim_flow) {
    throw DataError("model expects input dims (" + std::to_string(model.rgb.d_in()) + ", " +
                    std::to_string(model.flow.d_in()) + ") but dataset has (" +
                    std::to_string(meta.dim_rgb) + ", " + std::to_string(meta.dim_flow) + ")");
  }
  if (model.rgb.d_proj() != model.flow.d_proj()) {
    throw DataError("model heads disagree on projection dimension");
  }
}

ModalityForward forward_modality(const HeadParams& head, const Matrix& support_x,
                                 const Matrix& query_x, std::span<const int> support_labels,
                                 int n_way, DistanceMode mode) {
  ModalityForward f;
  f.support_features = embed_rows(head, support_x);
  f.query_features = embed_rows(head, query_x);
  f.prototypes = compute_prototypes(f.support_features, support_labels, n_way);
  f.posterior = modality_posterior(f.query_features, f.prototypes, mode);
  f.log_probs = log_posteriors(f.posterior.distances);
  return f;
}

EpisodeForward forward_episode(const EpisodeBatch& batch, const ModelBundle& model) {
  const auto& h = model.hyper;
  EpisodeForward fw;
  fw.rgb = forward_modality(model.rgb, batch.support_rgb, batch.query_rgb, batch.support_labels,
                            batch.n_way, h.distance);
  fw.flow = forward_modality(model.flow, batch.support_flow, batch.query_flow, batch.support_labels,
                             batch.n_way, h.distance);
  fw.scores = score_reliability(fw.rgb.posterior, fw.flow.posterior, h.reliability);
  switch (h.asi_force) {
    case AsiForce::kOff: fw.groups = assign_groups(fw.scores, h.margin); break;
    case AsiForce::kForceRgb: fw.groups = force_groups(batch.num_queries(), Modality::kRgb); break;
    case AsiForce::kForceFlow: fw.groups = force_groups(batch.num_queries(), Modality::kFlow); break;
  }
  return fw;
}

double kl_divergence(const Eigen::Ref<const Vector>& p, const Eigen::Ref<const Vector>& q) {
  if (p.size() != q.size()) throw DataError("kl_divergence: length mismatch");
  double kl = 0.0;
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    if (p[k] > 0.0) kl += p[k] * (std::log(p[k]) - std::log(q[k]));
  }
  return std::max(kl, 0.0);
}

double distillation_loss(std::span<const std::size_t> group, const Matrix& teacher_probs,
                         const Vector& teacher_certainty, const Matrix& student_probs) {
  return weighted_distillation(group, teacher_probs, teacher_certainty,
                               student_probs.array().log().matrix());
}

double cross_entropy_loss(const Matrix& probs, std::span<const int> labels) {
  return mean_nll(probs.array().log().matrix(), labels);
}

DistillationTarget distillation_target(const EpisodeForward& forward, Modality student,
                                       DistillMode mode) {
  const Modality teacher = other(student);
  DistillationTarget t;
  t.active = teaches(mode, teacher);
  if (!t.active) return t;
  const auto& tf = forward.of(teacher);
  t.teacher_probs = tf.posterior.probs;
  t.teacher_certainty = tf.posterior.certainty;
  for (const auto i : forward.groups.group(teacher)) {
    if (forward.groups.decisive[i]) t.members.push_back(i);
  }
  return t;
}

ModalityBatch modality_batch(const EpisodeBatch& batch, Modality m) {
  return ModalityBatch{batch.support(m), batch.query(m), batch.support_labels, batch.query_labels,
                       batch.n_way};
}

namespace {

double objective_from_forward(const ModalityForward& f, const ModalityBatch& batch,
                              const DistillationTarget& target, double lambda) {
  double value = mean_nll(f.log_probs, batch.query_labels);
  if (target.active && lambda != 0.0) {
    value += lambda * weighted_distillation(target.members, target.teacher_probs,
                                            target.teacher_certainty, f.log_probs);
  }
  return value;
}

HeadGradient gradient_from_forward(const ModalityForward& f,
                                   const ModalityBatch& batch, const DistillationTarget& target,
                                   double lambda, DistanceMode mode) {
  const auto& probs = f.posterior.probs;
  const auto& dist = f.posterior.distances;
  const Eigen::Index m = probs.rows();
  const Eigen::Index n = probs.cols();

  // dL/dz for logits z = -psi.
  Matrix g = Matrix::Zero(m, n);
  if (m > 0) {
    g = probs / static_cast<double>(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      g(i, batch.query_labels[static_cast<std::size_t>(i)]) -= 1.0 / static_cast<double>(m);
    }
  }
  if (target.active && lambda != 0.0 && !target.members.empty()) {
    double weight_sum = 0.0;
    for (const auto i : target.members) weight_sum += target.teacher_certainty[static_cast<Eigen::Index>(i)];
    for (const auto i : target.members) {
      const auto row = static_cast<Eigen::Index>(i);
      const double w = lambda * target.teacher_certainty[row] / weight_sum;
      g.row(row) += w * (probs.row(row) - target.teacher_probs.row(row));
    }
  }

  // a(i,k) = dL/dpsi(i,k) * dpsi/d(sq distance) * 2, so that
  // dL/dq_i = sum_k a(i,k) (q_i - t_k) and dL/dt_k = -sum_i a(i,k) (q_i - t_k).
  Matrix a(m, n);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index k = 0; k < n; ++k) {
      const double dpsi = -g(i, k);
      if (mode == DistanceMode::kSquaredEuclidean) {
        a(i, k) = 2.0 * dpsi;
      } else {
        a(i, k) = dist(i, k) > 0.0 ? dpsi / dist(i, k) : 0.0;
      }
    }
  }

  const Matrix& q = f.query_features;
  const Matrix& t = f.prototypes;
  const Vector a_rows = a.rowwise().sum();
  const Vector a_cols = a.colwise().sum().transpose();
  const Matrix d_query = a_rows.asDiagonal() * q - a * t;
  const Matrix d_proto = a_cols.asDiagonal() * t - a.transpose() * q;

  // Prototypes are class means of the support features.
  std::vector<int> counts(static_cast<std::size_t>(n), 0);
  for (const int y : batch.support_labels) ++counts[static_cast<std::size_t>(y)];
  Matrix d_support(f.support_features.rows(), f.support_features.cols());
  for (Eigen::Index j = 0; j < d_support.rows(); ++j) {
    const int y = batch.support_labels[static_cast<std::size_t>(j)];
    d_support.row(j) = d_proto.row(y) / static_cast<double>(counts[static_cast<std::size_t>(y)]);
  }

  HeadGradient grad;
  grad.weight = d_query.transpose() * batch.query_x + d_support.transpose() * batch.support_x;
  grad.bias = d_query.colwise().sum().transpose() + d_support.colwise().sum().transpose();
  return grad;
}

void check_finite(const HeadGradient& g, Modality m) {
  if (!g.weight.allFinite() || !g.bias.allFinite()) {
    throw NumericError("non-finite gradient for the " +
                       std::string(m == Modality::kRgb ? "RGB" : "flow") + " head");
  }
}

}  // namespace

double modality_objective(const HeadParams& head, const ModalityBatch& batch,
                          const DistillationTarget& target, double lambda, DistanceMode mode) {
  const auto f = forward_modality(head, batch.support_x, batch.query_x, batch.support_labels,
                                  batch.n_way, mode);
  return objective_from_forward(f, batch, target, lambda);
}

HeadGradient modality_gradient(const HeadParams& head, const ModalityBatch& batch,
                               const DistillationTarget& target, double lambda, DistanceMode mode) {
  const auto f = forward_modality(head, batch.support_x, batch.query_x, batch.support_labels,
                                  batch.n_way, mode);
  return gradient_from_forward(f, batch, target, lambda, mode);
}

namespace {

LossBreakdown loss_from_forward(const EpisodeBatch& batch, const EpisodeForward& fw,
                                const DistillationTarget& target_r,
                                const DistillationTarget& target_f, double lambda) {
  LossBreakdown loss;
  loss.lambda = lambda;
  loss.ce_r = mean_nll(fw.rgb.log_probs, batch.query_labels);
  loss.ce_f = mean_nll(fw.flow.log_probs, batch.query_labels);
  if (target_f.active) {
    loss.distill_r_to_f = weighted_distillation(target_f.members, target_f.teacher_probs,
                                                target_f.teacher_certainty, fw.flow.log_probs);
  }
  if (target_r.active) {
    loss.distill_f_to_r = weighted_distillation(target_r.members, target_r.teacher_probs,
                                                target_r.teacher_certainty, fw.rgb.log_probs);
  }
  loss.total = loss.ce_r + loss.ce_f + lambda * (loss.distill_r_to_f + loss.distill_f_to_r);
  return loss;
}

}  // namespace

StepEvaluation evaluate_step(const EpisodeBatch& batch, const ModelBundle& model) {
  const auto& h = model.hyper;
  StepEvaluation out;
  out.forward = forward_episode(batch, model);
  const auto& fw = out.forward;

  const auto target_r = distillation_target(fw, Modality::kRgb, h.distill);
  const auto target_f = distillation_target(fw, Modality::kFlow, h.distill);
  out.loss = loss_from_forward(batch, fw, target_r, target_f, h.lambda);

  const auto batch_r = modality_batch(batch, Modality::kRgb);
  const auto batch_f = modality_batch(batch, Modality::kFlow);
  out.gradients.rgb = gradient_from_forward(fw.rgb, batch_r, target_r, h.lambda, h.distance);
  out.gradients.flow = gradient_from_forward(fw.flow, batch_f, target_f, h.lambda, h.distance);
  check_finite(out.gradients.rgb, Modality::kRgb);
  check_finite(out.gradients.flow, Modality::kFlow);
  return out;
}

LossBreakdown total_loss(const EpisodeBatch& batch, const ModelBundle& model) {
  const auto fw = forward_episode(batch, model);
  return loss_from_forward(batch, fw, distillation_target(fw, Modality::kRgb, model.hyper.distill),
                           distillation_target(fw, Modality::kFlow, model.hyper.distill),
                           model.hyper.lambda);
}

GradientSet grad_total_loss(const EpisodeBatch& batch, const ModelBundle& model) {
  return evaluate_step(batch, model).gradients;
}

void sgd_step(ModelBundle& model, const GradientSet& gradients, double gamma) {
  for (const auto m : {Modality::kRgb, Modality::kFlow}) {
    auto& head = model.head(m);
    const auto& g = gradients.of(m);
    if (g.weight.rows() != head.weight.rows() || g.weight.cols() != head.weight.cols() ||
        g.bias.size() != head.bias.size()) {
      throw DataError("sgd_step: gradient shape does not match parameters");
    }
    head.weight -= gamma * g.weight;
    head.bias -= gamma * g.bias;
  }
}

}  // namespace amfir
