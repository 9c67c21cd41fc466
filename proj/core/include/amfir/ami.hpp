#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "amfir/amd.hpp"
#include "amfir/dataset.hpp"
#include "amfir/encoder.hpp"
#include "amfir/options.hpp"

namespace amfir {

struct FusionWeights {
  double rgb = 0.5;
  double flow = 0.5;
};

// alpha_m = c_m / (c_r + c_f).
FusionWeights fusion_weights(double certainty_rgb, double certainty_flow);

// Softmax of -(alpha_r psi_r + alpha_f psi_f), max-subtracted.
Vector fused_posterior(const Eigen::Ref<const Vector>& distances_rgb,
                       const Eigen::Ref<const Vector>& distances_flow, const FusionWeights& weights);

// Index of the largest entry; ties resolve to the lowest index.
int argmax(const Eigen::Ref<const Vector>& v);

struct QueryOutcome {
  Vector fused;
  int predicted = 0;
  int truth = 0;
  int predicted_rgb = 0;
  int predicted_flow = 0;
  FusionWeights weights;
  Modality group = Modality::kRgb;
  std::optional<bool> asi_agrees;  // set only when ground truth is known
};

struct EpisodeResult {
  std::vector<QueryOutcome> queries;
  double accuracy = 0.0;
  double accuracy_rgb = 0.0;
  double accuracy_flow = 0.0;
  std::size_t rgb_group = 0;
  std::size_t flow_group = 0;
  std::size_t dominance_known = 0;
  std::size_t dominance_agree = 0;
};

// Classifies the queries of one episode. Query labels are read only when
// scoring. Group tags always come from the reliability scores (asi_force is a
// training-time switch).
EpisodeResult evaluate_episode(const EpisodeBatch& batch, const ModelBundle& model, FusionMode mode);
EpisodeResult evaluate_episode(const MultimodalDataset& dataset, const Episode& episode,
                               const ModelBundle& model, FusionMode mode);

struct RunMetrics {
  std::size_t episodes = 0;
  double mean_accuracy = 0.0;
  double ci95 = 0.0;  // 1.96 * sample std / sqrt(episodes)
  double mean_accuracy_rgb = 0.0;
  double mean_accuracy_flow = 0.0;
  std::optional<double> asi_agreement;  // over queries with known dominance
  FusionMode fusion = FusionMode::kAdaptive;
  std::vector<double> episode_accuracies;
  std::vector<std::size_t> episode_rgb_groups;
  std::vector<std::size_t> episode_flow_groups;
};

RunMetrics aggregate_metrics(std::span<const EpisodeResult> results, FusionMode mode);

// Evaluates `episodes` episodes drawn from the kEval stream of `seed`; episode
// e depends only on (seed, e), so every fusion mode sees the same tasks.
// Episodes are evaluated on up to `threads` workers (0 = hardware threads).
std::vector<EpisodeResult> evaluate_run(const MultimodalDataset& dataset, const ModelBundle& model,
                                        const EpisodeConfig& config, int episodes, FusionMode mode,
                                        std::uint64_t seed, unsigned threads = 1);

}  // namespace amfir
