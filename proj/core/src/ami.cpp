#include "amfir/ami.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <thread>

#include "amfir/asi.hpp"
#include "amfir/metric.hpp"

namespace amfir {

FusionWeights fusion_weights(double certainty_rgb, double certainty_flow) {
  const double sum = certainty_rgb + certainty_flow;
  return {certainty_rgb / sum, certainty_flow / sum};
}

Vector fused_posterior(const Eigen::Ref<const Vector>& distances_rgb,
                       const Eigen::Ref<const Vector>& distances_flow, const FusionWeights& weights) {
  if (distances_rgb.size() != distances_flow.size()) {
    throw DataError("fused_posterior: modality rows differ in length");
  }
  const Vector energy = weights.rgb * distances_rgb + weights.flow * distances_flow;
  return posterior(energy);
}

int argmax(const Eigen::Ref<const Vector>& v) {
  int best = 0;
  for (Eigen::Index k = 1; k < v.size(); ++k) {
    if (v[k] > v[best]) best = static_cast<int>(k);
  }
  return best;
}

EpisodeResult evaluate_episode(const EpisodeBatch& batch, const ModelBundle& model, FusionMode mode) {
  const auto& h = model.hyper;
  const auto rgb = forward_modality(model.rgb, batch.support_rgb, batch.query_rgb,
                                    batch.support_labels, batch.n_way, h.distance);
  const auto flow = forward_modality(model.flow, batch.support_flow, batch.query_flow,
                                     batch.support_labels, batch.n_way, h.distance);
  const auto scores = score_reliability(rgb.posterior, flow.posterior, h.reliability);
  const auto groups = assign_groups(scores, h.margin);

  EpisodeResult res;
  const auto m = batch.num_queries();
  res.queries.reserve(m);
  std::size_t hits = 0, hits_r = 0, hits_f = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    QueryOutcome q;
    switch (mode) {
      case FusionMode::kAdaptive:
        q.weights = fusion_weights(rgb.posterior.certainty[row], flow.posterior.certainty[row]);
        break;
      case FusionMode::kRgbOnly: q.weights = {1.0, 0.0}; break;
      case FusionMode::kFlowOnly: q.weights = {0.0, 1.0}; break;
      case FusionMode::kMean: q.weights = {0.5, 0.5}; break;
    }
    q.fused = fused_posterior(rgb.posterior.distances.row(row).transpose(),
                              flow.posterior.distances.row(row).transpose(), q.weights);
    q.predicted = argmax(q.fused);
    q.predicted_rgb = argmax(rgb.posterior.probs.row(row).transpose());
    q.predicted_flow = argmax(flow.posterior.probs.row(row).transpose());
    q.truth = batch.query_labels[i];
    q.group = groups.tags[i];
    if (batch.query_dominant[i]) {
      q.asi_agrees = *batch.query_dominant[i] == q.group;
      ++res.dominance_known;
      if (*q.asi_agrees) ++res.dominance_agree;
    }
    hits += q.predicted == q.truth;
    hits_r += q.predicted_rgb == q.truth;
    hits_f += q.predicted_flow == q.truth;
    res.queries.push_back(std::move(q));
  }
  if (m > 0) {
    res.accuracy = static_cast<double>(hits) / static_cast<double>(m);
    res.accuracy_rgb = static_cast<double>(hits_r) / static_cast<double>(m);
    res.accuracy_flow = static_cast<double>(hits_f) / static_cast<double>(m);
  }
  res.rgb_group = groups.rgb_group.size();
  res.flow_group = groups.flow_group.size();
  return res;
}

EpisodeResult evaluate_episode(const MultimodalDataset& dataset, const Episode& episode,
                               const ModelBundle& model, FusionMode mode) {
  check_compatible(model, dataset.meta());
  return evaluate_episode(gather_batch(dataset, episode), model, mode);
}

RunMetrics aggregate_metrics(std::span<const EpisodeResult> results, FusionMode mode) {
  if (results.empty()) throw ConfigError("aggregate_metrics: no episode results");
  RunMetrics m;
  m.fusion = mode;
  m.episodes = results.size();
  const auto n = static_cast<double>(results.size());
  std::size_t known = 0, agree = 0;
  for (const auto& r : results) {
    m.episode_accuracies.push_back(r.accuracy);
    m.episode_rgb_groups.push_back(r.rgb_group);
    m.episode_flow_groups.push_back(r.flow_group);
    m.mean_accuracy += r.accuracy;
    m.mean_accuracy_rgb += r.accuracy_rgb;
    m.mean_accuracy_flow += r.accuracy_flow;
    known += r.dominance_known;
    agree += r.dominance_agree;
  }
  m.mean_accuracy /= n;
  m.mean_accuracy_rgb /= n;
  m.mean_accuracy_flow /= n;
  if (results.size() > 1) {
    double ss = 0.0;
    for (const double a : m.episode_accuracies) ss += (a - m.mean_accuracy) * (a - m.mean_accuracy);
    const double sd = std::sqrt(ss / (n - 1.0));
    m.ci95 = 1.96 * sd / std::sqrt(n);
  }
  if (known > 0) m.asi_agreement = static_cast<double>(agree) / static_cast<double>(known);
  return m;
}

std::vector<EpisodeResult> evaluate_run(const MultimodalDataset& dataset, const ModelBundle& model,
                                        const EpisodeConfig& config, int episodes, FusionMode mode,
                                        std::uint64_t seed, unsigned threads) {
  if (episodes < 1) throw ConfigError("evaluation needs at least one episode");
  check_compatible(model, dataset.meta());
  const Rng stream(seed, streams::kEval);

  std::vector<EpisodeResult> results(static_cast<std::size_t>(episodes));
  auto run_range = [&](int begin, int end) {
    for (int e = begin; e < end; ++e) {
      Rng rng = stream.substream(static_cast<std::uint64_t>(e));
      const auto episode = sample_episode(dataset, config, rng);
      results[static_cast<std::size_t>(e)] =
          evaluate_episode(gather_batch(dataset, episode), model, mode);
    }
  };

  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(episodes));
  if (threads <= 1) {
    run_range(0, episodes);
    return results;
  }
  std::vector<std::future<void>> workers;
  const int chunk = (episodes + static_cast<int>(threads) - 1) / static_cast<int>(threads);
  for (int begin = 0; begin < episodes; begin += chunk) {
    workers.push_back(std::async(std::launch::async, run_range, begin, std::min(episodes, begin + chunk)));
  }
  for (auto& w : workers) w.get();
  return results;
}

}  // namespace amfir
