#include "amfir/trainer.hpp"

#include <cmath>
#include <fstream>
#include <ostream>
#include <string>

#include "amfir/asi.hpp"
#include "amfir/text.hpp"

namespace amfir {
namespace {

double mean_vfe(const ModalityPosterior& post) {
  if (post.distances.rows() == 0) return 0.0;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < post.distances.rows(); ++i) {
    acc += free_energy(post.distances.row(i).transpose(), post.probs.row(i).transpose(),
                       ReliabilityMode::kVfe);
  }
  return acc / static_cast<double>(post.distances.rows());
}

}  // namespace

TrainResult train_meta(const MultimodalDataset& dataset, const EpisodeConfig& config, int episodes,
                       ModelBundle model, std::uint64_t seed) {
  if (episodes < 0) throw ConfigError("episode count must be >= 0");
  check_compatible(model, dataset.meta());
  model.hyper.validate();

  TrainResult result;
  result.trace.reserve(static_cast<std::size_t>(episodes));
  const Rng stream(seed, streams::kTrain);
  for (int e = 0; e < episodes; ++e) {
    Rng rng = stream.substream(static_cast<std::uint64_t>(e));
    const auto episode = sample_episode(dataset, config, rng);
    const auto batch = gather_batch(dataset, episode);

    StepEvaluation step;
    try {
      step = evaluate_step(batch, model);
    } catch (const NumericError& err) {
      throw NumericError(std::string(err.what()) + " at episode " + std::to_string(e) +
                         " (seed " + std::to_string(seed) + ")");
    }
    if (!std::isfinite(step.loss.total)) {
      throw NumericError("non-finite loss at episode " + std::to_string(e) + " (seed " +
                         std::to_string(seed) + ")");
    }

    TraceRow row;
    row.episode = e;
    row.loss = step.loss;
    row.free_energy_r = mean_vfe(step.forward.rgb.posterior);
    row.free_energy_f = mean_vfe(step.forward.flow.posterior);
    row.rgb_group = step.forward.groups.rgb_group.size();
    row.flow_group = step.forward.groups.flow_group.size();
    result.trace.push_back(row);

    // Both heads move from gradients taken at the same parameters.
    sgd_step(model, step.gradients, model.hyper.gamma);
  }
  result.model = std::move(model);
  return result;
}

void write_trace(const std::vector<TraceRow>& trace, std::ostream& out) {
  out << "#episode\ttotal\tce_r\tce_f\td_rf\td_fr\tF_r\tF_f\tn_rgb_group\tn_flow_group\n";
  for (const auto& r : trace) {
    out << r.episode << '\t' << format_double(r.loss.total) << '\t' << format_double(r.loss.ce_r) << '\t'
        << format_double(r.loss.ce_f) << '\t' << format_double(r.loss.distill_r_to_f) << '\t'
        << format_double(r.loss.distill_f_to_r) << '\t' << format_double(r.free_energy_r) << '\t'
        << format_double(r.free_energy_f) << '\t' << r.rgb_group << '\t' << r.flow_group << '\n';
  }
}

void save_trace(const std::vector<TraceRow>& trace, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write trace file " + path.string());
  write_trace(trace, out);
}

}  // namespace amfir
