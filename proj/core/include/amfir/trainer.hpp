#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "amfir/amd.hpp"
#include "amfir/dataset.hpp"
#include "amfir/encoder.hpp"

namespace amfir {

// Per-episode training record. free_energy_* are the mean vfe scores of the
// episode's queries regardless of the reliability mode used for grouping.
struct TraceRow {
  int episode = 0;
  LossBreakdown loss;
  double free_energy_r = 0.0;
  double free_energy_f = 0.0;
  std::size_t rgb_group = 0;
  std::size_t flow_group = 0;
};

struct TrainResult {
  ModelBundle model;
  std::vector<TraceRow> trace;
};

// Episodic meta-training: sample -> loss/gradients -> SGD, `episodes` times.
// Episodes are drawn from the kTrain stream of `seed`. Throws NumericError
// (naming the episode and seed) on a non-finite loss or gradient.
TrainResult train_meta(const MultimodalDataset& dataset, const EpisodeConfig& config, int episodes,
                       ModelBundle model, std::uint64_t seed);

// Tab-separated trace: a '#'-prefixed header, then one row per episode with
// episode, total, ce_r, ce_f, d_rf, d_fr, F_r, F_f, n_rgb_group, n_flow_group.
void write_trace(const std::vector<TraceRow>& trace, std::ostream& out);
void save_trace(const std::vector<TraceRow>& trace, const std::filesystem::path& path);

}  // namespace amfir
