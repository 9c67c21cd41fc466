#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "amfir/amfir.hpp"

namespace amfir::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

inline constexpr int kDefaultTrainEpisodes = 2000;
inline constexpr int kDefaultEvalEpisodes = 600;

struct RunConfig {
  std::string command;

  std::filesystem::path data;
  std::filesystem::path model;
  std::filesystem::path metrics;
  std::filesystem::path trace;
  std::filesystem::path table;
  std::filesystem::path out_train;
  std::filesystem::path out_test;

  EpisodeConfig episode;
  int episodes = -1;  // resolved per command when < 0
  int eval_episodes = kDefaultEvalEpisodes;
  Hyperparameters hyper;
  FusionMode fusion = FusionMode::kAdaptive;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  double split_ratio = 0.7;
  unsigned threads = 0;
  SyntheticSpec synthetic;

  // Episode count for the command: explicit value or the command default.
  int resolved_episodes() const;
  // Throws ConfigError on invalid counts or hyperparameters.
  void validate() const;
};

// Parses argv (config-file values first, flags override) and dispatches.
// Never throws; returns one of the exit codes above.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

void cmd_generate(const RunConfig& config, std::ostream& log);
void cmd_split(const RunConfig& config, std::ostream& log);
TrainResult cmd_train(const RunConfig& config, std::ostream& log);
RunMetrics cmd_eval(const RunConfig& config, std::ostream& log);

// One configuration of the ablation grid.
struct AblationCell {
  std::string name;
  DistillMode distill = DistillMode::kBoth;
  AsiForce asi_force = AsiForce::kOff;
  FusionMode fusion = FusionMode::kAdaptive;
  bool baseline = false;  // single-modality evaluation of the full model
};

// full, rgb_dominant_only, flow_dominant_only, amd_off, ami_off, t_rgb, t_flow.
std::vector<AblationCell> ablation_grid();
// rgb_only and flow_only evaluations of the full model.
std::vector<AblationCell> ablation_baselines();

struct AblationRow {
  AblationCell cell;
  std::vector<double> accuracy;  // per seed
  std::vector<double> ci95;      // per seed
  double mean_accuracy = 0.0;
};

struct AblationTable {
  std::vector<std::uint64_t> seeds;
  std::vector<AblationRow> rows;  // grid cells, then baselines

  const AblationRow& row(const std::string& name) const;
};

// Trains and evaluates every grid cell for every seed. When config.data is
// empty, each seed uses the synthetic benchmark generated with that seed.
AblationTable run_ablation(const RunConfig& config);
AblationTable cmd_ablate(const RunConfig& config, std::ostream& log);

void write_ablation_table(const AblationTable& table, std::ostream& out);
void write_metrics(const RunMetrics& metrics, const RunConfig& config, std::ostream& out);

}  // namespace amfir::cli
