#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "amfir/rng.hpp"
#include "amfir/types.hpp"

namespace amfir {

struct DatasetMeta {
  int dim_rgb = 0;
  int dim_flow = 0;
  int num_classes = 0;
};

// One labeled sample carrying an embedding per modality.
struct EmbeddingRecord {
  std::string id;
  int label = 0;
  Vector rgb;
  Vector flow;
  // Ground-truth dominant modality; only synthetic data carries it.
  std::optional<Modality> dominant;
};

// Immutable collection of records. The constructor enforces every invariant:
// consistent dimensions, labels in [0, C), each class populated, unique ids and
// finite entries.
class MultimodalDataset {
 public:
  MultimodalDataset(DatasetMeta meta, std::vector<EmbeddingRecord> records);

  const DatasetMeta& meta() const { return meta_; }
  std::span<const EmbeddingRecord> records() const { return records_; }
  const EmbeddingRecord& record(std::size_t i) const { return records_.at(i); }
  std::size_t size() const { return records_.size(); }
  int num_classes() const { return meta_.num_classes; }

  // Record indices of class k, in file order.
  std::span<const std::size_t> class_members(int k) const;

  // True when at least one record carries a ground-truth dominance tag.
  bool has_dominance() const;

 private:
  DatasetMeta meta_;
  std::vector<EmbeddingRecord> records_;
  std::vector<std::vector<std::size_t>> by_class_;
};

inline constexpr int kDatasetFormatVersion = 1;

// Line-delimited object format: a {"kind":"meta",...} line followed by one
// record object per line.
MultimodalDataset read_dataset(std::istream& in);
void write_dataset(const MultimodalDataset& dataset, std::ostream& out);
MultimodalDataset load_dataset(const std::filesystem::path& path);
void save_dataset(const MultimodalDataset& dataset, const std::filesystem::path& path);

// Parameters of the synthetic two-modality benchmark. Each sample is either
// RGB- or flow-dominant; its dominant modality is drawn with sigma_low noise
// around the class mean and the other one with sigma_high.
struct SyntheticSpec {
  int num_classes = 24;
  int per_class = 40;
  int dim_rgb = 64;
  int dim_flow = 64;
  double sep = 1.0;
  double sigma_low = 0.2;
  double sigma_high = 1.0;
  double p_rgb_dominant = 0.5;
  std::uint64_t seed = 0;

  // Throws ConfigError when an invariant does not hold.
  void validate() const;
};

MultimodalDataset generate_synthetic(const SyntheticSpec& spec);

// Assigns a random round(ratio * C) classes to the first output and the rest
// to the second; labels are remapped to be contiguous within each output.
std::pair<MultimodalDataset, MultimodalDataset> split_by_class(
    const MultimodalDataset& dataset, double ratio, Rng& rng);

struct EpisodeConfig {
  int n_way = 5;
  int k_shot = 1;
  int q_per_class = 5;

  int num_queries() const { return n_way * q_per_class; }
};

// N-way K-shot task. Indices refer to records of the dataset the episode was
// sampled from. Support is ordered class-major, so support_labels[j] ==
// j / k_shot; query labels are episode-local and only read when scoring.
struct Episode {
  EpisodeConfig config;
  std::vector<int> classes;  // global class of each episode class
  std::vector<std::size_t> support;
  std::vector<int> support_labels;
  std::vector<std::size_t> query;
  std::vector<int> query_labels;
};

Episode sample_episode(const MultimodalDataset& dataset, const EpisodeConfig& config, Rng& rng);

}  // namespace amfir
