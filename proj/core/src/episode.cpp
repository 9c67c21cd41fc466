#include "amfir/dataset.hpp"

#include <cmath>
#include <algorithm>
#include <numeric>

namespace amfir {
namespace {

// First `count` entries of `items` become a uniform sample without replacement.
template <typename T>
void partial_shuffle(std::vector<T>& items, std::size_t count, Rng& rng) {
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + rng.uniform_index(items.size() - i);
    std::swap(items[i], items[j]);
  }
}

}  // namespace

Episode sample_episode(const MultimodalDataset& dataset, const EpisodeConfig& config, Rng& rng) {
  if (config.n_way < 1 || config.k_shot < 1 || config.q_per_class < 1) {
    throw ConfigError("n_way, k_shot and q_per_class must all be >= 1");
  }
  if (config.n_way > dataset.num_classes()) {
    throw DataError("insufficient classes: episode needs " + std::to_string(config.n_way) +
                    ", dataset has " + std::to_string(dataset.num_classes()));
  }

  std::vector<int> classes(static_cast<std::size_t>(dataset.num_classes()));
  std::iota(classes.begin(), classes.end(), 0);
  partial_shuffle(classes, static_cast<std::size_t>(config.n_way), rng);
  classes.resize(static_cast<std::size_t>(config.n_way));

  Episode ep;
  ep.config = config;
  ep.classes = classes;
  const auto per_class = static_cast<std::size_t>(config.k_shot + config.q_per_class);
  ep.support.reserve(static_cast<std::size_t>(config.n_way * config.k_shot));
  ep.query.reserve(static_cast<std::size_t>(config.num_queries()));

  std::vector<std::vector<std::size_t>> queries_by_class;
  for (int local = 0; local < config.n_way; ++local) {
    const int k = classes[static_cast<std::size_t>(local)];
    const auto members = dataset.class_members(k);
    if (members.size() < per_class) {
      throw DataError("insufficient records in class " + std::to_string(k) + ": need " +
                      std::to_string(per_class) + ", have " + std::to_string(members.size()));
    }
    std::vector<std::size_t> pool(members.begin(), members.end());
    partial_shuffle(pool, per_class, rng);
    for (int s = 0; s < config.k_shot; ++s) {
      ep.support.push_back(pool[static_cast<std::size_t>(s)]);
      ep.support_labels.push_back(local);
    }
    for (std::size_t q = static_cast<std::size_t>(config.k_shot); q < per_class; ++q) {
      ep.query.push_back(pool[q]);
      ep.query_labels.push_back(local);
    }
  }
  return ep;
}

std::pair<MultimodalDataset, MultimodalDataset> split_by_class(
    const MultimodalDataset& dataset, double ratio, Rng& rng) {
  const int total = dataset.num_classes();
  if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("split ratio must lie in (0, 1)");
  const int first = static_cast<int>(std::lround(ratio * total));
  if (first < 1 || first >= total) {
    throw ConfigError("split ratio leaves one side without classes (" + std::to_string(total) +
                      " classes)");
  }

  std::vector<int> order(static_cast<std::size_t>(total));
  std::iota(order.begin(), order.end(), 0);
  partial_shuffle(order, order.size(), rng);

  // new_label[k] is the contiguous label of global class k on its side.
  std::vector<int> side(static_cast<std::size_t>(total)), new_label(static_cast<std::size_t>(total));
  std::vector<int> a_classes(order.begin(), order.begin() + first);
  std::vector<int> b_classes(order.begin() + first, order.end());
  std::sort(a_classes.begin(), a_classes.end());
  std::sort(b_classes.begin(), b_classes.end());
  for (std::size_t i = 0; i < a_classes.size(); ++i) {
    side[static_cast<std::size_t>(a_classes[i])] = 0;
    new_label[static_cast<std::size_t>(a_classes[i])] = static_cast<int>(i);
  }
  for (std::size_t i = 0; i < b_classes.size(); ++i) {
    side[static_cast<std::size_t>(b_classes[i])] = 1;
    new_label[static_cast<std::size_t>(b_classes[i])] = static_cast<int>(i);
  }

  std::vector<EmbeddingRecord> a, b;
  for (const auto& r : dataset.records()) {
    EmbeddingRecord copy = r;
    copy.label = new_label[static_cast<std::size_t>(r.label)];
    (side[static_cast<std::size_t>(r.label)] == 0 ? a : b).push_back(std::move(copy));
  }
  const auto& m = dataset.meta();
  return {MultimodalDataset({m.dim_rgb, m.dim_flow, first}, std::move(a)),
          MultimodalDataset({m.dim_rgb, m.dim_flow, total - first}, std::move(b))};
}

}  // namespace amfir
