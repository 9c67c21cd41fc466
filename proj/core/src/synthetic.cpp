#include "amfir/dataset.hpp"

#include <cmath>
#include <cstdio>

namespace amfir {

void SyntheticSpec::validate() const {
  if (num_classes < 1 || per_class < 1) throw ConfigError("class and per-class counts must be >= 1");
  if (dim_rgb < 1 || dim_flow < 1) throw ConfigError("dimensions must be >= 1");
  if (!(sigma_low < sigma_high)) throw ConfigError("sigma_low must be < sigma_high");
  if (!(sigma_low >= 0.0)) throw ConfigError("sigma_low must be >= 0");
  if (!(p_rgb_dominant >= 0.0 && p_rgb_dominant <= 1.0)) {
    throw ConfigError("p_rgb_dominant must lie in [0, 1]");
  }
  if (!std::isfinite(sep)) throw ConfigError("sep must be finite");
}

MultimodalDataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);

  // Class means are drawn once and shared by every sample of the class.
  std::vector<Vector> mean_rgb, mean_flow;
  mean_rgb.reserve(static_cast<std::size_t>(spec.num_classes));
  mean_flow.reserve(static_cast<std::size_t>(spec.num_classes));
  for (int k = 0; k < spec.num_classes; ++k) {
    Vector r(spec.dim_rgb), f(spec.dim_flow);
    for (auto& x : r) x = spec.sep * rng.normal();
    for (auto& x : f) x = spec.sep * rng.normal();
    mean_rgb.push_back(std::move(r));
    mean_flow.push_back(std::move(f));
  }

  std::vector<EmbeddingRecord> records;
  records.reserve(static_cast<std::size_t>(spec.num_classes * spec.per_class));
  char id[32];
  for (int k = 0; k < spec.num_classes; ++k) {
    for (int s = 0; s < spec.per_class; ++s) {
      EmbeddingRecord r;
      std::snprintf(id, sizeof id, "c%03d_s%04d", k, s);
      r.id = id;
      r.label = k;
      const bool rgb_dominant = rng.uniform() < spec.p_rgb_dominant;
      r.dominant = rgb_dominant ? Modality::kRgb : Modality::kFlow;
      const double sigma_r = rgb_dominant ? spec.sigma_low : spec.sigma_high;
      const double sigma_f = rgb_dominant ? spec.sigma_high : spec.sigma_low;
      r.rgb = mean_rgb[static_cast<std::size_t>(k)];
      r.flow = mean_flow[static_cast<std::size_t>(k)];
      for (auto& x : r.rgb) x += sigma_r * rng.normal();
      for (auto& x : r.flow) x += sigma_f * rng.normal();
      records.push_back(std::move(r));
    }
  }

  return MultimodalDataset(
      DatasetMeta{spec.dim_rgb, spec.dim_flow, spec.num_classes}, std::move(records));
}

}  // namespace amfir
