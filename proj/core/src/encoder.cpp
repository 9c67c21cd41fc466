#include "amfir/encoder.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include <json.hpp>

namespace amfir {
namespace {

using Json = nlohmann::ordered_json;

HeadParams glorot_head(int d_in, int d_proj, Rng& rng) {
  const double std = std::sqrt(2.0 / static_cast<double>(d_in + d_proj));
  HeadParams h{Matrix(d_proj, d_in), Vector::Zero(d_proj)};
  // Row-major draw order keeps the stream layout independent of Eigen storage.
  for (Eigen::Index i = 0; i < h.weight.rows(); ++i) {
    for (Eigen::Index j = 0; j < h.weight.cols(); ++j) h.weight(i, j) = std * rng.normal();
  }
  return h;
}

Json head_to_json(const HeadParams& h, Modality m) {
  Json weight = Json::array();
  for (Eigen::Index i = 0; i < h.weight.rows(); ++i) {
    for (Eigen::Index j = 0; j < h.weight.cols(); ++j) weight.push_back(h.weight(i, j));
  }
  Json bias = Json::array();
  for (Eigen::Index i = 0; i < h.bias.size(); ++i) bias.push_back(h.bias[i]);
  return {{"modality", to_string(m)},
          {"d_in", h.d_in()},
          {"d_proj", h.d_proj()},
          {"weight", std::move(weight)},
          {"bias", std::move(bias)}};
}

HeadParams head_from_json(const Json& j, Modality expected) {
  try {
    if (j.at("modality").get<std::string>() != to_string(expected)) {
      throw DataError("model file: expected head for modality '" + to_string(expected) + "'");
    }
    const auto d_in = j.at("d_in").get<Eigen::Index>();
    const auto d_proj = j.at("d_proj").get<Eigen::Index>();
    const auto& w = j.at("weight");
    const auto& b = j.at("bias");
    if (d_in < 1 || d_proj < 1 || static_cast<Eigen::Index>(w.size()) != d_in * d_proj ||
        static_cast<Eigen::Index>(b.size()) != d_proj) {
      throw DataError("model file: head shape does not match its weight/bias arrays");
    }
    HeadParams h{Matrix(d_proj, d_in), Vector(d_proj)};
    std::size_t n = 0;
    for (Eigen::Index r = 0; r < d_proj; ++r) {
      for (Eigen::Index c = 0; c < d_in; ++c) h.weight(r, c) = w[n++].get<double>();
    }
    for (Eigen::Index r = 0; r < d_proj; ++r) h.bias[r] = b[static_cast<std::size_t>(r)].get<double>();
    if (!h.weight.allFinite() || !h.bias.allFinite()) {
      throw DataError("model file: non-finite parameter");
    }
    return h;
  } catch (const Json::exception& e) {
    throw DataError(std::string("model file: malformed head record: ") + e.what());
  }
}

}  // namespace

void Hyperparameters::validate() const {
  if (d_proj < 1) throw ConfigError("d_proj must be >= 1");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be >= 0");
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ConfigError("learning rate must be > 0");
  if (!(margin >= 0.0)) throw ConfigError("margin must be >= 0");
}

ModelBundle init_heads(int dim_rgb, int dim_flow, const Hyperparameters& hyper, Rng& rng) {
  if (dim_rgb < 1 || dim_flow < 1) throw ConfigError("input dimensions must be >= 1");
  hyper.validate();
  ModelBundle m;
  m.hyper = hyper;
  m.rgb = glorot_head(dim_rgb, hyper.d_proj, rng);
  m.flow = glorot_head(dim_flow, hyper.d_proj, rng);
  return m;
}

ModelBundle init_heads(int dim_rgb, int dim_flow, int d_proj, Rng& rng) {
  Hyperparameters hyper;
  hyper.d_proj = d_proj;
  return init_heads(dim_rgb, dim_flow, hyper, rng);
}

HeadParams identity_head(int dim) {
  return HeadParams{Matrix::Identity(dim, dim), Vector::Zero(dim)};
}

Vector embed(const HeadParams& head, const Vector& x) {
  if (x.size() != head.d_in()) {
    throw DataError("embed: input has " + std::to_string(x.size()) + " entries, head expects " +
                    std::to_string(head.d_in()));
  }
  return head.weight * x + head.bias;
}

Matrix embed_rows(const HeadParams& head, const Matrix& rows) {
  if (rows.cols() != head.d_in()) {
    throw DataError("embed: input has " + std::to_string(rows.cols()) + " columns, head expects " +
                    std::to_string(head.d_in()));
  }
  Matrix out = rows * head.weight.transpose();
  out.rowwise() += head.bias.transpose();
  return out;
}

void write_model(const ModelBundle& model, std::ostream& out) {
  const auto& h = model.hyper;
  Json meta = {{"kind", "model"},
               {"format_version", kModelFormatVersion},
               {"d_proj", h.d_proj},
               {"lambda", h.lambda},
               {"gamma", h.gamma},
               {"reliability", to_string(h.reliability)},
               {"distance", to_string(h.distance)},
               {"distill", to_string(h.distill)},
               {"asi_force", to_string(h.asi_force)},
               {"margin", h.margin}};
  out << meta.dump() << '\n';
  out << head_to_json(model.rgb, Modality::kRgb).dump() << '\n';
  out << head_to_json(model.flow, Modality::kFlow).dump() << '\n';
}

ModelBundle read_model(std::istream& in) {
  std::string line;
  auto next = [&](const char* what) {
    while (std::getline(in, line)) {
      if (line.find_first_not_of(" \t\r\n") != std::string::npos) {
        try {
          return Json::parse(line);
        } catch (const Json::parse_error& e) {
          throw DataError(std::string("model file: malformed ") + what + ": " + e.what());
        }
      }
    }
    throw DataError(std::string("model file: missing ") + what);
  };

  const Json meta = next("metadata record");
  ModelBundle model;
  try {
    if (meta.at("kind").get<std::string>() != "model") {
      throw DataError("model file: first record is not a model metadata record");
    }
    if (meta.at("format_version").get<int>() != kModelFormatVersion) {
      throw DataError("model file: unsupported format_version");
    }
    auto& h = model.hyper;
    h.d_proj = meta.at("d_proj").get<int>();
    h.lambda = meta.at("lambda").get<double>();
    h.gamma = meta.at("gamma").get<double>();
    h.reliability = parse_reliability_mode(meta.at("reliability").get<std::string>());
    h.distance = parse_distance_mode(meta.at("distance").get<std::string>());
    h.distill = parse_distill_mode(meta.at("distill").get<std::string>());
    h.asi_force = parse_asi_force(meta.value("asi_force", std::string("off")));
    h.margin = meta.value("margin", 0.0);
  } catch (const Json::exception& e) {
    throw DataError(std::string("model file: malformed metadata: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("model file: ") + e.what());
  }

  model.rgb = head_from_json(next("rgb head"), Modality::kRgb);
  model.flow = head_from_json(next("flow head"), Modality::kFlow);
  if (model.rgb.d_proj() != model.hyper.d_proj || model.flow.d_proj() != model.hyper.d_proj) {
    throw DataError("model file: head d_proj disagrees with metadata");
  }
  return model;
}

void save_model(const ModelBundle& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write model file " + path.string());
  write_model(model, out);
  if (!out) throw DataError("write failed for " + path.string());
}

ModelBundle load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model file " + path.string());
  return read_model(in);
}

}  // namespace amfir
