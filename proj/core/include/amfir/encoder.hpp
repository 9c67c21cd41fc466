#pragma once

#include <filesystem>
#include <iosfwd>

#include "amfir/options.hpp"
#include "amfir/rng.hpp"
#include "amfir/types.hpp"

namespace amfir {

// Trainable affine head mapping a raw modality embedding into metric space.
struct HeadParams {
  Matrix weight;  // d_proj x d_in
  Vector bias;    // d_proj

  Eigen::Index d_in() const { return weight.cols(); }
  Eigen::Index d_proj() const { return weight.rows(); }
};

inline constexpr int kDefaultProjDim = 64;
inline constexpr double kDefaultLambda = 1.0;
inline constexpr double kDefaultLearningRate = 1e-3;

struct Hyperparameters {
  int d_proj = kDefaultProjDim;
  double lambda = kDefaultLambda;
  double gamma = kDefaultLearningRate;
  ReliabilityMode reliability = ReliabilityMode::kEntropy;
  DistanceMode distance = DistanceMode::kSquaredEuclidean;
  DistillMode distill = DistillMode::kBoth;
  AsiForce asi_force = AsiForce::kOff;
  // Minimum |F_r - F_f| for a query to take part in distillation.
  double margin = 0.0;

  void validate() const;
};

struct ModelBundle {
  HeadParams rgb;
  HeadParams flow;
  Hyperparameters hyper;

  const HeadParams& head(Modality m) const { return m == Modality::kRgb ? rgb : flow; }
  HeadParams& head(Modality m) { return m == Modality::kRgb ? rgb : flow; }
};

// Glorot-style Gaussian weights (std = sqrt(2 / (d_in + d_proj))), zero biases.
// Draws the RGB head first, then the flow head.
ModelBundle init_heads(int dim_rgb, int dim_flow, const Hyperparameters& hyper, Rng& rng);
ModelBundle init_heads(int dim_rgb, int dim_flow, int d_proj, Rng& rng);

// Identity weight (requires d_in == d_proj) and zero bias.
HeadParams identity_head(int dim);

// weight * x + bias.
Vector embed(const HeadParams& head, const Vector& x);
// Row-wise embed: row i of the result is embed(head, X.row(i)).
Matrix embed_rows(const HeadParams& head, const Matrix& rows);

inline constexpr int kModelFormatVersion = 1;

void write_model(const ModelBundle& model, std::ostream& out);
ModelBundle read_model(std::istream& in);
void save_model(const ModelBundle& model, const std::filesystem::path& path);
ModelBundle load_model(const std::filesystem::path& path);

}  // namespace amfir
