#include "amfir/options.hpp"
#include "amfir/text.hpp"

#include <cctype>
#include <cstdio>
#include <cstdlib>

namespace amfir {
namespace {

// Lower-cases and folds '-' to '_' so "t-rgb", "T_RGB" and "t_rgb" all match.
std::string normalize(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    c = c == '-' ? '_' : static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

[[noreturn]] void bad_value(std::string_view what, std::string_view value) {
  throw ConfigError("invalid " + std::string(what) + ": '" + std::string(value) + "'");
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  for (int precision = 6; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

std::string to_string(Modality m) { return m == Modality::kRgb ? "r" : "f"; }

std::string to_string(DistanceMode m) {
  return m == DistanceMode::kSquaredEuclidean ? "sq_euclidean" : "euclidean";
}

std::string to_string(ReliabilityMode m) {
  return m == ReliabilityMode::kEntropy ? "entropy" : "vfe";
}

std::string to_string(DistillMode m) {
  switch (m) {
    case DistillMode::kBoth: return "both";
    case DistillMode::kTeacherRgb: return "t_rgb";
    case DistillMode::kTeacherFlow: return "t_flow";
    case DistillMode::kNone: return "none";
  }
  return "both";
}

std::string to_string(FusionMode m) {
  switch (m) {
    case FusionMode::kAdaptive: return "adaptive";
    case FusionMode::kRgbOnly: return "rgb_only";
    case FusionMode::kFlowOnly: return "flow_only";
    case FusionMode::kMean: return "mean";
  }
  return "adaptive";
}

std::string to_string(AsiForce m) {
  switch (m) {
    case AsiForce::kOff: return "off";
    case AsiForce::kForceRgb: return "force_rgb";
    case AsiForce::kForceFlow: return "force_flow";
  }
  return "off";
}

DistanceMode parse_distance_mode(std::string_view s) {
  const auto v = normalize(s);
  if (v == "sq_euclidean" || v == "squared_euclidean" || v == "sq") {
    return DistanceMode::kSquaredEuclidean;
  }
  if (v == "euclidean") return DistanceMode::kEuclidean;
  bad_value("distance mode", s);
}

ReliabilityMode parse_reliability_mode(std::string_view s) {
  const auto v = normalize(s);
  if (v == "entropy") return ReliabilityMode::kEntropy;
  if (v == "vfe") return ReliabilityMode::kVfe;
  bad_value("reliability mode", s);
}

DistillMode parse_distill_mode(std::string_view s) {
  const auto v = normalize(s);
  if (v == "both") return DistillMode::kBoth;
  if (v == "t_rgb") return DistillMode::kTeacherRgb;
  if (v == "t_flow") return DistillMode::kTeacherFlow;
  if (v == "none") return DistillMode::kNone;
  bad_value("distill mode", s);
}

FusionMode parse_fusion_mode(std::string_view s) {
  const auto v = normalize(s);
  if (v == "adaptive") return FusionMode::kAdaptive;
  if (v == "rgb" || v == "rgb_only") return FusionMode::kRgbOnly;
  if (v == "flow" || v == "flow_only") return FusionMode::kFlowOnly;
  if (v == "mean") return FusionMode::kMean;
  bad_value("fusion mode", s);
}

AsiForce parse_asi_force(std::string_view s) {
  const auto v = normalize(s);
  if (v == "off") return AsiForce::kOff;
  if (v == "force_rgb" || v == "rgb") return AsiForce::kForceRgb;
  if (v == "force_flow" || v == "flow") return AsiForce::kForceFlow;
  bad_value("asi force", s);
}

}  // namespace amfir
