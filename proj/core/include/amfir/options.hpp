#pragma once

#include <string>
#include <string_view>

#include "amfir/types.hpp"

namespace amfir {

enum class DistanceMode { kSquaredEuclidean, kEuclidean };

// How per-sample modality reliability is scored.
//   kEntropy: Shannon entropy of the modality posterior (bounded, scale free).
//   kVfe:     expected energy minus entropy, i.e. -log sum exp(-distance).
enum class ReliabilityMode { kEntropy, kVfe };

// Which distillation directions are active during meta-training.
//   kTeacherRgb:  only RGB -> flow.   kTeacherFlow: only flow -> RGB.
enum class DistillMode { kBoth, kTeacherRgb, kTeacherFlow, kNone };

enum class FusionMode { kAdaptive, kRgbOnly, kFlowOnly, kMean };

// Overrides the dominance grouping used for distillation.
enum class AsiForce { kOff, kForceRgb, kForceFlow };

std::string to_string(Modality m);
std::string to_string(DistanceMode m);
std::string to_string(ReliabilityMode m);
std::string to_string(DistillMode m);
std::string to_string(FusionMode m);
std::string to_string(AsiForce m);

// Parsers accept the canonical name plus a few dashed / short aliases and
// throw ConfigError on anything else.
DistanceMode parse_distance_mode(std::string_view s);
ReliabilityMode parse_reliability_mode(std::string_view s);
DistillMode parse_distill_mode(std::string_view s);
FusionMode parse_fusion_mode(std::string_view s);
AsiForce parse_asi_force(std::string_view s);

}  // namespace amfir
