#pragma once

#include <string>

namespace amfir {

// Shortest "%g" rendering (6..17 significant digits) that parses back to v.
std::string format_double(double v);

}  // namespace amfir
