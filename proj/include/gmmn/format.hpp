#pragma once

#include <string>

namespace gmmn {

/// Shortest decimal text that parses back to exactly the same double.
std::string format_double(double v);

/// Inverse of format_double; throws ConfigError on malformed text.
double parse_double(const std::string& text);

} // namespace gmmn
