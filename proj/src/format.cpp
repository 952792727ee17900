#include "gmmn/format.hpp"

#include <charconv>
#include <system_error>

#include "gmmn/errors.hpp"

namespace gmmn {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& text) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (first != last && *first == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) throw ConfigError("not a number: '" + text + "'");
  return v;
}

} // namespace gmmn
