#pragma once

#include <string>

namespace etap {

// '#' starts a comment at the beginning of a line or after whitespace, so
// names like adult#001 survive.
inline std::string strip_comment(const std::string& line) {
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '#' && (i == 0 || line[i - 1] == ' ' || line[i - 1] == '\t')) return line.substr(0, i);
  }
  return line;
}

}  // namespace etap
