#pragma once

#include <stdexcept>
#include <string>

namespace etap {

// Error carrying a short machine-readable code ("plant-diverged",
// "invalid-command", "episode-finished", "diverged-update", "config",
// "checkpoint-version", ...).
class Error : public std::runtime_error {
 public:
  explicit Error(std::string code, const std::string& detail = {})
      : std::runtime_error(detail.empty() ? code : code + ": " + detail),
        code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

}  // namespace etap
