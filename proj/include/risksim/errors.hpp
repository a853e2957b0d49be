#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace risksim {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input outside an operation's mathematical domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Unknown or inconsistent configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A market action refused by protocol rules.
class RejectedError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

/// Collects every problem found in an input instead of stopping at the first.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> problems)
      : Error(join(problems)), problems_(std::move(problems)) {}

  const std::vector<std::string>& problems() const { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& problems) {
    std::string out;
    for (const auto& p : problems) {
      if (!out.empty()) out += "\n";
      out += p;
    }
    return out;
  }

  std::vector<std::string> problems_;
};

}  // namespace risksim
