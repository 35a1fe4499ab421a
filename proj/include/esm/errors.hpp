#pragma once

#include <stdexcept>
#include <string>

namespace esm {

// Bad user input: config keys, file formats, data that violates a family's
// support. CLI maps these to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid argument to a math routine (non-finite theta, p outside (0,1)).
class DomainError : public std::runtime_error {
 public:
  explicit DomainError(const std::string& msg) : std::runtime_error(msg) {}
};

// Training diverged or produced non-finite parameters. CLI maps to exit 1.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& msg, int epoch)
      : std::runtime_error(msg + " (epoch " + std::to_string(epoch) + ")"),
        epoch_(epoch) {}
  int epoch() const { return epoch_; }

  // Re-labels a propagated failure (e.g. with its ensemble member index)
  // without appending the epoch suffix a second time.
  TrainingError with_prefix(const std::string& prefix) const {
    return TrainingError(prefix + what(), epoch_, raw_tag{});
  }

 private:
  struct raw_tag {};
  TrainingError(const std::string& msg, int epoch, raw_tag)
      : std::runtime_error(msg), epoch_(epoch) {}
  int epoch_ = -1;
};

// Variance/interval computation cannot proceed (e.g. B < 2).
class InferenceError : public std::runtime_error {
 public:
  explicit InferenceError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace esm
