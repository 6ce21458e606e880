#pragma once

#include <stdexcept>
#include <string>

namespace brw {

enum class ErrorKind {
  invalid_argument,
  not_normalized,
  not_critical,
  degenerate_variance,
  retry_budget_exceeded,
  missing_labels,
  not_psd,
  invalid_mu,
  size_mismatch,
  cap_exceeded,
  negative_sample,
  config,
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace brw
