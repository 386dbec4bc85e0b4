#ifndef MCDH_ERRORS_HPP
#define MCDH_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace mcdh {

/// Machine-readable failure class carried by every library exception.
/// The CLI maps these onto exit codes.
enum class ErrorCategory {
  invalid_argument,
  numerical_instability,
  consistency,
  schema,
  version,
  unscoreable_individual,
  usage,
  io,
};

inline std::string_view category_name(ErrorCategory c) noexcept {
  switch (c) {
    case ErrorCategory::invalid_argument: return "invalid-argument";
    case ErrorCategory::numerical_instability: return "numerical-instability";
    case ErrorCategory::consistency: return "consistency";
    case ErrorCategory::schema: return "schema";
    case ErrorCategory::version: return "version";
    case ErrorCategory::unscoreable_individual: return "unscoreable-individual";
    case ErrorCategory::usage: return "usage";
    case ErrorCategory::io: return "io";
  }
  return "unknown";
}

class Error : public std::runtime_error {
public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}
  ErrorCategory category() const noexcept { return category_; }

private:
  ErrorCategory category_;
};

struct InvalidArgument : Error {
  explicit InvalidArgument(const std::string& w) : Error(ErrorCategory::invalid_argument, w) {}
};

struct NumericalInstability : Error {
  explicit NumericalInstability(const std::string& w)
      : Error(ErrorCategory::numerical_instability, w) {}
};

struct ConsistencyError : Error {
  explicit ConsistencyError(const std::string& w) : Error(ErrorCategory::consistency, w) {}
};

/// Input file does not match its schema. `row` is 1-based (header = row 1), 0 if not row-specific.
struct SchemaError : Error {
  SchemaError(const std::string& w, std::size_t row = 0)
      : Error(ErrorCategory::schema, row ? "row " + std::to_string(row) + ": " + w : w),
        row(row) {}
  std::size_t row;
};

struct VersionError : Error {
  explicit VersionError(const std::string& w) : Error(ErrorCategory::version, w) {}
};

struct UnscoreableIndividual : Error {
  explicit UnscoreableIndividual(const std::string& w)
      : Error(ErrorCategory::unscoreable_individual, w) {}
};

struct UsageError : Error {
  explicit UsageError(const std::string& w) : Error(ErrorCategory::usage, w) {}
};

struct IoError : Error {
  explicit IoError(const std::string& w) : Error(ErrorCategory::io, w) {}
};

}  // namespace mcdh

#endif  // MCDH_ERRORS_HPP
