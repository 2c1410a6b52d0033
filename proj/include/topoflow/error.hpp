#pragma once

#include <stdexcept>
#include <string>

namespace topoflow {

/// Error categories. The numeric values double as CLI exit codes.
enum class ErrorKind : int {
  usage = 1,
  config = 2,
  data = 3,
  numeric = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error(ErrorKind::config, w) {}
};

/// Malformed files, shape mismatches and invalid field contents.
struct DataError : Error {
  explicit DataError(const std::string& w) : Error(ErrorKind::data, w) {}
};

struct FormatError : DataError {
  FormatError(const std::string& w, std::size_t offset)
      : DataError(w + " (at byte offset " + std::to_string(offset) + ")"), detail_(w), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::string detail_;
  std::size_t offset_;
};

struct ShapeError : DataError {
  explicit ShapeError(const std::string& w) : DataError("shape error: " + w) {}
};

/// Non-finite values, CFL violations, degenerate fits.
struct NumericError : Error {
  explicit NumericError(const std::string& w) : Error(ErrorKind::numeric, w) {}
};

}  // namespace topoflow
