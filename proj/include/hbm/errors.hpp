#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace hbm {

// A configuration value violates a constraint. `field()` is the dotted path
// of the offending key, e.g. "model.T".
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::invalid_argument(field + ": " + message),
        field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// A file could not be decoded. Carries the byte offset when one is known.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message,
             std::optional<std::size_t> offset = std::nullopt)
      : std::runtime_error(offset ? message + " (at byte offset " +
                                        std::to_string(*offset) + ")"
                                  : message),
        offset_(offset) {}
  std::optional<std::size_t> offset() const { return offset_; }

 private:
  std::optional<std::size_t> offset_;
};

class VersionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hbm
