#pragma once

#include <stdexcept>
#include <string>

namespace cpgm {

// Incompatible tensor/layer dimensions.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Value outside the mathematical domain of an operation (e.g. negative variance).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A caller broke an API precondition (non-scalar loss, missing gradient, ...).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Invalid or incomplete run configuration; message names the offending field.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// Malformed input file (bad magic, truncation); carries the byte offset.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

// A class had too few usable samples for statistics fitting.
class InsufficientDataError : public std::runtime_error {
 public:
  InsufficientDataError(int class_id, const std::string& what)
      : std::runtime_error("class " + std::to_string(class_id) + ": " + what),
        class_id_(class_id) {}
  int class_id() const { return class_id_; }

 private:
  int class_id_;
};

}  // namespace cpgm
