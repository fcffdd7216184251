#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace dnas {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class BoundsError : public Error {
 public:
  BoundsError(std::int64_t index, std::size_t cardinality);

  std::int64_t index() const { return index_; }
  std::size_t cardinality() const { return cardinality_; }

 private:
  std::int64_t index_;
  std::size_t cardinality_;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what) {}
  ConfigError(const std::string& what, std::size_t line);

  // 1-based line of the offending config input, 0 when not file-backed.
  std::size_t line() const { return line_; }

 private:
  std::size_t line_ = 0;
};

class DescriptorError : public Error {
 public:
  DescriptorError(const std::string& decision_point, const std::string& what);

  const std::string& decision_point() const { return decision_point_; }

 private:
  std::string decision_point_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line);

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class SplitError : public Error {
 public:
  using Error::Error;
};

class CostTableError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t step, double loss);

  std::size_t step() const { return step_; }
  double loss() const { return loss_; }

 private:
  std::size_t step_;
  double loss_;
};

}  // namespace dnas
