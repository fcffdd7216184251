#include "dnas/errors.hpp"

#include <cmath>
#include <string>

namespace dnas {

BoundsError::BoundsError(std::int64_t index, std::size_t cardinality)
    : Error("index " + std::to_string(index) + " out of range for cardinality " +
            std::to_string(cardinality)),
      index_(index),
      cardinality_(cardinality) {}

ConfigError::ConfigError(const std::string& what, std::size_t line)
    : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

DescriptorError::DescriptorError(const std::string& decision_point, const std::string& what)
    : Error("illegal choice at " + decision_point + ": " + what), decision_point_(decision_point) {}

ParseError::ParseError(const std::string& what, std::size_t line)
    : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

DivergenceError::DivergenceError(std::size_t step, double loss)
    : Error("non-finite loss " + std::to_string(loss) + " at step " + std::to_string(step)),
      step_(step),
      loss_(loss) {}

}  // namespace dnas
