#pragma once

#include <stdexcept>
#include <string>

namespace crimecast {

// Bad inputs: schema mismatches, broken invariants, impossible requests. CLI exit 1.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failure: divergence, rank deficiency, singular systems. CLI exit 2.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace crimecast
