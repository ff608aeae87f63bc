#pragma once

#include <stdexcept>
#include <string>

namespace aggdens {

// Thrown when an operation is asked for something a model/kernel cannot do
// (e.g. a characteristic function that has no closed form).
class UnsupportedCapability : public std::runtime_error {
public:
    explicit UnsupportedCapability(const std::string& what)
        : std::runtime_error(what) {}
};

// Thrown when an adaptive quadrature fails to reach its tolerance; carries
// the residual error estimate of the best attempt.
class QuadratureError : public std::runtime_error {
public:
    QuadratureError(const std::string& what, double residual)
        : std::runtime_error(what + " (residual estimate " +
                             std::to_string(residual) + ")"),
          residual_(residual) {}

    double residual() const { return residual_; }

private:
    double residual_;
};

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace aggdens
