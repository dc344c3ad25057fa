#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace layercake {

/// Malformed or out-of-range input (configuration, dimensions, materials).
class InputError : public std::invalid_argument {
public:
    explicit InputError(const std::string& what) : std::invalid_argument(what) {}
};

/// Configuration document that cannot be parsed or references undefined entities.
class ConfigError : public InputError {
public:
    explicit ConfigError(const std::string& what) : InputError(what) {}
};

/// Numerical failure inside a solver: non-convergence, singular systems.
class SolverError : public std::runtime_error {
public:
    explicit SolverError(const std::string& what, std::vector<double> residuals = {})
        : std::runtime_error(what), residuals_(std::move(residuals)) {}

    const std::vector<double>& residuals() const noexcept { return residuals_; }

private:
    std::vector<double> residuals_;
};

/// A least-squares interface system whose numerical rank is below the unknown count.
class RankDeficiencyError : public SolverError {
public:
    RankDeficiencyError(const std::string& what, std::vector<double> singular_values)
        : SolverError(what, std::move(singular_values)) {}
};

/// (I - R R) is singular in the generalized sweep at interface `interface_index` (1-based).
class ResonanceError : public SolverError {
public:
    ResonanceError(const std::string& what, int interface_index)
        : SolverError(what), interface_index_(interface_index) {}

    int interface_index() const noexcept { return interface_index_; }

private:
    int interface_index_;
};

}  // namespace layercake
