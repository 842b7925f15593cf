#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace boostfgl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// All numerics are 64-bit; tolerances below are shared across modules.
constexpr double kEps = 1e-12;

constexpr int kUnlabeled = -1;

enum class Split : std::uint8_t { Train = 0, Val = 1, Test = 2 };

// Invalid user-supplied configuration (bad ranges, missing files, bad grids).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// A caller violated an API precondition (shape mismatch, unlabeled node, ...).
struct ContractError : std::logic_error {
    explicit ContractError(const std::string& msg) : std::logic_error(msg) {}
};

// Malformed input file; message carries the offending line.
struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// Training produced non-finite values.
struct DivergedError : std::runtime_error {
    explicit DivergedError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace boostfgl
