#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace tabdiff {

inline constexpr const char* kVersion = "0.1.0";

// Pseudo-image grid dimensions. Config in principle, but only this size is
// exercised.
inline constexpr int kGridHeight = 10;
inline constexpr int kGridWidth = 11;
inline constexpr int kGridCells = kGridHeight * kGridWidth;

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Grid = Eigen::MatrixXd;  // kGridHeight x kGridWidth, values in [-1, 1]

// Error taxonomy mapped to CLI exit codes: usage -> 1, data/schema -> 2,
// numeric failure -> 3.
struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace tabdiff
