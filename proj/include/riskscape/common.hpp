#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <string>

namespace riskscape {

inline constexpr const char* kVersion = "0.1.0";

using ParamVec = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct InvalidInput : std::runtime_error {
    explicit InvalidInput(const std::string& msg) : std::runtime_error(msg) {}
};

struct EvalError : std::runtime_error {
    explicit EvalError(const std::string& msg) : std::runtime_error(msg) {}
};

struct Unsupported : std::runtime_error {
    explicit Unsupported(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace riskscape
