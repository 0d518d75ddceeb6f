#pragma once

#include <Eigen/Dense>

namespace abcglm {

inline constexpr const char* library_version = "0.1.0";

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

}  // namespace abcglm
