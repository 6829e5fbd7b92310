#pragma once

#include <Eigen/Dense>

namespace sloc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

}  // namespace sloc
