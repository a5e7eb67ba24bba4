#pragma once

#include <Eigen/Dense>

namespace lcfn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

}  // namespace lcfn
