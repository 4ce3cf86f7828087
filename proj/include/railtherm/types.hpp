#pragma once

// Shared small fixed-size vector aliases used across the library.

#include <Eigen/Dense>

namespace railtherm {

using Vec3 = Eigen::Vector3d;
using Vec5 = Eigen::Matrix<double, 5, 1>;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Vec9 = Eigen::Matrix<double, 9, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

}  // namespace railtherm
