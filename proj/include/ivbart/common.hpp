#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace ivbart {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Mat2 = Eigen::Matrix2d;
using Vec2 = Eigen::Vector2d;

inline void check(bool cond, const std::string& msg) {
  if (!cond) throw std::runtime_error(msg);
}

// Schema tag stamped into every file this project writes.
inline constexpr const char* kSchemaVersion = "ivbart/1";

}  // namespace ivbart
