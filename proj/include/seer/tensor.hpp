#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>

namespace seer {

// Row-major double matrix. Eigen provides the arithmetic; everything the
// library stores or serializes is rows x cols of contiguous row-major f64.
using Tensor2D = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVec = Eigen::RowVectorXd;

inline bool all_finite(const Tensor2D& t) { return t.allFinite(); }

inline void require_shape(const Tensor2D& t, Eigen::Index rows, Eigen::Index cols,
                          const char* what) {
  if (t.rows() != rows || t.cols() != cols) {
    throw std::invalid_argument(std::string(what) + ": expected " + std::to_string(rows) + "x" +
                                std::to_string(cols) + ", got " + std::to_string(t.rows()) + "x" +
                                std::to_string(t.cols()));
  }
}

inline void require_cols(const Tensor2D& t, Eigen::Index cols, const char* what) {
  if (t.cols() != cols) {
    throw std::invalid_argument(std::string(what) + ": expected width " + std::to_string(cols) +
                                ", got " + std::to_string(t.cols()));
  }
}

}  // namespace seer
