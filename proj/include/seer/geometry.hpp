#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace seer {

/// Rigid body transform: orthonormal rotation (det +1) plus translation in
/// meters. Values are immutable after construction; the constructor
/// re-orthonormalizes via polar decomposition when the input drifts beyond
/// 1e-9 and rejects inputs that are not close to a rotation at all.
class RigidTransform {
 public:
  static constexpr double kOrthoTol = 1e-9;

  RigidTransform() : rotation_(Eigen::Matrix3d::Identity()), translation_(Eigen::Vector3d::Zero()) {}

  RigidTransform(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation)
      : rotation_(rotation), translation_(translation) {
    double drift = (rotation_.transpose() * rotation_ - Eigen::Matrix3d::Identity())
                       .cwiseAbs()
                       .maxCoeff();
    if (drift > kOrthoTol || rotation_.determinant() < 0.0) {
      rotation_ = project_to_rotation(rotation_);
    }
  }

  const Eigen::Matrix3d& rotation() const { return rotation_; }
  const Eigen::Vector3d& translation() const { return translation_; }

  static RigidTransform identity() { return RigidTransform(); }

  static RigidTransform translate(double x, double y, double z) {
    return RigidTransform(Eigen::Matrix3d::Identity(), Eigen::Vector3d(x, y, z));
  }

  static RigidTransform rot_z(double radians) {
    Eigen::Matrix3d r = Eigen::AngleAxisd(radians, Eigen::Vector3d::UnitZ()).toRotationMatrix();
    return RigidTransform(r, Eigen::Vector3d::Zero());
  }

  static RigidTransform rot_y(double radians) {
    Eigen::Matrix3d r = Eigen::AngleAxisd(radians, Eigen::Vector3d::UnitY()).toRotationMatrix();
    return RigidTransform(r, Eigen::Vector3d::Zero());
  }

  static RigidTransform rot_x(double radians) {
    Eigen::Matrix3d r = Eigen::AngleAxisd(radians, Eigen::Vector3d::UnitX()).toRotationMatrix();
    return RigidTransform(r, Eigen::Vector3d::Zero());
  }

 private:
  // Nearest rotation in Frobenius norm (polar factor), sign-corrected to
  // det +1. Throws if the input is singular enough that no rotation is near.
  static Eigen::Matrix3d project_to_rotation(const Eigen::Matrix3d& m) {
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    if (svd.singularValues().minCoeff() < 1e-6) {
      throw std::invalid_argument("RigidTransform: rotation block is singular");
    }
    Eigen::Matrix3d u = svd.matrixU();
    Eigen::Matrix3d v = svd.matrixV();
    Eigen::Vector3d s = Eigen::Vector3d::Ones();
    if ((u * v.transpose()).determinant() < 0.0) s(2) = -1.0;
    return u * s.asDiagonal() * v.transpose();
  }

  Eigen::Matrix3d rotation_;
  Eigen::Vector3d translation_;
};

inline RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  return RigidTransform(a.rotation() * b.rotation(),
                        a.rotation() * b.translation() + a.translation());
}

inline RigidTransform invert(const RigidTransform& t) {
  Eigen::Matrix3d rt = t.rotation().transpose();
  return RigidTransform(rt, -(rt * t.translation()));
}

/// Relative motion between consecutive poses of one trajectory: P_t^-1 P_t+1.
/// compose(p_t, result) reconstructs p_next.
inline RigidTransform relative_action(const RigidTransform& p_t, const RigidTransform& p_next) {
  return compose(invert(p_t), p_next);
}

/// Conjugates a camera-frame motion by the fixed camera-to-robot extrinsic:
/// T_cr^-1 * t_c * T_cr.
inline RigidTransform camera_to_robot(const RigidTransform& t_c, const RigidTransform& t_cr) {
  return compose(compose(invert(t_cr), t_c), t_cr);
}

enum class ActionFrame { camera, robot, world };

/// Flat numeric action. Length 2 is a planar translation (the 2D simulator's
/// native action), length 3 a spatial translation, length 12 the row-major
/// flattening of the first three rows of the homogeneous transform [R | t].
class ActionVector {
 public:
  ActionVector(std::vector<double> values, ActionFrame frame)
      : values_(std::move(values)), frame_(frame) {
    if (values_.size() != 2 && values_.size() != 3 && values_.size() != 12) {
      throw std::invalid_argument("ActionVector: length must be 2, 3, or 12");
    }
    if (values_.size() == 12) {
      validate_rotation_block();
    }
  }

  static ActionVector planar(double x, double y, ActionFrame frame = ActionFrame::world) {
    return ActionVector({x, y}, frame);
  }

  const std::vector<double>& values() const { return values_; }
  ActionFrame frame() const { return frame_; }
  size_t size() const { return values_.size(); }
  double operator[](size_t i) const { return values_[i]; }

 private:
  void validate_rotation_block() const {
    Eigen::Matrix3d r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r(i, j) = values_[static_cast<size_t>(i * 4 + j)];
    double drift = (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    if (drift > RigidTransform::kOrthoTol || r.determinant() < 0.0) {
      throw std::invalid_argument("ActionVector: embedded rotation block is not orthonormal");
    }
  }

  std::vector<double> values_;
  ActionFrame frame_;
};

enum class FlattenMode { translation_only, full };

inline ActionVector flatten_action(const RigidTransform& t, FlattenMode mode,
                                   ActionFrame frame = ActionFrame::world) {
  if (mode == FlattenMode::translation_only) {
    return ActionVector({t.translation()(0), t.translation()(1), t.translation()(2)}, frame);
  }
  std::vector<double> v(12);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) v[static_cast<size_t>(i * 4 + j)] = t.rotation()(i, j);
    v[static_cast<size_t>(i * 4 + 3)] = t.translation()(i);
  }
  return ActionVector(std::move(v), frame);
}

/// Inverse of flatten_action. Length-2/3 vectors embed as pure translations
/// (planar actions as (x, y, 0)).
inline RigidTransform unflatten_action(const ActionVector& a) {
  const auto& v = a.values();
  if (v.size() == 2) return RigidTransform::translate(v[0], v[1], 0.0);
  if (v.size() == 3) return RigidTransform::translate(v[0], v[1], v[2]);
  Eigen::Matrix3d r;
  Eigen::Vector3d t;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) r(i, j) = v[static_cast<size_t>(i * 4 + j)];
    t(i) = v[static_cast<size_t>(i * 4 + 3)];
  }
  return RigidTransform(r, t);
}

}  // namespace seer
