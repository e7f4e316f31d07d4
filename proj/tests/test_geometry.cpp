#include "seer/geometry.hpp"

#include <gtest/gtest.h>

#include "seer/common.hpp"

namespace seer {
namespace {

constexpr double kTol = 1e-9;

Eigen::Matrix4d homogeneous(const RigidTransform& t) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.block<3, 3>(0, 0) = t.rotation();
  m.block<3, 1>(0, 3) = t.translation();
  return m;
}

void expect_near(const RigidTransform& a, const RigidTransform& b, double tol = kTol) {
  EXPECT_LT((a.rotation() - b.rotation()).cwiseAbs().maxCoeff(), tol);
  EXPECT_LT((a.translation() - b.translation()).cwiseAbs().maxCoeff(), tol);
}

RigidTransform random_transform(Rng& rng) {
  Eigen::Vector3d axis(rng.normal(), rng.normal(), rng.normal());
  if (axis.norm() < 1e-9) axis = Eigen::Vector3d::UnitX();
  axis.normalize();
  double angle = rng.uniform(-M_PI, M_PI);
  Eigen::Matrix3d r = Eigen::AngleAxisd(angle, axis).toRotationMatrix();
  Eigen::Vector3d t(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2));
  return RigidTransform(r, t);
}

TEST(Geometry, ComposeIdentity) {
  RigidTransform t = RigidTransform::translate(0.3, -0.1, 2.0);
  expect_near(compose(RigidTransform::identity(), t), t);
  expect_near(compose(t, RigidTransform::identity()), t);
}

TEST(Geometry, ComposeTranslationsAdd) {
  RigidTransform a = RigidTransform::translate(1, 0, 0);
  RigidTransform b = RigidTransform::translate(0, 2, 0);
  expect_near(compose(a, b), RigidTransform::translate(1, 2, 0));
  expect_near(compose(b, a), RigidTransform::translate(1, 2, 0));
}

// Oracle: explicit 4x4 homogeneous matrix product.
TEST(Geometry, ComposeMatchesMatrixProduct) {
  RigidTransform a = RigidTransform::rot_z(M_PI / 2.0);
  RigidTransform b = RigidTransform::translate(1, 0, 0);
  RigidTransform c = compose(a, b);
  EXPECT_LT((c.rotation() - RigidTransform::rot_z(M_PI / 2.0).rotation()).cwiseAbs().maxCoeff(),
            kTol);
  EXPECT_NEAR(c.translation()(0), 0.0, kTol);
  EXPECT_NEAR(c.translation()(1), 1.0, kTol);
  EXPECT_NEAR(c.translation()(2), 0.0, kTol);

  Rng rng(41);
  for (int i = 0; i < 200; ++i) {
    RigidTransform x = random_transform(rng);
    RigidTransform y = random_transform(rng);
    Eigen::Matrix4d expected = homogeneous(x) * homogeneous(y);
    Eigen::Matrix4d got = homogeneous(compose(x, y));
    EXPECT_LT((expected - got).cwiseAbs().maxCoeff(), kTol);
  }
}

TEST(Geometry, InvertPureTranslation) {
  expect_near(invert(RigidTransform::identity()), RigidTransform::identity());
  expect_near(invert(RigidTransform::translate(1, 2, 3)), RigidTransform::translate(-1, -2, -3));
}

TEST(Geometry, InvertComposesToIdentity) {
  RigidTransform t = compose(RigidTransform::rot_z(M_PI / 6.0), RigidTransform::translate(1, 0, 0));
  expect_near(compose(t, invert(t)), RigidTransform::identity());
  expect_near(compose(invert(t), t), RigidTransform::identity());
}

TEST(Geometry, RelativeAction) {
  RigidTransform i = RigidTransform::identity();
  expect_near(relative_action(i, RigidTransform::translate(1, 0, 0)),
              RigidTransform::translate(1, 0, 0));
  RigidTransform t = compose(RigidTransform::rot_z(0.7), RigidTransform::translate(0.2, -0.4, 1));
  expect_near(relative_action(t, t), RigidTransform::identity());

  RigidTransform p = RigidTransform::rot_z(M_PI / 2.0);
  RigidTransform p_next = compose(p, RigidTransform::translate(0.1, 0, 0));
  expect_near(relative_action(p, p_next), RigidTransform::translate(0.1, 0, 0));

  // compose(p_t, relative) reconstructs p_next.
  Rng rng(7);
  for (int k = 0; k < 200; ++k) {
    RigidTransform a = random_transform(rng);
    RigidTransform b = random_transform(rng);
    expect_near(compose(a, relative_action(a, b)), b);
  }
}

TEST(Geometry, CameraToRobot) {
  RigidTransform t = compose(RigidTransform::rot_z(0.3), RigidTransform::translate(0.5, 0, 0.1));
  expect_near(camera_to_robot(t, RigidTransform::identity()), t);
  RigidTransform t_cr = compose(RigidTransform::rot_z(1.1), RigidTransform::translate(0, 1, 0));
  expect_near(camera_to_robot(RigidTransform::identity(), t_cr), RigidTransform::identity());

  // translate(1,0,0) conjugated by rotZ(90 deg) becomes translate(0,-1,0).
  RigidTransform moved =
      camera_to_robot(RigidTransform::translate(1, 0, 0), RigidTransform::rot_z(M_PI / 2.0));
  expect_near(moved, RigidTransform::translate(0, -1, 0));
}

TEST(Geometry, ConjugationDistributesOverCompose) {
  Rng rng(11);
  for (int k = 0; k < 200; ++k) {
    RigidTransform a = random_transform(rng);
    RigidTransform b = random_transform(rng);
    RigidTransform t = random_transform(rng);
    expect_near(camera_to_robot(compose(a, b), t),
                compose(camera_to_robot(a, t), camera_to_robot(b, t)), 1e-8);
  }
}

TEST(Geometry, GroupLawsOverRandomTransforms) {
  Rng rng(123);
  for (int k = 0; k < 1000; ++k) {
    RigidTransform a = random_transform(rng);
    RigidTransform b = random_transform(rng);
    RigidTransform c = random_transform(rng);
    expect_near(compose(compose(a, b), c), compose(a, compose(b, c)), 1e-9);
    expect_near(compose(a, RigidTransform::identity()), a);
    expect_near(compose(RigidTransform::identity(), a), a);
    expect_near(compose(a, invert(a)), RigidTransform::identity());
    expect_near(compose(invert(a), a), RigidTransform::identity());
  }
}

TEST(Geometry, RelativeActionFoldReconstructsFinalPose) {
  Rng rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<RigidTransform> poses;
    poses.push_back(random_transform(rng));
    for (int i = 0; i < 50; ++i) {
      // Small incremental motions, like consecutive frames.
      RigidTransform d(Eigen::AngleAxisd(rng.uniform(-0.1, 0.1),
                                         Eigen::Vector3d::UnitZ())
                           .toRotationMatrix(),
                       Eigen::Vector3d(rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05), 0));
      poses.push_back(compose(poses.back(), d));
    }
    RigidTransform acc = poses.front();
    for (size_t i = 0; i + 1 < poses.size(); ++i) {
      acc = compose(acc, relative_action(poses[i], poses[i + 1]));
    }
    expect_near(acc, poses.back(), 1e-8);
  }
}

TEST(Geometry, FlattenActionIdentityAndTranslation) {
  ActionVector full = flatten_action(RigidTransform::identity(), FlattenMode::full);
  std::vector<double> expect_id = {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0};
  EXPECT_EQ(full.values(), expect_id);

  ActionVector t3 = flatten_action(RigidTransform::translate(1, 2, 3), FlattenMode::translation_only);
  std::vector<double> expect_t = {1, 2, 3};
  EXPECT_EQ(t3.values(), expect_t);
}

TEST(Geometry, FlattenActionRotZHandOracle) {
  RigidTransform t =
      compose(RigidTransform::rot_z(M_PI / 2.0), RigidTransform::translate(0, 0, 0.5));
  ActionVector a = flatten_action(t, FlattenMode::full);
  std::vector<double> expected = {0, -1, 0, 0, 1, 0, 0, 0, 0, 0, 1, 0.5};
  ASSERT_EQ(a.size(), 12u);
  for (size_t i = 0; i < 12; ++i) EXPECT_NEAR(a[i], expected[i], kTol) << "index " << i;
}

TEST(Geometry, FlattenUnflattenRoundTrip) {
  Rng rng(5);
  for (int k = 0; k < 500; ++k) {
    RigidTransform t = random_transform(rng);
    expect_near(unflatten_action(flatten_action(t, FlattenMode::full)), t, 1e-12);
  }
}

TEST(Geometry, ActionVectorValidation) {
  EXPECT_THROW(ActionVector({1, 2, 3, 4}, ActionFrame::world), std::invalid_argument);
  // Length-12 vector with a non-orthonormal rotation block.
  std::vector<double> bad = {2, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0};
  EXPECT_THROW(ActionVector(bad, ActionFrame::world), std::invalid_argument);
  EXPECT_NO_THROW(ActionVector::planar(0.01, -0.02));
}

TEST(Geometry, ConstructorReorthonormalizesDrift) {
  // Rotation with small orthogonality drift gets projected back.
  Eigen::Matrix3d r = RigidTransform::rot_z(0.4).rotation();
  r(0, 0) += 5e-8;
  RigidTransform t(r, Eigen::Vector3d::Zero());
  EXPECT_LT((t.rotation().transpose() * t.rotation() - Eigen::Matrix3d::Identity())
                .cwiseAbs()
                .maxCoeff(),
            1e-12);
  EXPECT_NEAR(t.rotation().determinant(), 1.0, 1e-12);

  EXPECT_THROW(RigidTransform(Eigen::Matrix3d::Zero(), Eigen::Vector3d::Zero()),
               std::invalid_argument);
}

}  // namespace
}  // namespace seer
