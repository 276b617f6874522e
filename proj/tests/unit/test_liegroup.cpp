#include <gtest/gtest.h>

#include <numbers>

#include "oracles.hpp"
#include "relpose/errors.hpp"

using namespace relpose;
using namespace relpose::testing;

template<class T>
class LieGroupTest : public ::testing::Test
{
};

template<int N>
struct Dim
{
  static constexpr int value = N;
};

using Dims = ::testing::Types<Dim<2>, Dim<3>>;
TYPED_TEST_SUITE(LieGroupTest, Dims);

TYPED_TEST(LieGroupTest, ExpOfZeroIsIdentity)
{
  constexpr int N = TypeParam::value;
  EXPECT_TRUE(expMap<N>(Tangent<N>::Zero()).isApprox(Pose<N>::Identity(), 0.0));
}

TYPED_TEST(LieGroupTest, ExpMatchesMatrixSeries)
{
  constexpr int N = TypeParam::value;
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) {
    Tangent<N> v = randomTangent<N>(rng);
    if (v.norm() > 2.0) {
      v *= 2.0 / v.norm();
    }
    const Eigen::MatrixXd series = seriesExp(wedge<N>(v));
    EXPECT_LT((expMap<N>(v).matrix() - series).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TYPED_TEST(LieGroupTest, ExpOfNegativeIsInverse)
{
  constexpr int N = TypeParam::value;
  std::mt19937_64 rng(2);
  for (int i = 0; i < 50; ++i) {
    const Tangent<N> v = randomTangent<N>(rng);
    EXPECT_TRUE(expMap<N>(-v).isApprox(expMap<N>(v).inverse(), 1e-12));
  }
}

TYPED_TEST(LieGroupTest, ExpProducesProperRotations)
{
  constexpr int N = TypeParam::value;
  std::mt19937_64 rng(3);
  for (int i = 0; i < 50; ++i) {
    const auto c = expMap<N>(randomTangent<N>(rng, 3.0)).rotation();
    EXPECT_LT((c.transpose() * c - RotationMatrix<N>::Identity()).norm(), 1e-12);
    EXPECT_NEAR(c.determinant(), 1.0, 1e-12);
  }
}

TYPED_TEST(LieGroupTest, LogRoundTrip)
{
  constexpr int N = TypeParam::value;
  std::mt19937_64 rng(4);
  EXPECT_LT(logMap<N>(Pose<N>::Identity()).norm(), 1e-15);
  for (int i = 0; i < 100; ++i) {
    const Pose<N> t = randomPose<N>(rng, std::numbers::pi - 0.1);
    const Tangent<N> v = logMap<N>(t);
    EXPECT_TRUE(expMap<N>(v).isApprox(t, 1e-9));
    EXPECT_LT((logMap<N>(expMap<N>(v)) - v).norm(), 1e-9);
  }
}

TYPED_TEST(LieGroupTest, SmallAngleBranchIsContinuous)
{
  constexpr int N = TypeParam::value;
  std::mt19937_64 rng(5);
  for (const double scale : {1e-9, 1e-7, 1e-6, 2e-6}) {
    Tangent<N> v = randomTangent<N>(rng);
    constexpr int r = kDof<N> - N;
    v.template head<r>() *= scale / v.template head<r>().norm();
    const Eigen::MatrixXd series = seriesExp(wedge<N>(v));
    EXPECT_LT((expMap<N>(v).matrix() - series).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((logMap<N>(expMap<N>(v)) - v).norm(), 1e-12);
  }
}

TYPED_TEST(LieGroupTest, LogNearPiThrows)
{
  constexpr int N = TypeParam::value;
  Tangent<N> v = Tangent<N>::Zero();
  v(kDof<N> - N - 1) = std::numbers::pi - 1e-8;
  EXPECT_THROW(logMap<N>(expMap<N>(v)), SingularRotationError);
}

TYPED_TEST(LieGroupTest, AdjointDefiningIdentity)
{
  constexpr int N = TypeParam::value;
  std::mt19937_64 rng(6);
  EXPECT_LT((adjoint<N>(Pose<N>::Identity()) - TangentMatrix<N>::Identity()).norm(), 1e-15);
  for (int i = 0; i < 100; ++i) {
    const Pose<N> t = randomPose<N>(rng);
    const Tangent<N> v = randomTangent<N>(rng);
    const Pose<N> lhs = expMap<N>(adjoint<N>(t) * v);
    const Pose<N> rhs = t * expMap<N>(v) * t.inverse();
    EXPECT_TRUE(lhs.isApprox(rhs, 1e-9));
  }
}

TYPED_TEST(LieGroupTest, AdjointIsHomomorphism)
{
  constexpr int N = TypeParam::value;
  std::mt19937_64 rng(7);
  for (int i = 0; i < 50; ++i) {
    const Pose<N> a = randomPose<N>(rng);
    const Pose<N> b = randomPose<N>(rng);
    EXPECT_LT((adjoint<N>(a * b) - adjoint<N>(a) * adjoint<N>(b)).norm(), 1e-9);
  }
}

TYPED_TEST(LieGroupTest, OdotDefiningIdentity)
{
  constexpr int N = TypeParam::value;
  std::mt19937_64 rng(8);
  for (int i = 0; i < 100; ++i) {
    HomogeneousPoint<N> h;
    h.template head<N>() = randomVector(rng, N, 2.0);
    h(N) = 1.0;
    const Tangent<N> v = randomTangent<N>(rng);
    EXPECT_LT((odot<N>(h) * v - wedge<N>(v) * h).norm(), 1e-12);
    EXPECT_LT((odot<N>(h) * (2.5 * v) - 2.5 * (odot<N>(h) * v)).norm(), 1e-12);
  }
}

TYPED_TEST(LieGroupTest, OdotAtOriginHasNoRotationalPart)
{
  constexpr int N = TypeParam::value;
  HomogeneousPoint<N> h = HomogeneousPoint<N>::Zero();
  h(N) = 1.0;
  const auto m = odot<N>(h);
  constexpr int r = kDof<N> - N;
  EXPECT_EQ(m.template leftCols<r>().norm(), 0.0);
}

TYPED_TEST(LieGroupTest, OdotRejectsNonHomogeneousPoint)
{
  constexpr int N = TypeParam::value;
  HomogeneousPoint<N> h = HomogeneousPoint<N>::Zero();
  h(N) = 2.0;
  EXPECT_THROW(odot<N>(h), std::invalid_argument);
}

TYPED_TEST(LieGroupTest, GroupAxioms)
{
  constexpr int N = TypeParam::value;
  std::mt19937_64 rng(9);
  for (int i = 0; i < 50; ++i) {
    const Pose<N> a = randomPose<N>(rng);
    const Pose<N> b = randomPose<N>(rng);
    const Pose<N> c = randomPose<N>(rng);
    EXPECT_TRUE(((a * b) * c).isApprox(a * (b * c), 1e-9));
    EXPECT_TRUE((a * Pose<N>::Identity()).isApprox(a, 1e-15));
    EXPECT_TRUE((a * a.inverse()).isApprox(Pose<N>::Identity(), 1e-9));
  }
}

TYPED_TEST(LieGroupTest, RightJacobianMatchesFiniteDifference)
{
  constexpr int N = TypeParam::value;
  std::mt19937_64 rng(10);
  for (int i = 0; i < 20; ++i) {
    const Tangent<N> v = randomTangent<N>(rng, 0.8);
    const TangentMatrix<N> jr = rightJacobian<N>(v);
    TangentMatrix<N> fd;
    const double h = 1e-6;
    for (int k = 0; k < kDof<N>; ++k) {
      Tangent<N> e = Tangent<N>::Zero();
      e(k) = h;
      const Tangent<N> plus = logMap<N>(expMap<N>(v).inverse() * expMap<N>(v + e));
      const Tangent<N> minus = logMap<N>(expMap<N>(v).inverse() * expMap<N>(v - e));
      fd.col(k) = (plus - minus) / (2.0 * h);
    }
    EXPECT_LT(relativeError(jr, fd), 1e-7);
  }
}

TEST(LieGroup, FromMatrixValidates)
{
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  EXPECT_NO_THROW(Pose3::fromMatrix(m));
  m(0, 0) = -1.0;
  EXPECT_THROW(Pose3::fromMatrix(m), std::invalid_argument);
  m = Eigen::Matrix4d::Identity();
  m(0, 1) = 0.1;
  EXPECT_THROW(Pose3::fromMatrix(m), std::invalid_argument);
}

TEST(LieGroup, DynamicWedgeVeeSizes)
{
  EXPECT_EQ(wedge(Eigen::VectorXd::Zero(3)).rows(), 3);
  EXPECT_EQ(wedge(Eigen::VectorXd::Zero(6)).rows(), 4);
  EXPECT_THROW(wedge(Eigen::VectorXd::Zero(5)), std::invalid_argument);
  EXPECT_THROW(vee(Eigen::MatrixXd::Zero(2, 2)), std::invalid_argument);
  const Tangent<3> v = (Tangent<3>() << 0.1, -0.2, 0.3, 1, 2, 3).finished();
  EXPECT_LT((vee(wedge(Eigen::VectorXd(v))) - v).norm(), 1e-15);
}

TEST(LieGroup, PlanarLogHandlesAllQuadrants)
{
  for (const double th : {-3.0, -2.0, -0.5, 0.5, 2.0, 3.0}) {
    const Tangent<2> v(th, 0.3, -0.4);
    EXPECT_NEAR(logMap<2>(expMap<2>(v))(0), th, 1e-12);
  }
}
