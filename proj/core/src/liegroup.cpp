#include "relpose/liegroup.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace relpose {

namespace {

constexpr double kSmallAngle = 1e-6;
constexpr double kLogSingularMargin = 1e-6;
constexpr double kAlgebraTol = 1e-9;
// below this the cancelling coefficients switch to series
constexpr double kSeriesAngle = 1e-2;

// 1 - cos(theta) without cancellation
double oneMinusCos(double theta)
{
  const double s = std::sin(0.5 * theta);
  return 2.0 * s * s;
}

Eigen::Vector3d veeSkew(const Eigen::Matrix3d& m)
{
  return Eigen::Vector3d(m(2, 1), m(0, 2), m(1, 0));
}

Eigen::Matrix3d so3Exp(const Eigen::Vector3d& phi)
{
  const double theta = phi.norm();
  const Eigen::Matrix3d k = skew(phi);
  if (theta < kSmallAngle) {
    return Eigen::Matrix3d::Identity() + k + 0.5 * k * k;
  }
  const Eigen::Vector3d axis = phi / theta;
  return std::cos(theta) * Eigen::Matrix3d::Identity() +
         oneMinusCos(theta) * axis * axis.transpose() + std::sin(theta) * skew(axis);
}

Eigen::Matrix3d so3LeftJacobian(const Eigen::Vector3d& phi)
{
  const double theta = phi.norm();
  const Eigen::Matrix3d k = skew(phi);
  if (theta < kSmallAngle) {
    return Eigen::Matrix3d::Identity() + 0.5 * k + (1.0 / 6.0) * k * k;
  }
  const double t2 = theta * theta;
  const double c3 = theta < kSeriesAngle ? 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0
                                         : (theta - std::sin(theta)) / (t2 * theta);
  return Eigen::Matrix3d::Identity() + (oneMinusCos(theta) / t2) * k + c3 * k * k;
}

Eigen::Matrix3d so3LeftJacobianInverse(const Eigen::Vector3d& phi)
{
  const double theta = phi.norm();
  const Eigen::Matrix3d k = skew(phi);
  if (theta < kSmallAngle) {
    return Eigen::Matrix3d::Identity() - 0.5 * k + (1.0 / 12.0) * k * k;
  }
  const double t2 = theta * theta;
  const double coeff = theta < kSeriesAngle
                           ? 1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0
                           : 1.0 / t2 - (1.0 + std::cos(theta)) / (2.0 * theta * std::sin(theta));
  return Eigen::Matrix3d::Identity() - 0.5 * k + coeff * k * k;
}

// V(theta) such that exp([theta; rho]) has translation V rho.
Eigen::Matrix2d se2V(double theta)
{
  double s;
  double c;
  if (std::abs(theta) < kSmallAngle) {
    s = 1.0 - theta * theta / 6.0;
    c = 0.5 * theta - theta * theta * theta / 24.0;
  } else {
    s = std::sin(theta) / theta;
    c = oneMinusCos(theta) / theta;
  }
  Eigen::Matrix2d v;
  v << s, -c, c, s;
  return v;
}

template<int N>
void requireFinite(const Tangent<N>& v)
{
  if (!v.allFinite()) {
    throw std::invalid_argument("expMap: non-finite tangent vector");
  }
}

}  // namespace

Eigen::Matrix3d skew(const Eigen::Vector3d& v)
{
  Eigen::Matrix3d m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

Eigen::Matrix2d planarRotation(double theta)
{
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  Eigen::Matrix2d r;
  r << c, -s, s, c;
  return r;
}

template<int N>
Pose<N> Pose<N>::fromMatrix(const AlgebraMatrix<N>& homogeneous, double tol)
{
  const RotationMatrix<N> c = homogeneous.template topLeftCorner<N, N>();
  if (!homogeneous.allFinite()) {
    throw std::invalid_argument("Pose: non-finite matrix");
  }
  if ((c * c.transpose() - RotationMatrix<N>::Identity()).cwiseAbs().maxCoeff() > tol) {
    throw std::invalid_argument("Pose: rotation block is not orthonormal");
  }
  if (std::abs(c.determinant() - 1.0) > tol) {
    throw std::invalid_argument("Pose: rotation determinant is not +1");
  }
  const auto bottom = homogeneous.template bottomRows<1>();
  for (int i = 0; i < N; ++i) {
    if (std::abs(bottom(0, i)) > tol) {
      throw std::invalid_argument("Pose: bottom row must be [0 ... 0 1]");
    }
  }
  if (std::abs(bottom(0, N) - 1.0) > tol) {
    throw std::invalid_argument("Pose: bottom row must be [0 ... 0 1]");
  }
  return Pose<N>(c, homogeneous.template topRightCorner<N, 1>());
}

template class Pose<2>;
template class Pose<3>;

template<>
AlgebraMatrix<2> wedge<2>(const Tangent<2>& v)
{
  AlgebraMatrix<2> m = AlgebraMatrix<2>::Zero();
  m(0, 1) = -v(0);
  m(1, 0) = v(0);
  m(0, 2) = v(1);
  m(1, 2) = v(2);
  return m;
}

template<>
AlgebraMatrix<3> wedge<3>(const Tangent<3>& v)
{
  AlgebraMatrix<3> m = AlgebraMatrix<3>::Zero();
  m.topLeftCorner<3, 3>() = skew(v.head<3>());
  m.topRightCorner<3, 1>() = v.tail<3>();
  return m;
}

template<int N>
Tangent<N> vee(const AlgebraMatrix<N>& m)
{
  const RotationMatrix<N> block = m.template topLeftCorner<N, N>();
  if ((block + block.transpose()).cwiseAbs().maxCoeff() > kAlgebraTol ||
      m.template bottomRows<1>().cwiseAbs().maxCoeff() > kAlgebraTol) {
    throw std::invalid_argument("vee: matrix is not in the Lie algebra");
  }
  Tangent<N> v;
  if constexpr (N == 2) {
    v << m(1, 0), m(0, 2), m(1, 2);
  } else {
    v.template head<3>() = veeSkew(block);
    v.template tail<3>() = m.template topRightCorner<3, 1>();
  }
  return v;
}

template<>
Pose<2> expMap<2>(const Tangent<2>& v)
{
  requireFinite<2>(v);
  return Pose<2>(planarRotation(v(0)), se2V(v(0)) * v.tail<2>());
}

template<>
Pose<3> expMap<3>(const Tangent<3>& v)
{
  requireFinite<3>(v);
  const Eigen::Vector3d phi = v.head<3>();
  return Pose<3>(so3Exp(phi), so3LeftJacobian(phi) * v.tail<3>());
}

template<>
Tangent<2> logMap<2>(const Pose<2>& t)
{
  const double theta = std::atan2(t.rotation()(1, 0), t.rotation()(0, 0));
  if (std::abs(theta) >= std::numbers::pi - kLogSingularMargin) {
    throw SingularRotationError("logMap: rotation angle at or near pi");
  }
  Tangent<2> v;
  v(0) = theta;
  v.tail<2>() = se2V(theta).inverse() * t.translation();
  return v;
}

template<>
Tangent<3> logMap<3>(const Pose<3>& t)
{
  const Eigen::Matrix3d& c = t.rotation();
  const Eigen::Vector3d w = 0.5 * veeSkew(c - c.transpose());
  const double sinTheta = w.norm();
  const double cosTheta = 0.5 * (c.trace() - 1.0);
  const double theta = std::atan2(sinTheta, cosTheta);
  if (theta >= std::numbers::pi - kLogSingularMargin) {
    throw SingularRotationError("logMap: rotation angle at or near pi");
  }
  Eigen::Vector3d phi;
  if (theta < kSmallAngle) {
    phi = w * (1.0 + theta * theta / 6.0);
  } else {
    phi = (theta / sinTheta) * w;
  }
  Tangent<3> v;
  v.head<3>() = phi;
  v.tail<3>() = so3LeftJacobianInverse(phi) * t.translation();
  return v;
}

template<>
TangentMatrix<2> adjoint<2>(const Pose<2>& t)
{
  TangentMatrix<2> ad = TangentMatrix<2>::Zero();
  ad(0, 0) = 1.0;
  ad(1, 0) = t.translation()(1);
  ad(2, 0) = -t.translation()(0);
  ad.bottomRightCorner<2, 2>() = t.rotation();
  return ad;
}

template<>
TangentMatrix<3> adjoint<3>(const Pose<3>& t)
{
  TangentMatrix<3> ad = TangentMatrix<3>::Zero();
  ad.topLeftCorner<3, 3>() = t.rotation();
  ad.bottomLeftCorner<3, 3>() = skew(t.translation()) * t.rotation();
  ad.bottomRightCorner<3, 3>() = t.rotation();
  return ad;
}

template<>
TangentMatrix<2> adjointAlgebra<2>(const Tangent<2>& v)
{
  TangentMatrix<2> ad = TangentMatrix<2>::Zero();
  ad(1, 0) = v(2);
  ad(2, 0) = -v(1);
  ad(1, 2) = -v(0);
  ad(2, 1) = v(0);
  return ad;
}

template<>
TangentMatrix<3> adjointAlgebra<3>(const Tangent<3>& v)
{
  TangentMatrix<3> ad = TangentMatrix<3>::Zero();
  const Eigen::Matrix3d phiSkew = skew(v.head<3>());
  ad.topLeftCorner<3, 3>() = phiSkew;
  ad.bottomLeftCorner<3, 3>() = skew(v.tail<3>());
  ad.bottomRightCorner<3, 3>() = phiSkew;
  return ad;
}

template<int N>
OdotMatrix<N> odot(const HomogeneousPoint<N>& h)
{
  if (std::abs(h(N) - 1.0) > 1e-12) {
    throw std::invalid_argument("odot: homogeneous point must have last component 1");
  }
  OdotMatrix<N> m = OdotMatrix<N>::Zero();
  if constexpr (N == 2) {
    m(0, 0) = -h(1);
    m(1, 0) = h(0);
    m.template block<2, 2>(0, 1).setIdentity();
  } else {
    m.template block<3, 3>(0, 0) = -skew(h.template head<3>());
    m.template block<3, 3>(0, 3).setIdentity();
  }
  return m;
}

template<int N>
TangentMatrix<N> rightJacobian(const Tangent<N>& v)
{
  // J_r(v) = sum_k (-ad v)^k / (k+1)!
  const TangentMatrix<N> a = -adjointAlgebra<N>(v);
  TangentMatrix<N> term = TangentMatrix<N>::Identity();
  TangentMatrix<N> sum = term;
  for (int k = 1; k < 60; ++k) {
    term = (term * a) / static_cast<double>(k + 1);
    sum += term;
    if (term.cwiseAbs().maxCoeff() < 1e-18) {
      break;
    }
  }
  return sum;
}

template<>
double rotationAngle<2>(const RotationMatrix<2>& c)
{
  return std::abs(std::atan2(c(1, 0), c(0, 0)));
}

template<>
double rotationAngle<3>(const RotationMatrix<3>& c)
{
  const double sinTheta = 0.5 * veeSkew(c - c.transpose()).norm();
  const double cosTheta = 0.5 * (c.trace() - 1.0);
  return std::atan2(sinTheta, cosTheta);
}

Eigen::MatrixXd wedge(const Eigen::VectorXd& v)
{
  if (v.size() == kDof<2>) {
    return wedge<2>(Tangent<2>(v));
  }
  if (v.size() == kDof<3>) {
    return wedge<3>(Tangent<3>(v));
  }
  throw std::invalid_argument("wedge: tangent length must be 3 (SE(2)) or 6 (SE(3))");
}

Eigen::VectorXd vee(const Eigen::MatrixXd& m)
{
  if (m.rows() == 3 && m.cols() == 3) {
    return vee<2>(AlgebraMatrix<2>(m));
  }
  if (m.rows() == 4 && m.cols() == 4) {
    return vee<3>(AlgebraMatrix<3>(m));
  }
  throw std::invalid_argument("vee: matrix must be 3x3 (se(2)) or 4x4 (se(3))");
}

template Tangent<2> vee<2>(const AlgebraMatrix<2>&);
template Tangent<3> vee<3>(const AlgebraMatrix<3>&);
template OdotMatrix<2> odot<2>(const HomogeneousPoint<2>&);
template OdotMatrix<3> odot<3>(const HomogeneousPoint<3>&);
template TangentMatrix<2> rightJacobian<2>(const Tangent<2>&);
template TangentMatrix<3> rightJacobian<3>(const Tangent<3>&);

}  // namespace relpose
