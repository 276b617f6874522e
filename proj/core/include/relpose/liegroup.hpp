#pragma once

#include <Eigen/Core>
#include <Eigen/Dense>

#include "relpose/errors.hpp"

namespace relpose {

/**
 * SE(n) primitives for n in {2, 3}.
 *
 * Tangent ordering is [angular; translational] everywhere:
 *   SE(2): [theta; rho_x; rho_y]
 *   SE(3): [phi_x; phi_y; phi_z; rho_x; rho_y; rho_z]
 *
 * Homogeneous form
 * ----------------
 * [ C r ]
 * [ 0 1 ]
 */
template<int N>
struct GroupTraits;

template<>
struct GroupTraits<2>
{
  static constexpr int Dof = 3;
  static constexpr int RotDof = 1;
};

template<>
struct GroupTraits<3>
{
  static constexpr int Dof = 6;
  static constexpr int RotDof = 3;
};

template<int N>
inline constexpr int kDof = GroupTraits<N>::Dof;

template<int N>
using Tangent = Eigen::Matrix<double, kDof<N>, 1>;
template<int N>
using TangentMatrix = Eigen::Matrix<double, kDof<N>, kDof<N>>;
template<int N>
using AlgebraMatrix = Eigen::Matrix<double, N + 1, N + 1>;
template<int N>
using HomogeneousPoint = Eigen::Matrix<double, N + 1, 1>;
template<int N>
using OdotMatrix = Eigen::Matrix<double, N + 1, kDof<N>>;
template<int N>
using RotationMatrix = Eigen::Matrix<double, N, N>;
template<int N>
using Vector = Eigen::Matrix<double, N, 1>;

/// Element of SE(n). Rotation is kept orthonormal with det +1 by every constructor.
template<int N>
class Pose
{
public:
  Pose() : rotation_(RotationMatrix<N>::Identity()), translation_(Vector<N>::Zero()) {}
  Pose(const RotationMatrix<N>& rotation, const Vector<N>& translation)
      : rotation_(rotation), translation_(translation)
  {}

  static Pose Identity() { return Pose(); }

  /// Validates orthonormality and det(C) = +1 within `tol`; throws std::invalid_argument.
  static Pose fromMatrix(const AlgebraMatrix<N>& homogeneous, double tol = 1e-9);

  const RotationMatrix<N>& rotation() const { return rotation_; }
  const Vector<N>& translation() const { return translation_; }
  RotationMatrix<N>& rotation() { return rotation_; }
  Vector<N>& translation() { return translation_; }

  AlgebraMatrix<N> matrix() const
  {
    AlgebraMatrix<N> m = AlgebraMatrix<N>::Identity();
    m.template topLeftCorner<N, N>() = rotation_;
    m.template topRightCorner<N, 1>() = translation_;
    return m;
  }

  Pose inverse() const
  {
    RotationMatrix<N> ct = rotation_.transpose();
    return Pose(ct, -ct * translation_);
  }

  Pose operator*(const Pose& other) const
  {
    return Pose(rotation_ * other.rotation_, rotation_ * other.translation_ + translation_);
  }

  Vector<N> transformPoint(const Vector<N>& p) const { return rotation_ * p + translation_; }

  bool isApprox(const Pose& other, double tol) const
  {
    return (rotation_ - other.rotation_).cwiseAbs().maxCoeff() <= tol &&
           (translation_ - other.translation_).cwiseAbs().maxCoeff() <= tol;
  }

private:
  RotationMatrix<N> rotation_;
  Vector<N> translation_;
};

extern template class Pose<2>;
extern template class Pose<3>;

using Pose2 = Pose<2>;
using Pose3 = Pose<3>;

/// Skew-symmetric cross-product matrix of a 3-vector.
Eigen::Matrix3d skew(const Eigen::Vector3d& v);

/// Planar rotation by `theta` radians.
Eigen::Matrix2d planarRotation(double theta);

template<int N>
AlgebraMatrix<N> wedge(const Tangent<N>& v);

/// Throws std::invalid_argument when `m` is not in the Lie algebra within 1e-9.
template<int N>
Tangent<N> vee(const AlgebraMatrix<N>& m);

/// Throws std::invalid_argument on non-finite input.
template<int N>
Pose<N> expMap(const Tangent<N>& v);

/// Throws SingularRotationError when the rotation angle is >= pi - 1e-6.
template<int N>
Tangent<N> logMap(const Pose<N>& t);

/// Ad(T) with exp((Ad(T) v)^) = T exp(v^) T^-1.
template<int N>
TangentMatrix<N> adjoint(const Pose<N>& t);

/// ad(v), the algebra adjoint: [v^, w^] = (ad(v) w)^.
template<int N>
TangentMatrix<N> adjointAlgebra(const Tangent<N>& v);

/// odot(h) v = v^ h for h = [r; 1]. Throws std::invalid_argument otherwise.
template<int N>
OdotMatrix<N> odot(const HomogeneousPoint<N>& h);

/// Right Jacobian: exp((v + dv)^) ~ exp(v^) exp((J_r(v) dv)^).
template<int N>
TangentMatrix<N> rightJacobian(const Tangent<N>& v);

/// Rotation angle of a pose's rotation part, in [0, pi].
template<int N>
double rotationAngle(const RotationMatrix<N>& c);

// Runtime-dimension front ends. Tangent length 3 selects SE(2), 6 selects SE(3);
// anything else throws std::invalid_argument.
Eigen::MatrixXd wedge(const Eigen::VectorXd& v);
Eigen::VectorXd vee(const Eigen::MatrixXd& m);

template<> AlgebraMatrix<2> wedge<2>(const Tangent<2>&);
template<> AlgebraMatrix<3> wedge<3>(const Tangent<3>&);
extern template Tangent<2> vee<2>(const AlgebraMatrix<2>&);
extern template Tangent<3> vee<3>(const AlgebraMatrix<3>&);
template<> Pose<2> expMap<2>(const Tangent<2>&);
template<> Pose<3> expMap<3>(const Tangent<3>&);
template<> Tangent<2> logMap<2>(const Pose<2>&);
template<> Tangent<3> logMap<3>(const Pose<3>&);
template<> TangentMatrix<2> adjoint<2>(const Pose<2>&);
template<> TangentMatrix<3> adjoint<3>(const Pose<3>&);
template<> TangentMatrix<2> adjointAlgebra<2>(const Tangent<2>&);
template<> TangentMatrix<3> adjointAlgebra<3>(const Tangent<3>&);
extern template OdotMatrix<2> odot<2>(const HomogeneousPoint<2>&);
extern template OdotMatrix<3> odot<3>(const HomogeneousPoint<3>&);
extern template TangentMatrix<2> rightJacobian<2>(const Tangent<2>&);
extern template TangentMatrix<3> rightJacobian<3>(const Tangent<3>&);
template<> double rotationAngle<2>(const RotationMatrix<2>&);
template<> double rotationAngle<3>(const RotationMatrix<3>&);

}  // namespace relpose
