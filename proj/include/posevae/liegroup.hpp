/// @file
/// Rigid-body geometry on SO(3) and SE(3).
///
/// Twists are stored as 6-vectors (rho, omega): translational part first,
/// rotational part last. The exponential map is
///
///   exp(rho, omega) = (Exp(omega), V(omega) * rho)
///
/// where V is the left Jacobian of SO(3). All arithmetic is in double
/// precision; all functions are pure.
#pragma once

#include <Eigen/Core>

namespace posevae {

using Vector6d = Eigen::Matrix<double, 6, 1>;
using Matrix6d = Eigen::Matrix<double, 6, 6>;

/// Element of se(3), ordered (rho, omega).
using Twist = Vector6d;

/// Two 3-vectors (a1, a2) concatenated; mapped onto SO(3) by Gram-Schmidt.
using Rotation6D = Vector6d;

/// Rigid transform x -> R x + t.
struct Pose {
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();

  static Pose identity() { return {}; }
  static Pose from_translation(const Eigen::Vector3d& t) {
    return {Eigen::Matrix3d::Identity(), t};
  }

  Eigen::Vector3d operator*(const Eigen::Vector3d& p) const { return R * p + t; }
};

/// Below this rotation angle, Taylor expansions replace the closed forms.
inline constexpr double kSmallAngle = 1e-4;
/// Logarithms of rotations closer than this to pi are rejected.
inline constexpr double kPiMargin = 1e-6;

Eigen::Matrix3d hat(const Eigen::Vector3d& v);
Eigen::Vector3d vee(const Eigen::Matrix3d& m);

Eigen::Matrix3d so3_exp(const Eigen::Vector3d& omega);
/// Throws SingularityError when the angle is within kPiMargin of pi.
Eigen::Vector3d so3_log(const Eigen::Matrix3d& R);
/// V(omega); maps rho to the translation of exp(rho, omega).
Eigen::Matrix3d so3_left_jacobian(const Eigen::Vector3d& omega);
Eigen::Matrix3d so3_left_jacobian_inverse(const Eigen::Vector3d& omega);

Pose se3_exp(const Twist& xi);
Twist se3_log(const Pose& T);

/// Inverse of the SE(3) left Jacobian: log(exp(d) exp(xi)) = xi + J^-1 d + O(d^2).
Matrix6d se3_left_jacobian_inverse(const Twist& xi);

Pose compose(const Pose& a, const Pose& b);
Pose inverse(const Pose& a);
inline Pose operator*(const Pose& a, const Pose& b) { return compose(a, b); }

/// xi = log(predicted^-1 * target), so that predicted * exp(xi) = target.
Twist pose_error(const Pose& predicted, const Pose& target);

/// Euclidean gradients of a scalar f(pose_error(predicted, target)) with
/// respect to the entries of `predicted`, given df/dxi. The rotation gradient
/// is exact along tangent directions R * hat(w), which is all that matters
/// when R is produced by rot_from_6d.
struct PoseGradient {
  Eigen::Vector3d t;
  Eigen::Matrix3d R;
};
PoseGradient pose_error_vjp(const Pose& predicted, const Twist& xi, const Twist& grad_xi);

/// Angle of a rotation in radians, in [0, pi].
double rotation_angle(const Eigen::Matrix3d& R);
double rotation_angle_deg(const Eigen::Matrix3d& R);

/// Gram-Schmidt map: first column a1/|a1|, second column the normalized
/// component of a2 orthogonal to it, third their cross product.
/// Throws DegenerateInputError for |a1| < 1e-12 or parallel columns.
Eigen::Matrix3d rot_from_6d(const Rotation6D& v);
/// First two columns of R.
Rotation6D rot_to_6d(const Eigen::Matrix3d& R);
/// Vector-Jacobian product of rot_from_6d: gradient w.r.t. v given dF/dR.
Rotation6D rot_from_6d_vjp(const Rotation6D& v, const Eigen::Matrix3d& grad_R);

/// Frobenius norm of R^T R - I.
double orthonormality_defect(const Eigen::Matrix3d& R);

}  // namespace posevae
