#include "posevae/liegroup.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Geometry>

#include "posevae/errors.hpp"

namespace posevae {
namespace {

// Coefficients of the SO(3) exponential and its Jacobians:
//   a = sin(t)/t,  b = (1 - cos t)/t^2,  c = (t - sin t)/t^3,
//   d = (1 - a/(2b))/t^2   (so that V^-1 = I - W/2 + d W^2).
struct So3Coefficients {
  double a, b, c, d;
};

So3Coefficients so3_coefficients(double theta) {
  const double t2 = theta * theta;
  if (theta < kSmallAngle) {
    const double t4 = t2 * t2;
    return {1.0 - t2 / 6.0 + t4 / 120.0,
            0.5 - t2 / 24.0 + t4 / 720.0,
            1.0 / 6.0 - t2 / 120.0 + t4 / 5040.0,
            1.0 / 12.0 + t2 / 720.0 + t4 / 30240.0};
  }
  const double s = std::sin(theta);
  const double half_s = std::sin(0.5 * theta);
  const double a = s / theta;
  const double b = 2.0 * half_s * half_s / t2;
  const double c = (theta - s) / (t2 * theta);
  const double d = (1.0 - a / (2.0 * b)) / t2;
  return {a, b, c, d};
}

}  // namespace

Eigen::Matrix3d hat(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  // clang-format off
  m <<  0.0,  -v.z(),  v.y(),
        v.z(),  0.0,  -v.x(),
       -v.y(),  v.x(),  0.0;
  // clang-format on
  return m;
}

Eigen::Vector3d vee(const Eigen::Matrix3d& m) { return {m(2, 1), m(0, 2), m(1, 0)}; }

Eigen::Matrix3d so3_exp(const Eigen::Vector3d& omega) {
  const auto k = so3_coefficients(omega.norm());
  const Eigen::Matrix3d W = hat(omega);
  return Eigen::Matrix3d::Identity() + k.a * W + k.b * W * W;
}

Eigen::Vector3d so3_log(const Eigen::Matrix3d& R) {
  const Eigen::Vector3d s_vec = 0.5 * vee(R - R.transpose());
  const double s = s_vec.norm();
  const double c = 0.5 * (R.trace() - 1.0);
  const double theta = std::atan2(s, c);
  if (theta > std::numbers::pi - kPiMargin) {
    throw SingularityError("so3_log: rotation angle within 1e-6 of pi");
  }
  if (theta < kSmallAngle) {
    const double t2 = theta * theta;
    return s_vec * (1.0 + t2 / 6.0 + 7.0 * t2 * t2 / 360.0);
  }
  return s_vec * (theta / s);
}

Eigen::Matrix3d so3_left_jacobian(const Eigen::Vector3d& omega) {
  const auto k = so3_coefficients(omega.norm());
  const Eigen::Matrix3d W = hat(omega);
  return Eigen::Matrix3d::Identity() + k.b * W + k.c * W * W;
}

Eigen::Matrix3d so3_left_jacobian_inverse(const Eigen::Vector3d& omega) {
  const auto k = so3_coefficients(omega.norm());
  const Eigen::Matrix3d W = hat(omega);
  return Eigen::Matrix3d::Identity() - 0.5 * W + k.d * W * W;
}

Pose se3_exp(const Twist& xi) {
  const Eigen::Vector3d rho = xi.head<3>();
  const Eigen::Vector3d omega = xi.tail<3>();
  const auto k = so3_coefficients(omega.norm());
  const Eigen::Matrix3d W = hat(omega);
  const Eigen::Matrix3d W2 = W * W;
  Pose T;
  T.R = Eigen::Matrix3d::Identity() + k.a * W + k.b * W2;
  T.t = (Eigen::Matrix3d::Identity() + k.b * W + k.c * W2) * rho;
  return T;
}

Twist se3_log(const Pose& T) {
  const Eigen::Vector3d omega = so3_log(T.R);
  Twist xi;
  xi.head<3>() = so3_left_jacobian_inverse(omega) * T.t;
  xi.tail<3>() = omega;
  return xi;
}

Matrix6d se3_left_jacobian_inverse(const Twist& xi) {
  const Eigen::Vector3d rho = xi.head<3>();
  const Eigen::Vector3d phi = xi.tail<3>();
  const double theta = phi.norm();

  // Coupling block Q of the SE(3) left Jacobian [[J, Q], [0, J]].
  double c1, c2, c3;
  if (theta < 1e-2) {
    const double t2 = theta * theta;
    const double t4 = t2 * t2;
    c1 = 1.0 / 6.0 - t2 / 120.0 + t4 / 5040.0;
    c2 = 1.0 / 24.0 - t2 / 720.0 + t4 / 40320.0;
    c3 = 1.0 / 120.0 - t2 / 2520.0 + t4 / 120960.0;
  } else {
    const double s = std::sin(theta);
    const double c = std::cos(theta);
    const double t2 = theta * theta;
    c1 = (theta - s) / (t2 * theta);
    c2 = (t2 + 2.0 * c - 2.0) / (2.0 * t2 * t2);
    c3 = (2.0 * theta - 3.0 * s + theta * c) / (2.0 * t2 * t2 * theta);
  }
  const Eigen::Matrix3d P = hat(rho);
  const Eigen::Matrix3d F = hat(phi);
  const Eigen::Matrix3d FP = F * P;
  const Eigen::Matrix3d PF = P * F;
  const Eigen::Matrix3d FPF = FP * F;
  const Eigen::Matrix3d FF = F * F;
  const Eigen::Matrix3d Q = 0.5 * P + c1 * (FP + PF + FPF) +
                            c2 * (FF * P + P * FF - 3.0 * FPF) +
                            c3 * (FPF * F + F * FPF);

  const Eigen::Matrix3d Jinv = so3_left_jacobian_inverse(phi);
  Matrix6d out = Matrix6d::Zero();
  out.topLeftCorner<3, 3>() = Jinv;
  out.topRightCorner<3, 3>() = -Jinv * Q * Jinv;
  out.bottomRightCorner<3, 3>() = Jinv;
  return out;
}

Pose compose(const Pose& a, const Pose& b) { return {a.R * b.R, a.R * b.t + a.t}; }

Pose inverse(const Pose& a) {
  const Eigen::Matrix3d Rt = a.R.transpose();
  return {Rt, -(Rt * a.t)};
}

Twist pose_error(const Pose& predicted, const Pose& target) {
  return se3_log(compose(inverse(predicted), target));
}

PoseGradient pose_error_vjp(const Pose& predicted, const Twist& xi, const Twist& grad_xi) {
  // Right perturbation predicted * exp(d) changes xi by -Jl^-1(xi) d.
  const Vector6d grad_d = -(se3_left_jacobian_inverse(xi).transpose() * grad_xi);
  PoseGradient g;
  g.t = predicted.R * grad_d.head<3>();
  g.R = 0.5 * predicted.R * hat(grad_d.tail<3>());
  return g;
}

double rotation_angle(const Eigen::Matrix3d& R) {
  const double s = 0.5 * vee(R - R.transpose()).norm();
  const double c = std::clamp(0.5 * (R.trace() - 1.0), -1.0, 1.0);
  return std::atan2(s, c);
}

double rotation_angle_deg(const Eigen::Matrix3d& R) {
  return rotation_angle(R) * (180.0 / std::numbers::pi);
}

Eigen::Matrix3d rot_from_6d(const Rotation6D& v) {
  const Eigen::Vector3d a1 = v.head<3>();
  const Eigen::Vector3d a2 = v.tail<3>();
  const double n1 = a1.norm();
  if (!(n1 >= 1e-12)) {
    throw DegenerateInputError("rot_from_6d: first column has near-zero norm");
  }
  const Eigen::Vector3d b1 = a1 / n1;
  const Eigen::Vector3d u2 = a2 - b1.dot(a2) * b1;
  const double n2 = u2.norm();
  if (!(n2 > 1e-12 * a2.norm()) || n2 == 0.0) {
    throw DegenerateInputError("rot_from_6d: columns are parallel");
  }
  const Eigen::Vector3d b2 = u2 / n2;
  Eigen::Matrix3d R;
  R.col(0) = b1;
  R.col(1) = b2;
  R.col(2) = b1.cross(b2);
  return R;
}

Rotation6D rot_to_6d(const Eigen::Matrix3d& R) {
  Rotation6D v;
  v.head<3>() = R.col(0);
  v.tail<3>() = R.col(1);
  return v;
}

Rotation6D rot_from_6d_vjp(const Rotation6D& v, const Eigen::Matrix3d& grad_R) {
  const Eigen::Vector3d a1 = v.head<3>();
  const Eigen::Vector3d a2 = v.tail<3>();
  const double n1 = a1.norm();
  const Eigen::Vector3d b1 = a1 / n1;
  const double s = b1.dot(a2);
  const Eigen::Vector3d u2 = a2 - s * b1;
  const double n2 = u2.norm();
  const Eigen::Vector3d b2 = u2 / n2;

  Eigen::Vector3d g1 = grad_R.col(0);
  Eigen::Vector3d g2 = grad_R.col(1);
  const Eigen::Vector3d g3 = grad_R.col(2);
  // b3 = b1 x b2
  g1 += b2.cross(g3);
  g2 += g3.cross(b1);
  // b2 = u2 / |u2|
  const Eigen::Vector3d gu2 = (g2 - b2 * b2.dot(g2)) / n2;
  // u2 = a2 - (b1 . a2) b1
  const double b1_gu2 = b1.dot(gu2);
  const Eigen::Vector3d ga2 = gu2 - b1 * b1_gu2;
  g1 -= a2 * b1_gu2 + s * gu2;
  // b1 = a1 / |a1|
  const Eigen::Vector3d ga1 = (g1 - b1 * b1.dot(g1)) / n1;

  Rotation6D out;
  out.head<3>() = ga1;
  out.tail<3>() = ga2;
  return out;
}

double orthonormality_defect(const Eigen::Matrix3d& R) {
  return (R.transpose() * R - Eigen::Matrix3d::Identity()).norm();
}

}  // namespace posevae
