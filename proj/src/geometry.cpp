// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "hapbeam/geometry.hpp"

#include "hapbeam/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hapbeam {

namespace {

constexpr double kOrthoTol = 1e-9;
constexpr double kGimbalTol = 1e-9;
constexpr double kSmallAngle = 1e-6;
constexpr double kPiAmbiguity = 1e-9;

bool finite(const EulerZYX& a) {
    return std::isfinite(a.yaw) && std::isfinite(a.pitch) && std::isfinite(a.roll);
}

}  // namespace

double wrap_pi(double angle) {
    double w = std::remainder(angle, 2.0 * kPi);  // [-pi, pi]
    if (w <= -kPi) w += 2.0 * kPi;
    return w;
}

Rotation Rotation::from_matrix(const Mat3& m) {
    if (!m.allFinite()) fail(ErrorKind::invalid_argument, "rotation matrix has non-finite entries");
    const double ortho = (m.transpose() * m - Mat3::Identity()).norm();
    const double det = m.determinant();
    if (ortho > kOrthoTol || std::abs(det - 1.0) > kOrthoTol) {
        std::ostringstream os;
        os << "matrix is not in SO(3): |R^T R - I|_F = " << ortho << ", det = " << det;
        fail(ErrorKind::invalid_argument, os.str());
    }
    return Rotation(m, Unchecked{});
}

Rotation rotation_x(double a) {
    const double c = std::cos(a), s = std::sin(a);
    Mat3 m;
    m << 1, 0, 0, 0, c, -s, 0, s, c;
    return Rotation(m, Rotation::Unchecked{});
}

Rotation rotation_y(double a) {
    const double c = std::cos(a), s = std::sin(a);
    Mat3 m;
    m << c, 0, s, 0, 1, 0, -s, 0, c;
    return Rotation(m, Rotation::Unchecked{});
}

Rotation rotation_z(double a) {
    const double c = std::cos(a), s = std::sin(a);
    Mat3 m;
    m << c, -s, 0, s, c, 0, 0, 0, 1;
    return Rotation(m, Rotation::Unchecked{});
}

Rotation euler_to_rotation(const EulerZYX& a) {
    if (!finite(a)) fail(ErrorKind::invalid_argument, "non-finite Euler angles");
    return rotation_z(a.yaw) * rotation_y(a.pitch) * rotation_x(a.roll);
}

EulerZYX rotation_to_euler(const Rotation& rot) {
    const Mat3& r = rot.matrix();
    if (std::abs(r(2, 0)) > 1.0 - kGimbalTol) {
        std::ostringstream os;
        os << "attitude at gimbal lock (R31 = " << r(2, 0) << ")";
        fail(ErrorKind::degenerate_attitude, os.str());
    }
    EulerZYX a;
    a.pitch = std::asin(-r(2, 0));
    a.yaw = wrap_pi(std::atan2(r(1, 0), r(0, 0)));
    a.roll = wrap_pi(std::atan2(r(2, 1), r(2, 2)));
    return a;
}

Mat3 hat(const Vec3& w) {
    Mat3 m;
    m << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
    return m;
}

Vec3 vee(const Mat3& s) { return Vec3(s(2, 1), s(0, 2), s(1, 0)); }

Rotation so3_exp(const Vec3& w) {
    const double theta = w.norm();
    const Mat3 k = hat(w);
    double a, b;  // sin(t)/t, (1 - cos(t))/t^2
    if (theta < 1e-4) {
        const double t2 = theta * theta;
        a = 1.0 - t2 / 6.0 + t2 * t2 / 120.0;
        b = 0.5 - t2 / 24.0 + t2 * t2 / 720.0;
    } else {
        a = std::sin(theta) / theta;
        b = (1.0 - std::cos(theta)) / (theta * theta);
    }
    return Rotation(Mat3::Identity() + a * k + b * k * k, Rotation::Unchecked{});
}

namespace {

// Angle from atan2 of the skew and trace parts; accurate across [0, pi].
double relative_angle(const Mat3& m) {
    const double s = 0.5 * vee(m - m.transpose()).norm();
    const double c = 0.5 * (m.trace() - 1.0);
    return std::atan2(s, c);
}

}  // namespace

double rotation_angle(const Rotation& r_hat, const Rotation& r) {
    return relative_angle(r_hat.matrix().transpose() * r.matrix());
}

RotationResidual rotation_log_vee(const Rotation& r_hat, const Rotation& r) {
    const Mat3 m = r_hat.matrix().transpose() * r.matrix();
    const Vec3 skew = 0.5 * vee(m - m.transpose());  // sin(theta) * axis
    const double theta = relative_angle(m);

    if (theta < kSmallAngle) {
        // theta / sin(theta) = 1 + theta^2/6 + O(theta^4)
        return skew * (1.0 + theta * theta / 6.0);
    }
    if (kPi - theta < kPiAmbiguity) throw AmbiguousAxisError(theta);

    if (theta > kPi - 0.1) {
        // Skew part is tiny here; recover the axis from the symmetric part,
        // (M + M^T)/2 = cos(t) I + (1 - cos(t)) n n^T.
        const double c = std::cos(theta);
        const Mat3 outer = (0.5 * (m + m.transpose()) - c * Mat3::Identity()) / (1.0 - c);
        int col = 0;
        outer.diagonal().maxCoeff(&col);
        Vec3 axis = outer.col(col) / std::sqrt(outer(col, col));
        axis.normalize();
        if (axis.dot(skew) < 0.0) axis = -axis;
        return theta * axis;
    }
    return skew * (theta / std::sin(theta));
}

SteeringAngles direction_to_angles(const Vec3& u) {
    SteeringAngles a;
    a.theta = std::acos(std::clamp(u.z(), -1.0, 1.0));
    if (u.x() == 0.0 && u.y() == 0.0) {
        a.phi = 0.0;
    } else {
        a.phi = std::atan2(u.y(), u.x());
        if (a.phi <= -kPi) a.phi = kPi;
    }
    return a;
}

Vec3 angles_to_direction(const SteeringAngles& a) {
    const double st = std::sin(a.theta);
    return Vec3(st * std::cos(a.phi), st * std::sin(a.phi), std::cos(a.theta));
}

SteeringAngles los_to_body_angles(const Vec3& los, const EulerZYX& a) {
    if (!los.allFinite() || std::abs(los.norm() - 1.0) > 1e-9)
        fail(ErrorKind::invalid_argument, "LoS direction must be a unit vector");
    const Vec3 u = euler_to_rotation(a).matrix().transpose() * los;
    return direction_to_angles(u);
}

WorldGeometry make_world_geometry(const Vec3& hap, std::span<const Vec3> users) {
    if (!hap.allFinite()) fail(ErrorKind::invalid_argument, "platform position is not finite");
    WorldGeometry g;
    g.hap = hap;
    g.users.assign(users.begin(), users.end());
    for (std::size_t k = 0; k < users.size(); ++k) {
        const Vec3 diff = users[k] - hap;
        const double d = diff.norm();
        if (!(d > 0.0) || !std::isfinite(d))
            fail(ErrorKind::invalid_argument, "user " + std::to_string(k) + " coincides with the platform");
        const Vec3 e = diff / d;
        if (!(e.z() < 0.0))
            fail(ErrorKind::invalid_argument, "user " + std::to_string(k) + " is not below the platform");
        g.los.push_back(e);
        g.distance.push_back(d);
    }
    return g;
}

}  // namespace hapbeam
