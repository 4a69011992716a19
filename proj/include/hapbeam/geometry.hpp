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

#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/LU>

#include <span>
#include <vector>

namespace hapbeam {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Axis-angle vector of a relative rotation, radians. Norm lies in [0, pi].
using RotationResidual = Eigen::Vector3d;

inline constexpr double kPi = 3.141592653589793238462643383279502884;

/// Maps an angle onto (-pi, pi].
double wrap_pi(double angle);

inline double deg2rad(double deg) { return deg * (kPi / 180.0); }
inline double rad2deg(double rad) { return rad * (180.0 / kPi); }

/// ZYX attitude: body-to-world rotation R = Rz(yaw) Ry(pitch) Rx(roll).
struct EulerZYX {
    double yaw = 0.0;
    double pitch = 0.0;
    double roll = 0.0;

    bool operator==(const EulerZYX&) const = default;
};

/// Element of SO(3). Instances built through the factory functions below
/// always satisfy R^T R = I and det R = +1 to within 1e-9.
class Rotation {
public:
    Rotation() : m_(Mat3::Identity()) {}

    /// Validating constructor; throws invalid-argument if `m` is not a proper rotation.
    static Rotation from_matrix(const Mat3& m);

    const Mat3& matrix() const { return m_; }
    Rotation transpose() const { return Rotation(m_.transpose(), Unchecked{}); }
    Rotation operator*(const Rotation& rhs) const { return Rotation(m_ * rhs.m_, Unchecked{}); }
    Vec3 operator*(const Vec3& v) const { return m_ * v; }

private:
    struct Unchecked {};
    Rotation(const Mat3& m, Unchecked) : m_(m) {}

    friend Rotation rotation_x(double);
    friend Rotation rotation_y(double);
    friend Rotation rotation_z(double);
    friend Rotation so3_exp(const Vec3&);

    Mat3 m_;
};

Rotation rotation_x(double angle);
Rotation rotation_y(double angle);
Rotation rotation_z(double angle);

Rotation euler_to_rotation(const EulerZYX& a);

/// Inverse of euler_to_rotation. Throws degenerate-attitude when |R31| > 1 - 1e-9.
EulerZYX rotation_to_euler(const Rotation& r);

Mat3 hat(const Vec3& w);
Vec3 vee(const Mat3& skew);

/// Rodrigues exponential of hat(w).
Rotation so3_exp(const Vec3& w);

/// vee(log(r_hat^T r)). Throws AmbiguousAxisError when the relative angle is
/// within 1e-9 of pi.
RotationResidual rotation_log_vee(const Rotation& r_hat, const Rotation& r);

/// Geodesic angle between two rotations, valid over the full [0, pi] range.
double rotation_angle(const Rotation& r_hat, const Rotation& r);

/// Body-frame steering angles: theta = arccos(u_z) in [0, pi], phi = atan2(u_y, u_x) in (-pi, pi].
struct SteeringAngles {
    double theta = 0.0;
    double phi = 0.0;
};

/// Angles of a unit vector. atan2(0, 0) is defined as 0.
SteeringAngles direction_to_angles(const Vec3& u);
Vec3 angles_to_direction(const SteeringAngles& a);

/// u = R(a)^T e, returned as steering angles.
SteeringAngles los_to_body_angles(const Vec3& los, const EulerZYX& a);

/// Fixed LoS geometry between the platform and ground users.
struct WorldGeometry {
    Vec3 hap;
    std::vector<Vec3> users;
    std::vector<Vec3> los;         // unit vectors from the platform to each user
    std::vector<double> distance;  // meters

    int size() const { return static_cast<int>(users.size()); }
};

/// Builds geometry and validates that every user lies strictly below the platform.
WorldGeometry make_world_geometry(const Vec3& hap, std::span<const Vec3> users);

}  // namespace hapbeam
