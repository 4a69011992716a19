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

#include "hapbeam/geometry.hpp"

#include <Eigen/Core>

#include <complex>
#include <optional>
#include <span>
#include <vector>

namespace hapbeam {

using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using Vec2 = Eigen::Vector2d;
using Mat23 = Eigen::Matrix<double, 2, 3>;

/// Uniform planar array with Mx x My isotropic elements.
///
/// Element (m, n), m in [0, Mx), n in [0, My), is stored at flat index
/// m + Mx * n. `mounting` rotates array coordinates into the body frame; the
/// default (identity) makes the array frame coincide with the body frame.
struct ArrayConfig {
    int mx = 12;
    int my = 12;
    double dx = 0.005;         // meters
    double dy = 0.005;         // meters
    double wavelength = 0.01;  // meters
    int rf_chains = 10;
    Rotation mounting;

    int elements() const { return mx * my; }
    void validate() const;
};

CVector steering_vector(const ArrayConfig& cfg, const SteeringAngles& angles);

/// Unit direction of a world-frame LoS vector expressed in array coordinates
/// under attitude `att`.
Vec3 array_direction(const ArrayConfig& cfg, const Vec3& los, const EulerZYX& att);

/// Steering angles of a user as seen by the array under attitude `att`.
SteeringAngles beam_angles(const ArrayConfig& cfg, const Vec3& los, const EulerZYX& att);

/// Constant-modulus M x N_RF matrix scheduled for `slot`, computed from the
/// forecast issued at `origin`.
struct AnalogBeamformer {
    CMatrix a;
    int slot = 0;
    int origin = 0;
};

/// Stacks one steering column per user for the given attitude. Requires K == N_RF.
CMatrix analog_matrix(const ArrayConfig& cfg, const WorldGeometry& geometry, const EulerZYX& att);

/// Analog beamformers for horizons d+1..h_pred of a forecast issued at `origin`.
/// `forecasts[h-1]` is the attitude forecast for slot origin + h.
std::vector<AnalogBeamformer> build_analog_sequence(const ArrayConfig& cfg, const WorldGeometry& geometry,
                                                    std::span<const EulerZYX> forecasts, int origin, int delay,
                                                    int h_pred);

/// Latest-cover rule: among all schedules covering `slot`, the one issued last.
const AnalogBeamformer& select_applied_beamformer(std::span<const AnalogBeamformer> schedules, int slot);

/// Origin t* = max{t in [first, last] : slot in {t+d+1, ..., t+h_pred}}, if any.
std::optional<int> latest_covering_origin(int slot, int delay, int h_pred, int first_origin, int last_origin);

// --- pointing detuning --------------------------------------------------

/// Exact detuning of a beam steered along `u_array` when the body attitude is
/// perturbed by R_hat -> R_hat exp(hat(dw)).
Vec2 detuning_at_direction(const ArrayConfig& cfg, const Vec3& u_array, const RotationResidual& dw);

/// xi = (dx/lambda * delta s_x, dy/lambda * delta s_y) for the user with LoS `los`
/// under forecast attitude `att_hat` and residual `dw`.
Vec2 detuning(const ArrayConfig& cfg, const Vec3& los, const EulerZYX& att_hat, const RotationResidual& dw);

/// Central finite-difference Jacobian of detuning w.r.t. dw at dw = 0 (step 1e-5 rad).
Mat23 jacobian_J(const ArrayConfig& cfg, const Vec3& los, const EulerZYX& att_hat);

/// Same Jacobian, evaluated at a beam pointing along the given array-frame angles.
Mat23 jacobian_at_angles(const ArrayConfig& cfg, const SteeringAngles& angles);

struct LossConstants {
    double cx = 0.0;
    double cy = 0.0;
};

/// c_axis = pi^2 (M_axis^2 - 1) / 3.
LossConstants loss_constants(const ArrayConfig& cfg);

double gain_loss_quadratic(const ArrayConfig& cfg, const Vec2& xi);

/// 1 - |AF_x(xi_x) AF_y(xi_y)|^2 for the separable normalized array factor.
/// Throws out-of-model outside the main lobe (|M pi xi| >= pi on either axis).
double exact_gain_loss(const ArrayConfig& cfg, const Vec2& xi);

/// Q = J^T diag(cx, cy) J at the given beam angles.
Mat3 detuning_quadratic_form(const ArrayConfig& cfg, const SteeringAngles& angles);

/// Largest eigenvalue of a symmetric 3x3 matrix. Closed form, with a symmetric
/// QR fallback when the closed form is ill-conditioned (near-repeated roots).
double max_eigenvalue_sym3(const Mat3& a);

/// Box in (theta, phi). Theta is clamped to [0, pi] when sampled.
struct AngleBox {
    double theta_lo = 0.0;
    double theta_hi = 0.0;
    double phi_lo = 0.0;
    double phi_hi = 0.0;

    static AngleBox around(const SteeringAngles& center, double half_width);
};

/// L_k^2: max over an n x n grid in `box` of lambda_max(Q). n = 1 samples the box center.
double spectral_bound(const ArrayConfig& cfg, const AngleBox& box, int grid);

/// Per-user L_k^2, tolerance and calibrated radius. certified(k) <=> L_k^2 delta^2 <= eps.
struct PointingCertificate {
    std::vector<double> l2;
    std::vector<AngleBox> regions;
    double delta_omega = 0.0;
    double epsilon = 0.05;
    double rho = 0.1;
    double rho_s = 0.0;

    std::vector<bool> certified() const;
    double confidence() const { return 1.0 - (rho + rho_s); }
};

std::vector<bool> certify_users(std::span<const double> l2, double delta_omega, double epsilon);

/// mu^T Q mu + tr(Q Sigma). Throws invalid-argument if Sigma is not symmetric PSD.
double expected_gain_loss(const Mat3& q, const Vec3& mu, const Mat3& sigma);
bool moment_certificate(const Mat3& q, const Vec3& mu, const Mat3& sigma, double epsilon);

/// tr(J Sigma J^T), the scalar detuning-variance proxy.
double detuning_variance(const Mat23& j, const Mat3& sigma);

}  // namespace hapbeam
