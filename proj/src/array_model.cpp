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

#include "hapbeam/array_model.hpp"

#include "hapbeam/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace hapbeam {

void ArrayConfig::validate() const {
    if (mx < 1 || my < 1) fail(ErrorKind::config, "array element counts must be >= 1");
    if (!(dx > 0.0) || !(dy > 0.0) || !(wavelength > 0.0))
        fail(ErrorKind::config, "element spacing and wavelength must be positive");
    if (rf_chains < 1) fail(ErrorKind::config, "rf_chains must be >= 1");
}

CVector steering_vector(const ArrayConfig& cfg, const SteeringAngles& angles) {
    const int m_total = cfg.elements();
    const double amp = 1.0 / std::sqrt(static_cast<double>(m_total));
    const double k = 2.0 * kPi / cfg.wavelength;
    const double st = std::sin(angles.theta);
    const double sx = st * std::cos(angles.phi);
    const double sy = st * std::sin(angles.phi);
    CVector w(m_total);
    for (int n = 0; n < cfg.my; ++n) {
        for (int m = 0; m < cfg.mx; ++m) {
            const double phase = k * (m * cfg.dx * sx + n * cfg.dy * sy);
            w(m + cfg.mx * n) = std::polar(amp, phase);
        }
    }
    return w;
}

Vec3 array_direction(const ArrayConfig& cfg, const Vec3& los, const EulerZYX& att) {
    const Mat3 world_to_array = cfg.mounting.matrix().transpose() * euler_to_rotation(att).matrix().transpose();
    return world_to_array * los;
}

SteeringAngles beam_angles(const ArrayConfig& cfg, const Vec3& los, const EulerZYX& att) {
    return direction_to_angles(array_direction(cfg, los, att));
}

CMatrix analog_matrix(const ArrayConfig& cfg, const WorldGeometry& geometry, const EulerZYX& att) {
    if (geometry.size() != cfg.rf_chains)
        fail(ErrorKind::config, "analog beamformer needs K == N_RF (K = " + std::to_string(geometry.size()) +
                                    ", N_RF = " + std::to_string(cfg.rf_chains) + ")");
    CMatrix a(cfg.elements(), cfg.rf_chains);
    for (int k = 0; k < geometry.size(); ++k)
        a.col(k) = steering_vector(cfg, beam_angles(cfg, geometry.los[k], att));
    return a;
}

std::vector<AnalogBeamformer> build_analog_sequence(const ArrayConfig& cfg, const WorldGeometry& geometry,
                                                    std::span<const EulerZYX> forecasts, int origin, int delay,
                                                    int h_pred) {
    if (delay < 0 || h_pred <= delay) fail(ErrorKind::invalid_argument, "need 0 <= d < H_pred");
    if (static_cast<int>(forecasts.size()) < h_pred)
        fail(ErrorKind::invalid_argument, "forecast does not cover horizons 1..H_pred");
    std::vector<AnalogBeamformer> seq;
    seq.reserve(h_pred - delay);
    for (int h = delay + 1; h <= h_pred; ++h)
        seq.push_back({analog_matrix(cfg, geometry, forecasts[h - 1]), origin + h, origin});
    return seq;
}

const AnalogBeamformer& select_applied_beamformer(std::span<const AnalogBeamformer> schedules, int slot) {
    const AnalogBeamformer* best = nullptr;
    for (const auto& s : schedules)
        if (s.slot == slot && (best == nullptr || s.origin > best->origin)) best = &s;
    if (best == nullptr) fail(ErrorKind::uncovered_slot, "no analog schedule covers slot " + std::to_string(slot));
    return *best;
}

std::optional<int> latest_covering_origin(int slot, int delay, int h_pred, int first_origin, int last_origin) {
    // slot in {t+d+1..t+H}  <=>  slot-H <= t <= slot-d-1
    const int hi = std::min(last_origin, slot - delay - 1);
    const int lo = std::max(first_origin, slot - h_pred);
    if (hi < lo) return std::nullopt;
    return hi;
}

Vec2 detuning_at_direction(const ArrayConfig& cfg, const Vec3& u_array, const RotationResidual& dw) {
    const Mat3& mount = cfg.mounting.matrix();
    // Perturbed world->body map is exp(-hat(dw)) R_hat^T.
    const Vec3 u_body = mount * u_array;
    const Vec3 moved = mount.transpose() * (so3_exp(dw).matrix().transpose() * u_body);
    return Vec2(cfg.dx / cfg.wavelength * (moved.x() - u_array.x()),
                cfg.dy / cfg.wavelength * (moved.y() - u_array.y()));
}

Vec2 detuning(const ArrayConfig& cfg, const Vec3& los, const EulerZYX& att_hat, const RotationResidual& dw) {
    return detuning_at_direction(cfg, array_direction(cfg, los, att_hat), dw);
}

namespace {

constexpr double kJacobianStep = 1e-5;

Mat23 finite_difference_jacobian(const ArrayConfig& cfg, const Vec3& u_array) {
    Mat23 j;
    for (int i = 0; i < 3; ++i) {
        Vec3 step = Vec3::Zero();
        step(i) = kJacobianStep;
        j.col(i) = (detuning_at_direction(cfg, u_array, step) - detuning_at_direction(cfg, u_array, -step)) /
                   (2.0 * kJacobianStep);
    }
    return j;
}

}  // namespace

Mat23 jacobian_J(const ArrayConfig& cfg, const Vec3& los, const EulerZYX& att_hat) {
    return finite_difference_jacobian(cfg, array_direction(cfg, los, att_hat));
}

Mat23 jacobian_at_angles(const ArrayConfig& cfg, const SteeringAngles& angles) {
    return finite_difference_jacobian(cfg, angles_to_direction(angles));
}

LossConstants loss_constants(const ArrayConfig& cfg) {
    const double f = kPi * kPi / 3.0;
    return {f * (static_cast<double>(cfg.mx) * cfg.mx - 1.0), f * (static_cast<double>(cfg.my) * cfg.my - 1.0)};
}

double gain_loss_quadratic(const ArrayConfig& cfg, const Vec2& xi) {
    const LossConstants c = loss_constants(cfg);
    return c.cx * xi.x() * xi.x() + c.cy * xi.y() * xi.y();
}

namespace {

double array_factor(int m, double xi) {
    const double den = m * std::sin(kPi * xi);
    if (std::abs(den) < 1e-300) return 1.0;
    return std::sin(m * kPi * xi) / den;
}

}  // namespace

double exact_gain_loss(const ArrayConfig& cfg, const Vec2& xi) {
    if (std::abs(cfg.mx * kPi * xi.x()) >= kPi || std::abs(cfg.my * kPi * xi.y()) >= kPi)
        fail(ErrorKind::out_of_model, "detuning lies outside the main lobe");
    const double af = array_factor(cfg.mx, xi.x()) * array_factor(cfg.my, xi.y());
    return 1.0 - af * af;
}

Mat3 detuning_quadratic_form(const ArrayConfig& cfg, const SteeringAngles& angles) {
    const Mat23 j = jacobian_at_angles(cfg, angles);
    const LossConstants c = loss_constants(cfg);
    const Eigen::Vector2d weights(c.cx, c.cy);
    Mat3 q = j.transpose() * weights.asDiagonal() * j;
    return 0.5 * (q + q.transpose());
}

double max_eigenvalue_sym3(const Mat3& a) {
    const double p1 = a(0, 1) * a(0, 1) + a(0, 2) * a(0, 2) + a(1, 2) * a(1, 2);
    if (p1 == 0.0) return a.diagonal().maxCoeff();

    const double q = a.trace() / 3.0;
    const double p2 = (a(0, 0) - q) * (a(0, 0) - q) + (a(1, 1) - q) * (a(1, 1) - q) +
                      (a(2, 2) - q) * (a(2, 2) - q) + 2.0 * p1;
    const double p = std::sqrt(p2 / 6.0);
    const Mat3 b = (a - q * Mat3::Identity()) / p;
    const double r = 0.5 * b.determinant();

    // acos loses half the digits near |r| = 1 (near-repeated eigenvalues).
    if (!std::isfinite(r) || std::abs(r) > 1.0 - 1e-6) {
        Eigen::SelfAdjointEigenSolver<Mat3> solver(a, Eigen::EigenvaluesOnly);
        return solver.eigenvalues().maxCoeff();
    }
    const double phi = std::acos(r) / 3.0;
    return q + 2.0 * p * std::cos(phi);
}

AngleBox AngleBox::around(const SteeringAngles& center, double half_width) {
    return {center.theta - half_width, center.theta + half_width, center.phi - half_width, center.phi + half_width};
}

double spectral_bound(const ArrayConfig& cfg, const AngleBox& box, int grid) {
    if (grid < 1) fail(ErrorKind::invalid_argument, "spectral bound grid must be >= 1");
    if (box.theta_hi < box.theta_lo || box.phi_hi < box.phi_lo)
        fail(ErrorKind::invalid_argument, "empty angular region");
    auto sample = [grid](double lo, double hi, int i) {
        return grid == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * i / (grid - 1);
    };
    double best = 0.0;
    for (int i = 0; i < grid; ++i) {
        const double theta = std::clamp(sample(box.theta_lo, box.theta_hi, i), 0.0, kPi);
        for (int j = 0; j < grid; ++j) {
            const SteeringAngles angles{theta, sample(box.phi_lo, box.phi_hi, j)};
            best = std::max(best, max_eigenvalue_sym3(detuning_quadratic_form(cfg, angles)));
        }
    }
    return best;
}

std::vector<bool> certify_users(std::span<const double> l2, double delta_omega, double epsilon) {
    if (!(delta_omega >= 0.0)) fail(ErrorKind::invalid_argument, "delta_omega must be >= 0");
    if (!(epsilon > 0.0)) fail(ErrorKind::invalid_argument, "epsilon must be > 0");
    std::vector<bool> out(l2.size());
    for (std::size_t k = 0; k < l2.size(); ++k) out[k] = l2[k] * delta_omega * delta_omega <= epsilon;
    return out;
}

std::vector<bool> PointingCertificate::certified() const { return certify_users(l2, delta_omega, epsilon); }

double expected_gain_loss(const Mat3& q, const Vec3& mu, const Mat3& sigma) {
    const double scale = 1.0 + sigma.cwiseAbs().maxCoeff();
    if (!sigma.allFinite() || (sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
        fail(ErrorKind::invalid_argument, "covariance is not symmetric");
    Eigen::SelfAdjointEigenSolver<Mat3> solver(sigma, Eigen::EigenvaluesOnly);
    if (solver.eigenvalues().minCoeff() < -1e-12 * scale)
        fail(ErrorKind::invalid_argument, "covariance is not positive semidefinite");
    return mu.dot(q * mu) + (q * sigma).trace();
}

bool moment_certificate(const Mat3& q, const Vec3& mu, const Mat3& sigma, double epsilon) {
    return expected_gain_loss(q, mu, sigma) <= epsilon;
}

double detuning_variance(const Mat23& j, const Mat3& sigma) { return (j * sigma * j.transpose()).trace(); }

}  // namespace hapbeam
