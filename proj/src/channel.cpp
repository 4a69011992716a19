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

#include "hapbeam/channel.hpp"

#include "hapbeam/error.hpp"

#include <cmath>
#include <random>
#include <string>

namespace hapbeam {

void ChannelParams::validate(int users) const {
    if (static_cast<int>(kappa.size()) != users || static_cast<int>(beta.size()) != users)
        fail(ErrorKind::invalid_argument, "channel parameters do not match the user count");
    for (int k = 0; k < users; ++k) {
        if (!(kappa[k] >= 0.0)) fail(ErrorKind::invalid_argument, "Rician factor must be >= 0");
        if (!(beta[k] > 0.0)) fail(ErrorKind::invalid_argument, "large-scale gain must be > 0");
    }
    if (!(noise_power > 0.0)) fail(ErrorKind::invalid_argument, "noise power must be > 0");
    if (!(bandwidth > 0.0)) fail(ErrorKind::invalid_argument, "bandwidth must be > 0");
}

std::vector<double> large_scale_gains(const WorldGeometry& geometry, double wavelength, LargeScaleModel model) {
    std::vector<double> beta(geometry.size(), 1.0);
    if (model == LargeScaleModel::free_space) {
        for (int k = 0; k < geometry.size(); ++k) {
            const double a = wavelength / (4.0 * kPi * geometry.distance[k]);
            beta[k] = a * a;
        }
    }
    return beta;
}

std::uint64_t substream_seed(std::uint64_t master, std::uint64_t index) {
    // splitmix64 over a mix of both words
    std::uint64_t z = master + 0x9E3779B97F4A7C15ull * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

CVector los_channel(const ArrayConfig& cfg, const WorldGeometry& geometry, const EulerZYX& true_attitude, int user,
                    double beta) {
    const double m = cfg.elements();
    const std::complex<double> path_phase = std::polar(1.0, -2.0 * kPi * geometry.distance[user] / cfg.wavelength);
    return (std::sqrt(beta * m) * path_phase) *
           steering_vector(cfg, beam_angles(cfg, geometry.los[user], true_attitude));
}

CMatrix synthesize_channel(const ArrayConfig& cfg, const WorldGeometry& geometry, const EulerZYX& true_attitude,
                           const ChannelParams& params, std::uint64_t seed) {
    const int users = geometry.size();
    params.validate(users);
    const int m = cfg.elements();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    CMatrix h(m, users);
    for (int k = 0; k < users; ++k) {
        const double kappa = params.kappa[k];
        const double w_los = std::isinf(kappa) ? 1.0 : std::sqrt(kappa / (kappa + 1.0));
        const double w_nlos = std::isinf(kappa) ? 0.0 : std::sqrt(1.0 / (kappa + 1.0));
        const double sd = std::sqrt(params.beta[k] / 2.0);
        CVector nlos(m);
        for (int i = 0; i < m; ++i) {
            const double re = normal(rng);
            const double im = normal(rng);
            nlos(i) = std::complex<double>(sd * re, sd * im);
        }
        h.col(k) = w_los * los_channel(cfg, geometry, true_attitude, k, params.beta[k]) + w_nlos * nlos;
    }
    return h;
}

CMatrix effective_channel(const CMatrix& h, const CMatrix& a) {
    if (h.rows() != a.rows())
        fail(ErrorKind::invalid_argument, "channel has " + std::to_string(h.rows()) + " rows but the analog beamformer has " +
                                              std::to_string(a.rows()));
    return h.adjoint() * a;
}

LinkMetrics sinr_and_rates(const CMatrix& h_eff, const CMatrix& d, double noise_power, double bandwidth) {
    if (h_eff.cols() != d.rows()) fail(ErrorKind::invalid_argument, "digital beamformer has the wrong row count");
    const CMatrix g = h_eff * d;
    const Eigen::Index users = h_eff.rows();
    LinkMetrics out{Eigen::VectorXd::Zero(users), Eigen::VectorXd::Zero(users)};
    for (Eigen::Index k = 0; k < users; ++k) {
        if (k >= g.cols()) break;
        double interference = 0.0;
        for (Eigen::Index j = 0; j < g.cols(); ++j)
            if (j != k) interference += std::norm(g(k, j));
        const double sinr = std::norm(g(k, k)) / (interference + noise_power);
        out.sinr(k) = sinr;
        out.rate(k) = bandwidth * std::log2(1.0 + sinr);
    }
    return out;
}

}  // namespace hapbeam
