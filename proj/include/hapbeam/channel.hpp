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

#include "hapbeam/array_model.hpp"
#include "hapbeam/geometry.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace hapbeam {

/// Per-user Rician factor and large-scale power gain, plus link constants.
struct ChannelParams {
    std::vector<double> kappa;  // linear
    std::vector<double> beta;   // linear power gain
    double noise_power = 1.0;   // watts
    double bandwidth = 1.0;     // hertz

    void validate(int users) const;
};

enum class LargeScaleModel { free_space, normalized };

/// Free-space (lambda / (4 pi d))^2 per user, or 1 in normalized mode.
std::vector<double> large_scale_gains(const WorldGeometry& geometry, double wavelength, LargeScaleModel model);

/// Derives an independent 64-bit seed for substream `index` of `master`.
std::uint64_t substream_seed(std::uint64_t master, std::uint64_t index);

/// M x K Rician channel under the true attitude. Column k is
/// sqrt(k/(k+1)) h_LoS + sqrt(1/(k+1)) h_NLoS with ||h_LoS||^2 = M beta_k and
/// i.i.d. CN(0, beta_k) NLoS entries. Bit-identical for a fixed seed.
CMatrix synthesize_channel(const ArrayConfig& cfg, const WorldGeometry& geometry, const EulerZYX& true_attitude,
                           const ChannelParams& params, std::uint64_t seed);

/// Deterministic LoS column of user k (no fading).
CVector los_channel(const ArrayConfig& cfg, const WorldGeometry& geometry, const EulerZYX& true_attitude, int user,
                    double beta);

/// H^H A, K x N_RF.
CMatrix effective_channel(const CMatrix& h, const CMatrix& a);

struct LinkMetrics {
    Eigen::VectorXd sinr;
    Eigen::VectorXd rate;
};

/// SINR_k = |G_kk|^2 / (sum_{j != k} |G_kj|^2 + noise), G = H_eff D; rate = B log2(1 + SINR).
LinkMetrics sinr_and_rates(const CMatrix& h_eff, const CMatrix& d, double noise_power, double bandwidth);

}  // namespace hapbeam
