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

#include "doctest.h"

#include "hapbeam/channel.hpp"
#include "hapbeam/error.hpp"

#include <cmath>
#include <limits>
#include <vector>

using namespace hapbeam;

namespace {

ArrayConfig small_array(int m, int chains) {
    ArrayConfig cfg;
    cfg.mx = m;
    cfg.my = m;
    cfg.rf_chains = chains;
    return cfg;
}

ChannelParams params_for(int users, double kappa, double beta) {
    ChannelParams p;
    p.kappa.assign(users, kappa);
    p.beta.assign(users, beta);
    return p;
}

}  // namespace

TEST_CASE("strong Rician factor converges to line of sight") {
    const ArrayConfig cfg = small_array(8, 2);
    const std::vector<Vec3> users{{2000, 0, 0}, {-4000, 3000, 0}};
    const WorldGeometry g = make_world_geometry({0, 0, 20000}, users);
    const EulerZYX att{0.01, -0.02, 0.03};
    const ChannelParams p = params_for(2, 1e12, 1e-3);
    int bad = 0;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        const CMatrix h = synthesize_channel(cfg, g, att, p, seed);
        for (int k = 0; k < 2; ++k) {
            const CVector los = los_channel(cfg, g, att, k, 1e-3);
            if ((h.col(k) - los).norm() / los.norm() > 1e-5) ++bad;
        }
    }
    CHECK(bad <= 2);  // at most 0.1% of 2000 columns
}

TEST_CASE("pure NLoS column energy averages to M beta") {
    const ArrayConfig cfg = small_array(4, 1);
    const WorldGeometry g = make_world_geometry({0, 0, 20000}, std::vector<Vec3>{{0, 0, 0}});
    const double beta = 2.5e-4;
    const ChannelParams p = params_for(1, 0.0, beta);
    double sum = 0.0;
    const int draws = 10000;
    for (int s = 0; s < draws; ++s)
        sum += synthesize_channel(cfg, g, {}, p, substream_seed(99, s)).col(0).squaredNorm() / 16.0;
    CHECK(std::abs(sum / draws - beta) <= 0.03 * beta);
}

TEST_CASE("channel synthesis is deterministic per seed") {
    const ArrayConfig cfg = small_array(6, 3);
    const std::vector<Vec3> users{{100, 0, 0}, {0, 900, 0}, {-3000, -100, 0}};
    const WorldGeometry g = make_world_geometry({0, 0, 20000}, users);
    const ChannelParams p = params_for(3, 10.0, 1e-6);
    const CMatrix a = synthesize_channel(cfg, g, {}, p, 1234);
    const CMatrix b = synthesize_channel(cfg, g, {}, p, 1234);
    CHECK(a == b);
    CHECK(a != synthesize_channel(cfg, g, {}, p, 1235));
    CHECK(substream_seed(1, 0) != substream_seed(1, 1));
    CHECK(substream_seed(1, 0) != substream_seed(2, 0));
}

TEST_CASE("large_scale_gains follow free-space loss") {
    const WorldGeometry g = make_world_geometry({0, 0, 20000}, std::vector<Vec3>{{0, 0, 0}});
    const double w = 0.01;
    const double expected = std::pow(w / (4 * kPi * 20000.0), 2);
    CHECK(large_scale_gains(g, w, LargeScaleModel::free_space)[0] == doctest::Approx(expected).epsilon(1e-14));
    CHECK(large_scale_gains(g, w, LargeScaleModel::normalized)[0] == 1.0);
}

TEST_CASE("effective_channel examples") {
    const int m = 5;
    CMatrix h(m, 2);
    for (int i = 0; i < m; ++i) {
        h(i, 0) = {double(i), 1.0 - i};
        h(i, 1) = {0.5 * i, 2.0};
    }
    const CMatrix a = CMatrix::Identity(m, m) / std::sqrt(double(m));
    const CMatrix heff = effective_channel(h, a);
    for (int k = 0; k < 2; ++k)
        for (int i = 0; i < m; ++i) CHECK(std::abs(heff(k, i) - std::conj(h(i, k)) / std::sqrt(double(m))) < 1e-15);

    CHECK(effective_channel(CMatrix::Zero(m, 2), a).isZero(0.0));

    const ArrayConfig cfg = small_array(8, 1);
    const WorldGeometry g = make_world_geometry({0, 0, 20000}, std::vector<Vec3>{{5000, -2000, 0}});
    const EulerZYX att{0.2, 0.01, -0.03};
    const double beta = 1e-4;
    const ChannelParams p = params_for(1, std::numeric_limits<double>::infinity(), beta);
    const CMatrix matched = effective_channel(synthesize_channel(cfg, g, att, p, 5), analog_matrix(cfg, g, att));
    CHECK(std::abs(matched(0, 0)) == doctest::Approx(std::sqrt(64 * beta)).epsilon(1e-12));
}

TEST_CASE("sinr_and_rates examples") {
    CMatrix one(1, 1);
    one(0, 0) = {0.6, 0.8};
    CMatrix d1 = CMatrix::Identity(1, 1) * std::sqrt(2.0);
    const LinkMetrics single = sinr_and_rates(one, d1, 2.0, 5.0);  // |G11|^2 = 2 = sigma^2
    CHECK(single.sinr(0) == doctest::Approx(1.0));
    CHECK(single.rate(0) == doctest::Approx(5.0));

    CMatrix heff(2, 2);
    heff << 2, 1, 1, 2;
    const LinkMetrics zero = sinr_and_rates(heff, CMatrix::Zero(2, 2), 1.0, 1.0);
    CHECK(zero.sinr.isZero(0.0));
    CHECK(zero.rate.isZero(0.0));

    const LinkMetrics two = sinr_and_rates(heff, CMatrix::Identity(2, 2), 1.0, 3.0);
    CHECK(two.sinr(0) == doctest::Approx(2.0));
    CHECK(two.rate(0) == doctest::Approx(3.0 * std::log2(3.0)));
    CHECK(two.sinr(1) == doctest::Approx(2.0));
}

TEST_CASE("channel parameter validation") {
    ChannelParams p = params_for(2, -1.0, 1.0);
    CHECK_THROWS_AS(p.validate(2), Error);
    p = params_for(2, 1.0, 0.0);
    CHECK_THROWS_AS(p.validate(2), Error);
    p = params_for(2, 1.0, 1.0);
    CHECK_THROWS_AS(p.validate(3), Error);
    p.noise_power = 0.0;
    CHECK_THROWS_AS(p.validate(2), Error);
}
