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

#include "hapbeam/calibration.hpp"
#include "hapbeam/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

using namespace hapbeam;

namespace {

AttitudeSeries wobble(int n) {
    std::vector<EulerZYX> s(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) s[i] = {0.3 * std::sin(0.05 * i), 0.02 * std::cos(0.3 * i), 0.01 * std::sin(0.2 * i)};
    return AttitudeSeries(0.1, s);
}

ForecastOutput exact_forecast(const AttitudeSeries& truth, int origin, int h_pred) {
    ForecastOutput f;
    f.origin = origin;
    for (int h = 1; h <= h_pred; ++h) f.horizons.push_back(truth[origin + h]);
    return f;
}

}  // namespace

TEST_CASE("window_residuals examples") {
    const AttitudeSeries truth = wobble(60);
    const ForecastOutput perfect = exact_forecast(truth, 10, 12);
    const auto r = window_residuals(truth, perfect, 6, 12);
    CHECK(r.size() == 6);
    for (const auto& v : r) CHECK(v.norm() < 1e-12);

    // Forecast for horizon 9 is the truth with R_x(0.01) removed on the right.
    ForecastOutput off = perfect;
    const Rotation target = euler_to_rotation(truth[10 + 9]);
    off.horizons[8] = rotation_to_euler(target * rotation_x(-0.01));
    const auto r2 = window_residuals(truth, off, 6, 12);
    CHECK((r2[2] - Vec3(0.01, 0, 0)).norm() < 1e-9);
    CHECK(r2[0].norm() < 1e-12);
}

TEST_CASE("target_window_max") {
    const std::vector<RotationResidual> zeros(4, Vec3::Zero());
    CHECK(target_window_max(zeros) == 0.0);
    const std::vector<RotationResidual> three{{0.01, 0, 0}, {0, 0.03, 0}, {0, 0, 0.02}};
    CHECK(target_window_max(three) == doctest::Approx(0.03));
    const std::vector<RotationResidual> one{{0.003, 0.004, 0}};
    CHECK(target_window_max(one) == doctest::Approx(0.005));
}

TEST_CASE("calibrate_radius order statistic") {
    std::vector<double> z(10);
    std::iota(z.begin(), z.end(), 1.0);
    std::shuffle(z.begin(), z.end(), std::mt19937_64(4));
    CHECK(calibrate_radius(z, 0.2) == 9.0);
    CHECK(calibrate_radius(z, 1e-9) == 10.0);
    const std::vector<double> same(7, 0.25);
    for (double rho : {0.01, 0.3, 0.9}) CHECK(calibrate_radius(same, rho) == 0.25);
    CHECK_THROWS_AS(calibrate_radius(std::vector<double>{}, 0.1), Error);
    CHECK_THROWS_AS(calibrate_radius(z, 0.0), Error);
}

TEST_CASE("calibrate_moments") {
    const std::vector<RotationResidual> zeros(5, Vec3::Zero());
    const auto z = calibrate_moments(zeros);
    CHECK(z.mean.isZero(0.0));
    CHECK(z.covariance.isZero(0.0));

    const double a = 0.07;
    const std::vector<RotationResidual> pair{{a, 0, 0}, {-a, 0, 0}};
    const auto m = calibrate_moments(pair);
    CHECK(m.mean.norm() < 1e-18);
    // Unbiased: ((a - 0)^2 + (-a - 0)^2) / (n - 1) with n - 1 = 1.
    CHECK(m.covariance(0, 0) == doctest::Approx(2 * a * a));
    CHECK(m.covariance.cwiseAbs().sum() == doctest::Approx(2 * a * a));

    std::vector<RotationResidual> pool{{0.1, 0.2, -0.1}, {0.0, 0.3, 0.2}, {-0.2, 0.1, 0.05}, {0.3, -0.1, 0.0}};
    const auto before = calibrate_moments(pool);
    std::reverse(pool.begin(), pool.end());
    const auto after = calibrate_moments(pool);
    CHECK((before.mean - after.mean).norm() < 1e-15);
    CHECK((before.covariance - after.covariance).norm() < 1e-15);
    Eigen::SelfAdjointEigenSolver<Mat3> es(before.covariance);
    CHECK(es.eigenvalues().minCoeff() > -1e-12);
}

TEST_CASE("coverage_check") {
    const std::vector<double> z{0.1, 0.5, 0.2, 0.9};
    CHECK(coverage_check(z, 0.9 + 1.0) == 1.0);
    CHECK(coverage_check(z, 0.05) == 0.0);
    CHECK(coverage_check(z, 0.5) == 0.75);
}

TEST_CASE("conformal coverage on i.i.d. windows") {
    std::mt19937_64 rng(21);
    std::gamma_distribution<double> g(2.0, 0.01);
    std::vector<double> cal(2000), test(2000);
    for (auto& v : cal) v = g(rng);
    for (auto& v : test) v = g(rng);
    const double cov = coverage_check(test, calibrate_radius(cal, 0.1));
    CHECK(cov >= 0.88);
    CHECK(cov <= 0.93);
}

TEST_CASE("calibrate end to end and report round trip") {
    const AttitudeSeries truth = wobble(400);
    const Forecaster f = make_forecaster(ForecasterKind::persistence);
    const OriginRange origins{100, 300};
    const CalibrationReport rep = calibrate(truth, f, origins, 64, 6, 12, 0.1);
    CHECK(rep.n == 200);
    CHECK(rep.delta_omega > 0.0);
    CHECK(rep.delta_omega == calibrate_radius(rep.window_maxima, 0.1));

    const CalibrationReport strided = calibrate(truth, f, origins, 64, 6, 12, 0.1, 12);
    CHECK(strided.n == 17);

    const CalibrationReport back = parse_calibration(format_calibration(rep));
    CHECK(back.delta_omega == rep.delta_omega);
    CHECK(back.n == rep.n);
    CHECK(back.rho == rep.rho);
    CHECK(back.moments.mean == rep.moments.mean);
    CHECK((back.moments.covariance - rep.moments.covariance).norm() == 0.0);
}

TEST_CASE("origin ranges must be disjoint") {
    CHECK_NOTHROW(require_disjoint({0, 10}, {10, 20}));
    CHECK_THROWS_AS(require_disjoint({0, 11}, {10, 20}), Error);
    CHECK(OriginRange{5, 3}.size() == 0);
}
