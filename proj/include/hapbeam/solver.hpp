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
#include "hapbeam/channel.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace hapbeam {

/// One target slot: effective channel, QoS targets and link budget.
struct SnapshotProblem {
    CMatrix h_eff;             // K x N_RF, row k is h_eff,k^H
    Eigen::VectorXd r_min;     // bit/s
    double p_max = 1.0;        // watts
    double noise_power = 1.0;  // watts
    double bandwidth = 1.0;    // hertz
    double circuit_power = 0.0;
    std::vector<bool> certified;  // empty means every user is certified
    Eigen::VectorXd sigma_xi;     // detuning-variance proxy per user (reported only)
    CMatrix analog;               // M x N_RF; empty means transmit power is ||D||_F^2

    int users() const { return static_cast<int>(h_eff.rows()); }
    int chains() const { return static_cast<int>(h_eff.cols()); }
    bool is_certified(int k) const { return certified.empty() || certified[static_cast<std::size_t>(k)]; }
    /// Column k of the effective channel as used in the reconstruction, h_eff,k.
    CVector user_channel(int k) const { return h_eff.row(k).adjoint(); }
    void validate() const;
};

using Admission = std::vector<bool>;

/// Per-user WMMSE receiver and weight, plus the power dual.
struct WmmseScalars {
    CVector u;
    Eigen::VectorXd w;
    double nu = 0.0;
};

enum class AdmissionPriority { qos_difficulty, channel_gain, random };
enum class RefineObjective { sum_rate, energy_efficiency };

/// Matrix multiplying nu in C(nu). The analog Gram A^H A prices ||A D||_F^2
/// exactly, which makes transmit power non-increasing in nu; the identity
/// form only guarantees that when A^H A = I.
enum class DualRegularizer { identity, analog_gram };

struct SolverOptions {
    double admission_threshold = 0.5;
    int k_min = 8;
    int max_bisections = 40;
    int max_doublings = 60;
    int refine_iterations = 10;
    double power_band_low = 0.99;  // bisection stops once power is in [band_low, 1] * P_max
    double eps_pi = 1e-12;
    double eps_p = 1e-12;
    double w_max = 1e6;
    AdmissionPriority priority = AdmissionPriority::qos_difficulty;
    std::uint64_t priority_seed = 0;
    RefineObjective objective = RefineObjective::sum_rate;
    DualRegularizer regularizer = DualRegularizer::analog_gram;
};

struct SolveStats {
    int max_bisection_steps = 0;
    int drops = 0;
    int add_backs = 0;
    int refine_iterations = 0;
    int refine_accepted = 0;
    int power_evaluations = 0;
};

struct BeamSolution {
    Admission admitted;
    CMatrix d;  // N_RF x K; columns of non-admitted users are zero
    Eigen::VectorXd sinr;
    Eigen::VectorXd rate;
    double power = 0.0;  // ||A D||_F^2
    double nu = 0.0;
    bool feasible = false;
    double qar = 0.0;
    double sum_rate = 0.0;
    double ee = 0.0;
    SolveStats stats;

    int admitted_count() const;
};

/// ||A D||_F^2 (or ||D||_F^2 when the problem carries no analog matrix).
double transmit_power(const SnapshotProblem& problem, const CMatrix& d);

/// pi_k = gamma_k sigma^2 / (||h_eff,k||^2 + eps_pi), gamma_k = 2^(r_min/B) - 1.
double required_power_proxy(const SnapshotProblem& problem, int k, double eps_pi = 1e-12);
Eigen::VectorXd required_power_proxies(const SnapshotProblem& problem, double eps_pi = 1e-12);

/// Certified users ordered by the admission priority (ties: lowest index first).
std::vector<int> admission_ranking(const SnapshotProblem& problem, AdmissionPriority priority, std::uint64_t seed,
                                   double eps_pi = 1e-12);

struct AdmissionPrediction {
    Eigen::VectorXd scores;  // in [0, 1]; zero for uncertified users
    WmmseScalars scalars;
};

/// Deterministic stand-in for a learned admission/scalar predictor: the first
/// k_min users of the priority ranking score 1, the rest score below 1 and
/// decrease along the ranking. Scalars come from one MMSE pass at an
/// equal-power matched-filter point.
AdmissionPrediction predict_admission_and_scalars(const SnapshotProblem& problem, const SolverOptions& options = {});

/// d_k(nu) = C(nu)^{-1} (alpha_k w_k conj(u_k) h_eff,k), C(nu) = sum alpha_k w_k |u_k|^2 h h^H + nu I.
/// nu = 0 is taken as the limit nu -> 0+.
CMatrix kkt_reconstruct(const SnapshotProblem& problem, const Admission& admitted, const WmmseScalars& scalars,
                        double nu, DualRegularizer regularizer = DualRegularizer::analog_gram);

struct DualSearch {
    double nu = 0.0;
    CMatrix d;
    double power = 0.0;
    int bisection_steps = 0;
    int evaluations = 0;
};

/// Smallest-power-violating nu search. Returns nu_min when power(nu_min) <= P_max,
/// otherwise bisects until power lands in [band_low, 1] * P_max or the step
/// cap is hit, returning the feasible end of the bracket. Throws
/// invariant-violation if power is observed to increase with nu.
DualSearch power_dual_bisection(const SnapshotProblem& problem, const Admission& admitted,
                                const WmmseScalars& scalars, const SolverOptions& options = {}, double nu_min = 0.0);

/// D * min(1, sqrt(P_max / (||A D||^2 + eps_p))).
CMatrix project_power(const SnapshotProblem& problem, const CMatrix& d, double eps_p = 1e-12);

/// Rates, power, QAR, sum-rate and EE of a given beamformer.
BeamSolution evaluate_solution(const SnapshotProblem& problem, const Admission& admitted, const CMatrix& d,
                               double nu = 0.0);

/// KKT reconstruction + dual bisection + power projection, evaluated.
BeamSolution reconstruct_solution(const SnapshotProblem& problem, const Admission& admitted,
                                  const WmmseScalars& scalars, const SolverOptions& options = {});

/// Stage I reference: start from the certified set and drop the largest-pi
/// user until `reconstruct` yields a feasible solution.
Admission admit_feasibility_driven(const SnapshotProblem& problem,
                                   const std::function<BeamSolution(const Admission&)>& reconstruct,
                                   double eps_pi = 1e-12);
Admission admit_feasibility_driven(const SnapshotProblem& problem, const WmmseScalars& scalars,
                                   const SolverOptions& options = {});

/// Tries `candidates` in order; a candidate stays admitted only if the
/// reconstructed solution remains fully feasible.
BeamSolution add_back(const SnapshotProblem& problem, const WmmseScalars& scalars, BeamSolution current,
                      const std::vector<int>& candidates, const SolverOptions& options = {});

/// Worst-first removal by g_k / (pi_k + eps_pi) until feasible, then add-back of
/// the removed users in ascending pi order.
BeamSolution strict_repair(const SnapshotProblem& problem, const Admission& admitted, const WmmseScalars& scalars,
                           const SolverOptions& options = {});

/// Up to `options.refine_iterations` WMMSE updates on the admitted set; an
/// iterate is accepted only when it is feasible and does not lower the objective.
BeamSolution refine_qos_safe(const SnapshotProblem& problem, const BeamSolution& solution,
                             const SolverOptions& options = {});

/// End-to-end per-slot solve.
BeamSolution solve_snapshot(const SnapshotProblem& problem, const SolverOptions& options = {});

/// Same pipeline driven by an externally produced prediction.
BeamSolution solve_snapshot(const SnapshotProblem& problem, const AdmissionPrediction& prediction,
                            const SolverOptions& options = {});

// Text fixtures: complex values are stored as `re im` pairs.
std::string format_snapshot(const SnapshotProblem& problem);
SnapshotProblem parse_snapshot(const std::string& text);
std::string format_solution(const BeamSolution& solution);
BeamSolution parse_solution(const std::string& text);
void write_snapshot(const std::filesystem::path& path, const SnapshotProblem& problem);
SnapshotProblem read_snapshot(const std::filesystem::path& path);

}  // namespace hapbeam
