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

#include "hapbeam/solver.hpp"

#include "hapbeam/detail/text_io.hpp"
#include "hapbeam/error.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <utility>

namespace hapbeam {

namespace {

constexpr double kLn2 = 0.693147180559945309417;
constexpr double kMonotoneTol = 1e-9;

void merge_stats(SolveStats& into, const SolveStats& from) {
    into.max_bisection_steps = std::max(into.max_bisection_steps, from.max_bisection_steps);
    into.drops += from.drops;
    into.add_backs += from.add_backs;
    into.refine_iterations += from.refine_iterations;
    into.refine_accepted += from.refine_accepted;
    into.power_evaluations += from.power_evaluations;
}

bool any_admitted(const Admission& a) { return std::find(a.begin(), a.end(), true) != a.end(); }

void check_admission(const SnapshotProblem& problem, const Admission& a) {
    if (static_cast<int>(a.size()) != problem.users())
        fail(ErrorKind::invalid_argument, "admission vector has " + std::to_string(a.size()) + " entries, expected " +
                                              std::to_string(problem.users()));
}

void check_scalars(const SnapshotProblem& problem, const WmmseScalars& s) {
    if (s.u.size() != problem.users() || s.w.size() != problem.users())
        fail(ErrorKind::invalid_argument, "WMMSE scalars do not match the number of users");
}

CMatrix analog_gram(const SnapshotProblem& problem) {
    if (problem.analog.size() == 0) return CMatrix::Identity(problem.chains(), problem.chains());
    return problem.analog.adjoint() * problem.analog;
}

// Holds everything in C(nu) d = b that does not depend on nu.
class Reconstructor {
public:
    Reconstructor(const SnapshotProblem& problem, const Admission& admitted, const WmmseScalars& s,
                  DualRegularizer regularizer)
        : k_(problem.users()), n_(problem.chains()), gram_(analog_gram(problem)) {
        Eigen::VectorXd data_weight = Eigen::VectorXd::Zero(k_);
        CVector rhs_weight = CVector::Zero(k_);
        for (int k = 0; k < k_; ++k) {
            if (!admitted[static_cast<std::size_t>(k)]) continue;
            data_weight(k) = s.w(k) * std::norm(s.u(k));
            rhs_weight(k) = s.w(k) * std::conj(s.u(k));
        }
        const CMatrix& h = problem.h_eff;  // row k = h_k^H
        data_ = h.adjoint() * data_weight.cast<std::complex<double>>().asDiagonal() * h;
        rhs_ = h.adjoint() * rhs_weight.asDiagonal();
        reg_ = regularizer == DualRegularizer::analog_gram ? gram_ : CMatrix::Identity(n_, n_);
        const double trace = data_.trace().real();
        degenerate_ = !(trace > 0.0) || rhs_.squaredNorm() == 0.0;
        floor_ = 1e-12 * trace / std::max(n_, 1);
        rhs_energy_ = rhs_.squaredNorm();
        if (regularizer == DualRegularizer::analog_gram) {
            Eigen::LLT<CMatrix> llt(gram_);
            if (llt.info() == Eigen::Success) gram_rhs_energy_ = (rhs_.adjoint() * llt.solve(rhs_)).trace().real();
        }
    }

    bool degenerate() const { return degenerate_; }

    CMatrix solve(double nu) const {
        if (degenerate_) return CMatrix::Zero(n_, k_);
        double shift = floor_;
        for (int attempt = 0; attempt < 30; ++attempt) {
            CMatrix c = data_ + nu * reg_;
            c.diagonal().array() += shift;
            Eigen::LLT<CMatrix> llt(c);
            if (llt.info() == Eigen::Success) return llt.solve(rhs_);
            shift = std::max(shift * 10.0, std::numeric_limits<double>::min());
        }
        fail(ErrorKind::invariant_violation, "reconstruction matrix is not positive definite");
    }

    double power(const CMatrix& d) const { return (d.conjugate().cwiseProduct(gram_ * d)).sum().real(); }

    // Any nu at or above this bound meets the power budget.
    double nu_upper(double p_max) const {
        // Gram regularizer: d^H G d <= b^H G^-1 b / nu^2. Identity: d^H G d <= tr(G) ||b||^2 / nu^2.
        if (gram_rhs_energy_ >= 0.0) return std::sqrt(gram_rhs_energy_ / p_max);
        return std::sqrt(gram_.trace().real() * rhs_energy_ / p_max);
    }

private:
    int k_;
    int n_;
    CMatrix gram_;
    CMatrix data_;
    CMatrix rhs_;
    CMatrix reg_;
    double floor_ = 0.0;
    double rhs_energy_ = 0.0;
    double gram_rhs_energy_ = -1.0;  // b^H G^-1 b when the Gram regularizer is factorizable
    bool degenerate_ = true;
};

WmmseScalars mmse_scalars(const SnapshotProblem& problem, const Admission& admitted, const CMatrix& d, double w_max) {
    const int k_users = problem.users();
    WmmseScalars s;
    s.u = CVector::Zero(k_users);
    s.w = Eigen::VectorXd::Ones(k_users);
    const CMatrix g = problem.h_eff * d;
    for (int k = 0; k < k_users; ++k) {
        if (!admitted[static_cast<std::size_t>(k)]) continue;
        const double total = g.row(k).squaredNorm() + problem.noise_power;
        s.u(k) = g(k, k) / total;
        const double mse = 1.0 - (std::conj(s.u(k)) * g(k, k)).real();
        s.w(k) = mse > 0.0 ? std::clamp(1.0 / mse, 1.0, w_max) : w_max;
    }
    return s;
}

// Equal-power matched filter over the admitted users, scaled to P_max.
CMatrix matched_filter_point(const SnapshotProblem& problem, const Admission& admitted) {
    CMatrix d = CMatrix::Zero(problem.chains(), problem.users());
    for (int k = 0; k < problem.users(); ++k) {
        if (!admitted[static_cast<std::size_t>(k)]) continue;
        const CVector h = problem.user_channel(k);
        const double n = h.norm();
        if (n > 0.0) d.col(k) = h / n;
    }
    const double p = transmit_power(problem, d);
    if (p > 0.0) d *= std::sqrt(problem.p_max / p);
    return d;
}

double objective(const BeamSolution& s, RefineObjective mode) {
    return mode == RefineObjective::energy_efficiency ? s.ee : s.sum_rate;
}

std::vector<int> ascending_pi(const Eigen::VectorXd& pi, std::vector<int> users) {
    std::stable_sort(users.begin(), users.end(), [&](int a, int b) { return pi(a) < pi(b); });
    return users;
}

}  // namespace

void SnapshotProblem::validate() const {
    const int k = users();
    if (r_min.size() != k)
        fail(ErrorKind::invalid_argument, "r_min has " + std::to_string(r_min.size()) + " entries, expected " +
                                              std::to_string(k));
    for (int i = 0; i < k; ++i)
        if (!std::isfinite(r_min(i)) || r_min(i) < 0.0)
            fail(ErrorKind::invalid_argument, "r_min must be finite and non-negative (user " + std::to_string(i) + ")");
    if (!(p_max > 0.0) || !std::isfinite(p_max)) fail(ErrorKind::invalid_argument, "P_max must be positive");
    if (!(noise_power > 0.0) || !std::isfinite(noise_power))
        fail(ErrorKind::invalid_argument, "noise power must be positive");
    if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) fail(ErrorKind::invalid_argument, "bandwidth must be positive");
    if (!(circuit_power >= 0.0) || !std::isfinite(circuit_power))
        fail(ErrorKind::invalid_argument, "circuit power must be non-negative");
    if (!certified.empty() && static_cast<int>(certified.size()) != k)
        fail(ErrorKind::invalid_argument, "certified set size does not match the number of users");
    if (sigma_xi.size() != 0 && sigma_xi.size() != k)
        fail(ErrorKind::invalid_argument, "sigma_xi size does not match the number of users");
    if (analog.size() != 0 && analog.cols() != chains())
        fail(ErrorKind::invalid_argument, "analog matrix has " + std::to_string(analog.cols()) +
                                              " columns, expected " + std::to_string(chains()));
    if (!h_eff.allFinite()) fail(ErrorKind::invalid_argument, "effective channel has non-finite entries");
}

int BeamSolution::admitted_count() const { return static_cast<int>(std::count(admitted.begin(), admitted.end(), true)); }

double transmit_power(const SnapshotProblem& problem, const CMatrix& d) {
    if (problem.analog.size() == 0) return d.squaredNorm();
    return (problem.analog * d).squaredNorm();
}

double required_power_proxy(const SnapshotProblem& problem, int k, double eps_pi) {
    if (k < 0 || k >= problem.users()) fail(ErrorKind::invalid_argument, "user index out of range");
    const double gamma = std::exp2(problem.r_min(k) / problem.bandwidth) - 1.0;
    return gamma * problem.noise_power / (problem.h_eff.row(k).squaredNorm() + eps_pi);
}

Eigen::VectorXd required_power_proxies(const SnapshotProblem& problem, double eps_pi) {
    Eigen::VectorXd pi(problem.users());
    for (int k = 0; k < problem.users(); ++k) pi(k) = required_power_proxy(problem, k, eps_pi);
    return pi;
}

std::vector<int> admission_ranking(const SnapshotProblem& problem, AdmissionPriority priority, std::uint64_t seed,
                                   double eps_pi) {
    std::vector<int> users;
    for (int k = 0; k < problem.users(); ++k)
        if (problem.is_certified(k)) users.push_back(k);
    switch (priority) {
    case AdmissionPriority::qos_difficulty:
        return ascending_pi(required_power_proxies(problem, eps_pi), users);
    case AdmissionPriority::channel_gain: {
        const Eigen::VectorXd gain = problem.h_eff.rowwise().squaredNorm();
        std::stable_sort(users.begin(), users.end(), [&](int a, int b) { return gain(a) > gain(b); });
        return users;
    }
    case AdmissionPriority::random: {
        std::mt19937_64 rng(seed);
        std::shuffle(users.begin(), users.end(), rng);
        return users;
    }
    }
    return users;
}

AdmissionPrediction predict_admission_and_scalars(const SnapshotProblem& problem, const SolverOptions& options) {
    problem.validate();
    const int k_users = problem.users();
    AdmissionPrediction out;
    out.scores = Eigen::VectorXd::Zero(k_users);

    const std::vector<int> ranking = admission_ranking(problem, options.priority, options.priority_seed, options.eps_pi);
    const Eigen::VectorXd pi = required_power_proxies(problem, options.eps_pi);
    const Eigen::VectorXd gain = problem.h_eff.rowwise().squaredNorm();
    const int floor = std::max(options.k_min, 1);
    for (std::size_t r = 0; r < ranking.size(); ++r) {
        const int k = ranking[r];
        const int pos = static_cast<int>(r);
        if (pos < floor) {
            out.scores(k) = 1.0;
            continue;
        }
        const int ref = ranking[static_cast<std::size_t>(floor - 1)];
        double score = 0.0;
        switch (options.priority) {
        case AdmissionPriority::qos_difficulty:
            score = pi(k) <= pi(ref) ? 1.0 : pi(ref) / pi(k);
            break;
        case AdmissionPriority::channel_gain:
            score = gain(k) >= gain(ref) ? 1.0 : (gain(ref) > 0.0 ? gain(k) / gain(ref) : 0.0);
            break;
        case AdmissionPriority::random:
            score = 1.0 / static_cast<double>(pos - floor + 2);
            break;
        }
        // Scores never increase along the ranking.
        const double prev = out.scores(ranking[r - 1]);
        out.scores(k) = std::min(std::clamp(score, 0.0, 1.0), prev);
    }

    // Scalars come from the regularized zero-forcing point over the certified
    // users, (H^H H + alpha A^H A)^-1 H^H with alpha = K_c sigma^2 / P, scaled
    // to the power budget.
    Admission certified(static_cast<std::size_t>(k_users), false);
    CMatrix h_cert = problem.h_eff;
    int k_cert = 0;
    for (int k = 0; k < k_users; ++k) {
        certified[static_cast<std::size_t>(k)] = problem.is_certified(k);
        if (certified[static_cast<std::size_t>(k)])
            ++k_cert;
        else
            h_cert.row(k).setZero();
    }
    CMatrix d0 = CMatrix::Zero(problem.chains(), k_users);
    if (k_cert > 0) {
        const double alpha = k_cert * problem.noise_power / problem.p_max;
        CMatrix c = h_cert.adjoint() * h_cert + alpha * analog_gram(problem);
        c.diagonal().array() += 1e-12 * std::max(c.trace().real(), 0.0) / std::max(problem.chains(), 1);
        Eigen::LLT<CMatrix> llt(c);
        if (llt.info() == Eigen::Success) d0 = llt.solve(h_cert.adjoint());
    }
    const double p0 = transmit_power(problem, d0);
    if (p0 > 0.0) d0 *= std::sqrt(problem.p_max / p0);
    out.scalars = mmse_scalars(problem, certified, d0, options.w_max);
    out.scalars.nu = 0.0;
    return out;
}

CMatrix kkt_reconstruct(const SnapshotProblem& problem, const Admission& admitted, const WmmseScalars& scalars,
                        double nu, DualRegularizer regularizer) {
    check_admission(problem, admitted);
    check_scalars(problem, scalars);
    if (!(nu >= 0.0) || !std::isfinite(nu)) fail(ErrorKind::invalid_argument, "nu must be finite and non-negative");
    return Reconstructor(problem, admitted, scalars, regularizer).solve(nu);
}

DualSearch power_dual_bisection(const SnapshotProblem& problem, const Admission& admitted,
                                const WmmseScalars& scalars, const SolverOptions& options, double nu_min) {
    check_admission(problem, admitted);
    check_scalars(problem, scalars);
    DualSearch out;
    out.nu = nu_min;
    const Reconstructor rec(problem, admitted, scalars, options.regularizer);
    if (rec.degenerate()) {
        out.d = CMatrix::Zero(problem.chains(), problem.users());
        return out;
    }

    std::vector<std::pair<double, double>> trail;
    auto eval = [&](double nu) {
        CMatrix d = rec.solve(nu);
        const double p = rec.power(d);
        ++out.evaluations;
        for (const auto& [nu_i, p_i] : trail) {
            const double tol = kMonotoneTol * std::max(p, p_i);
            if ((nu_i < nu && p > p_i + tol) || (nu_i > nu && p < p_i - tol))
                fail(ErrorKind::invariant_violation,
                     "transmit power increased with nu (nu " + detail::format_double(nu_i) + " -> " +
                         detail::format_double(nu) + ", power " + detail::format_double(p_i) + " -> " +
                         detail::format_double(p) + ")");
        }
        trail.emplace_back(nu, p);
        return std::make_pair(std::move(d), p);
    };

    const double p_max = problem.p_max;
    auto [d_lo, p_lo] = eval(nu_min);
    if (p_lo <= p_max) {
        out.d = std::move(d_lo);
        out.power = p_lo;
        return out;
    }

    double lo = nu_min;
    double hi = std::max(rec.nu_upper(p_max), 2.0 * nu_min);
    if (!(hi > lo)) hi = lo + std::max(1.0, lo);
    auto [d_hi, p_hi] = eval(hi);
    for (int i = 0; i < options.max_doublings && p_hi > p_max; ++i) {
        lo = hi;
        hi *= 2.0;
        std::tie(d_hi, p_hi) = eval(hi);
    }
    out.nu = hi;
    out.d = std::move(d_hi);
    out.power = p_hi;
    if (p_hi > p_max || p_hi >= options.power_band_low * p_max) return out;

    for (int i = 0; i < options.max_bisections; ++i) {
        const double mid = 0.5 * (lo + hi);
        auto [d_mid, p_mid] = eval(mid);
        ++out.bisection_steps;
        if (p_mid > p_max) {
            lo = mid;
            continue;
        }
        hi = mid;
        out.nu = mid;
        out.d = std::move(d_mid);
        out.power = p_mid;
        if (p_mid >= options.power_band_low * p_max) break;
    }
    return out;
}

CMatrix project_power(const SnapshotProblem& problem, const CMatrix& d, double eps_p) {
    const double p = transmit_power(problem, d);
    const double factor = std::min(1.0, std::sqrt(problem.p_max / (p + eps_p)));
    if (factor == 1.0) return d;
    CMatrix out = d * factor;
    // Rounding can leave the scaled power an ulp above the budget when eps_p is
    // negligible next to P_max.
    for (int i = 0; i < 8 && transmit_power(problem, out) > problem.p_max; ++i) out *= 1.0 - 4.0 * std::numeric_limits<double>::epsilon();
    return out;
}

BeamSolution evaluate_solution(const SnapshotProblem& problem, const Admission& admitted, const CMatrix& d,
                               double nu) {
    check_admission(problem, admitted);
    if (d.rows() != problem.chains() || d.cols() != problem.users())
        fail(ErrorKind::invalid_argument, "digital beamformer must be N_RF x K");
    BeamSolution s;
    s.admitted = admitted;
    s.d = d;
    for (int k = 0; k < problem.users(); ++k)
        if (!admitted[static_cast<std::size_t>(k)]) s.d.col(k).setZero();
    s.nu = nu;
    const LinkMetrics m = sinr_and_rates(problem.h_eff, s.d, problem.noise_power, problem.bandwidth);
    s.sinr = m.sinr;
    s.rate = m.rate;
    s.power = transmit_power(problem, s.d);
    s.feasible = s.power <= problem.p_max;
    for (int k = 0; k < problem.users(); ++k) {
        if (!admitted[static_cast<std::size_t>(k)]) continue;
        s.sum_rate += s.rate(k);
        if (!(s.rate(k) >= problem.r_min(k))) s.feasible = false;
    }
    s.qar = problem.users() > 0 ? static_cast<double>(s.admitted_count()) / problem.users() : 0.0;
    const double denom = s.power + problem.circuit_power;
    s.ee = denom > 0.0 ? s.sum_rate / denom : 0.0;
    return s;
}

BeamSolution reconstruct_solution(const SnapshotProblem& problem, const Admission& admitted,
                                  const WmmseScalars& scalars, const SolverOptions& options) {
    const DualSearch search = power_dual_bisection(problem, admitted, scalars, options);
    BeamSolution s = evaluate_solution(problem, admitted, project_power(problem, search.d, options.eps_p), search.nu);
    s.stats.max_bisection_steps = search.bisection_steps;
    s.stats.power_evaluations = search.evaluations;
    return s;
}

Admission admit_feasibility_driven(const SnapshotProblem& problem,
                                   const std::function<BeamSolution(const Admission&)>& reconstruct, double eps_pi) {
    problem.validate();
    const Eigen::VectorXd pi = required_power_proxies(problem, eps_pi);
    Admission adm(static_cast<std::size_t>(problem.users()), false);
    for (int k = 0; k < problem.users(); ++k) adm[static_cast<std::size_t>(k)] = problem.is_certified(k);
    while (any_admitted(adm)) {
        if (reconstruct(adm).feasible) break;
        int worst = -1;
        for (int k = 0; k < problem.users(); ++k)
            if (adm[static_cast<std::size_t>(k)] && (worst < 0 || pi(k) > pi(worst))) worst = k;
        adm[static_cast<std::size_t>(worst)] = false;
    }
    return adm;
}

Admission admit_feasibility_driven(const SnapshotProblem& problem, const WmmseScalars& scalars,
                                   const SolverOptions& options) {
    return admit_feasibility_driven(
        problem, [&](const Admission& a) { return reconstruct_solution(problem, a, scalars, options); },
        options.eps_pi);
}

BeamSolution add_back(const SnapshotProblem& problem, const WmmseScalars& scalars, BeamSolution current,
                      const std::vector<int>& candidates, const SolverOptions& options) {
    for (const int c : candidates) {
        if (c < 0 || c >= problem.users()) fail(ErrorKind::invalid_argument, "add-back candidate out of range");
        if (current.admitted[static_cast<std::size_t>(c)] || !problem.is_certified(c)) continue;
        Admission trial = current.admitted;
        trial[static_cast<std::size_t>(c)] = true;
        BeamSolution s = reconstruct_solution(problem, trial, scalars, options);
        merge_stats(current.stats, s.stats);
        if (!s.feasible) continue;
        s.stats = current.stats;
        ++s.stats.add_backs;
        current = std::move(s);
    }
    return current;
}

BeamSolution strict_repair(const SnapshotProblem& problem, const Admission& admitted, const WmmseScalars& scalars,
                           const SolverOptions& options) {
    problem.validate();
    check_admission(problem, admitted);
    const Eigen::VectorXd pi = required_power_proxies(problem, options.eps_pi);
    Admission adm(admitted.size(), false);
    for (int k = 0; k < problem.users(); ++k)
        adm[static_cast<std::size_t>(k)] = admitted[static_cast<std::size_t>(k)] && problem.is_certified(k);

    SolveStats stats;
    std::vector<int> removed;
    BeamSolution sol;
    while (true) {
        sol = reconstruct_solution(problem, adm, scalars, options);
        merge_stats(stats, sol.stats);
        int worst = -1;
        double worst_metric = 0.0;
        for (int k = 0; k < problem.users(); ++k) {
            if (!adm[static_cast<std::size_t>(k)]) continue;
            const double g = std::max(0.0, problem.r_min(k) - sol.rate(k));
            if (!(g > 0.0)) continue;
            const double metric = g / (pi(k) + options.eps_pi);
            if (worst < 0 || metric > worst_metric) {
                worst = k;
                worst_metric = metric;
            }
        }
        if (worst < 0) break;
        adm[static_cast<std::size_t>(worst)] = false;
        removed.push_back(worst);
        ++stats.drops;
    }
    sol.stats = stats;
    return add_back(problem, scalars, std::move(sol), ascending_pi(pi, removed), options);
}

BeamSolution refine_qos_safe(const SnapshotProblem& problem, const BeamSolution& solution,
                             const SolverOptions& options) {
    BeamSolution best = solution;
    if (options.refine_iterations <= 0 || solution.admitted_count() == 0) return best;
    const int iterations = std::min(options.refine_iterations, 10);
    // The WMMSE trajectory continues through rejected iterates; the guard only
    // decides which iterate is returned. Iteration 0 tries the equal-power
    // matched filter over the admitted users as an alternative start.
    BeamSolution current = solution;
    for (int it = 0; it < iterations; ++it) {
        const WmmseScalars s = it == 0 ? mmse_scalars(problem, current.admitted,
                                                      matched_filter_point(problem, current.admitted), options.w_max)
                                       : mmse_scalars(problem, current.admitted, current.d, options.w_max);
        double nu_min = 0.0;
        if (options.objective == RefineObjective::energy_efficiency) {
            const double eta = current.sum_rate / (current.power + problem.circuit_power);
            nu_min = std::isfinite(eta) ? eta * kLn2 / problem.bandwidth : 0.0;
        }
        const DualSearch search = power_dual_bisection(problem, current.admitted, s, options, nu_min);
        BeamSolution cand =
            evaluate_solution(problem, current.admitted, project_power(problem, search.d, options.eps_p), search.nu);
        ++best.stats.refine_iterations;
        best.stats.max_bisection_steps = std::max(best.stats.max_bisection_steps, search.bisection_steps);
        best.stats.power_evaluations += search.evaluations;
        const bool accept = cand.feasible && objective(cand, options.objective) >= objective(best, options.objective);
        if (accept) {
            cand.stats = best.stats;
            ++cand.stats.refine_accepted;
            best = cand;
        }
        if (it > 0 || accept) current = std::move(cand);
    }
    if (objective(best, options.objective) < objective(solution, options.objective) ||
        (solution.feasible && !best.feasible))
        fail(ErrorKind::invariant_violation, "refinement lowered the objective or broke feasibility");
    return best;
}

BeamSolution solve_snapshot(const SnapshotProblem& problem, const AdmissionPrediction& prediction,
                            const SolverOptions& options) {
    problem.validate();
    if (prediction.scores.size() != problem.users())
        fail(ErrorKind::invalid_argument, "prediction scores do not match the number of users");
    check_scalars(problem, prediction.scalars);
    Admission gate(static_cast<std::size_t>(problem.users()), false);
    std::vector<int> gated;
    for (int k = 0; k < problem.users(); ++k) {
        if (!problem.is_certified(k)) continue;
        if (prediction.scores(k) >= options.admission_threshold)
            gate[static_cast<std::size_t>(k)] = true;
        else
            gated.push_back(k);
    }
    const Eigen::VectorXd pi = required_power_proxies(problem, options.eps_pi);
    BeamSolution sol = strict_repair(problem, gate, prediction.scalars, options);
    sol = add_back(problem, prediction.scalars, std::move(sol), ascending_pi(pi, gated), options);
    sol = refine_qos_safe(problem, sol, options);
    if (!sol.feasible)
        fail(ErrorKind::invariant_violation, "solver returned an infeasible beamformer");
    return sol;
}

BeamSolution solve_snapshot(const SnapshotProblem& problem, const SolverOptions& options) {
    return solve_snapshot(problem, predict_admission_and_scalars(problem, options), options);
}

// ---- text fixtures -------------------------------------------------------

namespace {

class LineReader {
public:
    explicit LineReader(const std::string& text) {
        std::istringstream in(text);
        std::string line;
        while (std::getline(in, line)) {
            const auto t = detail::trim(line);
            if (!t.empty()) lines_.emplace_back(t);
        }
    }

    // Next line split on whitespace; the first token must equal `key`.
    std::vector<std::string> expect(const std::string& key) {
        if (pos_ >= lines_.size()) fail(ErrorKind::parse, "unexpected end of input, expected '" + key + "'");
        std::istringstream in(lines_[pos_]);
        std::vector<std::string> tokens;
        std::string tok;
        while (in >> tok) tokens.push_back(tok);
        if (tokens.empty() || tokens[0] != key)
            fail(ErrorKind::parse, "line " + std::to_string(pos_ + 1) + ": expected '" + key + "'");
        ++pos_;
        tokens.erase(tokens.begin());
        return tokens;
    }

    std::vector<std::string> row() {
        if (pos_ >= lines_.size()) fail(ErrorKind::parse, "unexpected end of input in matrix block");
        std::istringstream in(lines_[pos_++]);
        std::vector<std::string> tokens;
        std::string tok;
        while (in >> tok) tokens.push_back(tok);
        return tokens;
    }

    std::size_t line() const { return pos_; }

private:
    std::vector<std::string> lines_;
    std::size_t pos_ = 0;
};

double scalar(LineReader& r, const std::string& key) {
    const auto t = r.expect(key);
    if (t.size() != 1) fail(ErrorKind::parse, "'" + key + "' takes one value");
    return detail::parse_double(t[0], key);
}

int count(LineReader& r, const std::string& key) {
    const auto t = r.expect(key);
    if (t.size() != 1) fail(ErrorKind::parse, "'" + key + "' takes one value");
    const long long v = detail::parse_int(t[0], key);
    if (v < 0 || v > 1'000'000) fail(ErrorKind::parse, "'" + key + "' out of range");
    return static_cast<int>(v);
}

Eigen::VectorXd real_vector(LineReader& r, const std::string& key, int n) {
    const auto t = r.expect(key);
    if (static_cast<int>(t.size()) != n)
        fail(ErrorKind::parse, "'" + key + "' expects " + std::to_string(n) + " values, got " + std::to_string(t.size()));
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v(i) = detail::parse_double(t[static_cast<std::size_t>(i)], key);
    return v;
}

std::vector<bool> flags(LineReader& r, const std::string& key, int n) {
    const auto t = r.expect(key);
    if (static_cast<int>(t.size()) != n) fail(ErrorKind::parse, "'" + key + "' expects " + std::to_string(n) + " flags");
    std::vector<bool> out;
    for (const auto& s : t) {
        if (s != "0" && s != "1") fail(ErrorKind::parse, "'" + key + "' flags must be 0 or 1");
        out.push_back(s == "1");
    }
    return out;
}

CMatrix complex_matrix(LineReader& r, const std::string& key, int rows, int cols) {
    r.expect(key);
    CMatrix m(rows, cols);
    for (int i = 0; i < rows; ++i) {
        const auto t = r.row();
        if (static_cast<int>(t.size()) != 2 * cols)
            fail(ErrorKind::parse, "'" + key + "' row " + std::to_string(i) + " expects " + std::to_string(2 * cols) +
                                       " values");
        for (int j = 0; j < cols; ++j)
            m(i, j) = {detail::parse_double(t[static_cast<std::size_t>(2 * j)], key),
                       detail::parse_double(t[static_cast<std::size_t>(2 * j + 1)], key)};
    }
    return m;
}

void put_scalar(std::string& out, const std::string& key, double v) {
    out += key + ' ' + detail::format_double(v) + '\n';
}

void put_vector(std::string& out, const std::string& key, const Eigen::VectorXd& v) {
    out += key;
    for (int i = 0; i < v.size(); ++i) out += ' ' + detail::format_double(v(i));
    out += '\n';
}

void put_flags(std::string& out, const std::string& key, const std::vector<bool>& f) {
    out += key;
    for (const bool b : f) out += b ? " 1" : " 0";
    out += '\n';
}

void put_matrix(std::string& out, const std::string& key, const CMatrix& m) {
    out += key + '\n';
    for (int i = 0; i < m.rows(); ++i) {
        for (int j = 0; j < m.cols(); ++j) {
            if (j > 0) out += ' ';
            out += detail::format_double(m(i, j).real()) + ' ' + detail::format_double(m(i, j).imag());
        }
        out += '\n';
    }
}

}  // namespace

std::string format_snapshot(const SnapshotProblem& p) {
    std::string out = "hapbeam-snapshot 1\n";
    out += "users " + std::to_string(p.users()) + '\n';
    out += "chains " + std::to_string(p.chains()) + '\n';
    out += "antennas " + std::to_string(p.analog.rows()) + '\n';
    put_scalar(out, "p_max", p.p_max);
    put_scalar(out, "noise_power", p.noise_power);
    put_scalar(out, "bandwidth", p.bandwidth);
    put_scalar(out, "circuit_power", p.circuit_power);
    put_vector(out, "r_min", p.r_min);
    std::vector<bool> cert(static_cast<std::size_t>(p.users()));
    for (int k = 0; k < p.users(); ++k) cert[static_cast<std::size_t>(k)] = p.is_certified(k);
    put_flags(out, "certified", cert);
    put_vector(out, "sigma_xi", p.sigma_xi);
    put_matrix(out, "h_eff", p.h_eff);
    put_matrix(out, "analog", p.analog);
    return out;
}

SnapshotProblem parse_snapshot(const std::string& text) {
    LineReader r(text);
    const auto version = r.expect("hapbeam-snapshot");
    if (version.size() != 1 || version[0] != "1") fail(ErrorKind::parse, "unsupported snapshot version");
    SnapshotProblem p;
    const int k = count(r, "users");
    const int n = count(r, "chains");
    const int m = count(r, "antennas");
    p.p_max = scalar(r, "p_max");
    p.noise_power = scalar(r, "noise_power");
    p.bandwidth = scalar(r, "bandwidth");
    p.circuit_power = scalar(r, "circuit_power");
    p.r_min = real_vector(r, "r_min", k);
    p.certified = flags(r, "certified", k);
    {
        const auto t = r.expect("sigma_xi");
        if (!t.empty() && static_cast<int>(t.size()) != k) fail(ErrorKind::parse, "'sigma_xi' expects 0 or K values");
        p.sigma_xi.resize(static_cast<Eigen::Index>(t.size()));
        for (std::size_t i = 0; i < t.size(); ++i)
            p.sigma_xi(static_cast<Eigen::Index>(i)) = detail::parse_double(t[i], "sigma_xi");
    }
    p.h_eff = complex_matrix(r, "h_eff", k, n);
    p.analog = complex_matrix(r, "analog", m, m > 0 ? n : 0);
    if (m == 0) p.analog.resize(0, 0);
    p.validate();
    return p;
}

std::string format_solution(const BeamSolution& s) {
    std::string out = "hapbeam-solution 1\n";
    out += "users " + std::to_string(s.d.cols()) + '\n';
    out += "chains " + std::to_string(s.d.rows()) + '\n';
    put_flags(out, "admitted", s.admitted);
    out += std::string("feasible ") + (s.feasible ? "1" : "0") + '\n';
    put_scalar(out, "power", s.power);
    put_scalar(out, "nu", s.nu);
    put_scalar(out, "qar", s.qar);
    put_scalar(out, "sum_rate", s.sum_rate);
    put_scalar(out, "ee", s.ee);
    put_vector(out, "sinr", s.sinr);
    put_vector(out, "rate", s.rate);
    put_matrix(out, "d", s.d);
    return out;
}

BeamSolution parse_solution(const std::string& text) {
    LineReader r(text);
    const auto version = r.expect("hapbeam-solution");
    if (version.size() != 1 || version[0] != "1") fail(ErrorKind::parse, "unsupported solution version");
    BeamSolution s;
    const int k = count(r, "users");
    const int n = count(r, "chains");
    s.admitted = flags(r, "admitted", k);
    s.feasible = flags(r, "feasible", 1)[0];
    s.power = scalar(r, "power");
    s.nu = scalar(r, "nu");
    s.qar = scalar(r, "qar");
    s.sum_rate = scalar(r, "sum_rate");
    s.ee = scalar(r, "ee");
    s.sinr = real_vector(r, "sinr", k);
    s.rate = real_vector(r, "rate", k);
    s.d = complex_matrix(r, "d", n, k);
    return s;
}

void write_snapshot(const std::filesystem::path& path, const SnapshotProblem& problem) {
    detail::write_text(path, format_snapshot(problem));
}

SnapshotProblem read_snapshot(const std::filesystem::path& path) {
    std::string text;
    for (const auto& line : detail::read_lines(path)) text += line + '\n';
    return parse_snapshot(text);
}

}  // namespace hapbeam
