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

// Python bindings: geometry helpers, the snapshot solver and experiment runs.

#include "hapbeam/error.hpp"
#include "hapbeam/geometry.hpp"
#include "hapbeam/harness.hpp"
#include "hapbeam/solver.hpp"

#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace hapbeam;

namespace {

py::dict summary_dict(const ModeSummary& s) {
    py::dict d;
    d["mode"] = to_string(s.mode);
    d["count"] = s.count;
    d["mean_qar"] = s.mean_qar;
    d["mean_sum_rate"] = s.mean_sum_rate;
    d["mean_ee"] = s.mean_ee;
    d["mean_power"] = s.mean_power;
    d["feasible_fraction"] = s.feasible_fraction;
    d["p95_sum_rate"] = s.p95_sum_rate;
    d["p99_sum_rate"] = s.p99_sum_rate;
    d["mean_pointing_err_deg"] = s.mean_pointing_err_deg;
    d["mean_certified"] = s.mean_certified;
    return d;
}

}  // namespace

PYBIND11_MODULE(_hapbeam, m) {
    m.doc() = "HAP downlink beamforming simulator";

    static py::exception<Error> error(m, "HapbeamError", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::set_error(error, e.what());
        }
    });

    py::class_<EulerZYX>(m, "EulerZYX")
        .def(py::init<>())
        .def(py::init([](double yaw, double pitch, double roll) { return EulerZYX{yaw, pitch, roll}; }),
             py::arg("yaw"), py::arg("pitch"), py::arg("roll"))
        .def_readwrite("yaw", &EulerZYX::yaw)
        .def_readwrite("pitch", &EulerZYX::pitch)
        .def_readwrite("roll", &EulerZYX::roll)
        .def("__repr__", [](const EulerZYX& a) {
            return "EulerZYX(yaw=" + std::to_string(a.yaw) + ", pitch=" + std::to_string(a.pitch) +
                   ", roll=" + std::to_string(a.roll) + ")";
        });

    // Rotations cross the boundary as 3x3 matrices; inputs are validated.
    m.def("euler_to_rotation", [](const EulerZYX& a) { return Mat3(euler_to_rotation(a).matrix()); },
          py::arg("angles"));
    m.def("rotation_to_euler", [](const Mat3& r) { return rotation_to_euler(Rotation::from_matrix(r)); },
          py::arg("rotation"));
    m.def("so3_exp", [](const Vec3& w) { return Mat3(so3_exp(w).matrix()); }, py::arg("w"));
    m.def(
        "rotation_log_vee",
        [](const Mat3& r_hat, const Mat3& r) {
            return Vec3(rotation_log_vee(Rotation::from_matrix(r_hat), Rotation::from_matrix(r)));
        },
        py::arg("r_hat"), py::arg("r"));
    m.def("wrap_pi", &wrap_pi, py::arg("angle"));

    py::class_<BeamSolution>(m, "BeamSolution")
        .def_property_readonly("admitted", [](const BeamSolution& s) { return std::vector<bool>(s.admitted); })
        .def_readonly("d", &BeamSolution::d)
        .def_readonly("sinr", &BeamSolution::sinr)
        .def_readonly("rate", &BeamSolution::rate)
        .def_readonly("power", &BeamSolution::power)
        .def_readonly("feasible", &BeamSolution::feasible)
        .def_readonly("qar", &BeamSolution::qar)
        .def_readonly("sum_rate", &BeamSolution::sum_rate)
        .def_readonly("ee", &BeamSolution::ee);

    m.def(
        "solve_snapshot",
        [](const CMatrix& h_eff, const Eigen::VectorXd& r_min, double p_max, double noise_power, double bandwidth,
           double circuit_power, const std::vector<bool>& certified) {
            SnapshotProblem p;
            p.h_eff = h_eff;
            p.r_min = r_min;
            p.p_max = p_max;
            p.noise_power = noise_power;
            p.bandwidth = bandwidth;
            p.circuit_power = circuit_power;
            p.certified = certified;
            py::gil_scoped_release release;
            return solve_snapshot(p);
        },
        py::arg("h_eff"), py::arg("r_min"), py::arg("p_max") = 1.0, py::arg("noise_power") = 1.0,
        py::arg("bandwidth") = 1.0, py::arg("circuit_power") = 0.0, py::arg("certified") = std::vector<bool>{},
        "Solves one snapshot. Rows of h_eff are the users' effective channels (conjugated).");

    m.def("default_config", [] { return config_to_json(ScenarioConfig{}); },
          "Default scenario configuration as JSON text.");

    m.def(
        "run_experiment",
        [](const std::string& config_json) {
            const ScenarioConfig c = parse_config(config_json);
            RunResult r;
            {
                py::gil_scoped_release release;
                r = run_experiment(c);
            }
            py::list summary;
            for (const auto& s : r.summary) summary.append(summary_dict(s));
            py::dict out;
            out["summary"] = summary;
            out["snapshots_csv"] = snapshots_csv(r.records);
            out["coverage_stride1"] = r.coverage_stride1;
            out["coverage_stride_h"] = r.coverage_stride_h;
            out["calibration_radius_rad"] = r.calibration.delta_omega;
            return out;
        },
        py::arg("config_json") = "{}",
        "Runs a scenario given as JSON text; unknown keys are rejected.");
}
