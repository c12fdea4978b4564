// Copyright 2026 The pdcsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Shared setups for the unit tests: the reference type-II waveguide at
// reduced resolution plus a few small numeric helpers.

#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "pdcsim/error.hpp"
#include "pdcsim/physics.hpp"

namespace pdcsim::testing {

inline PdcSetup reference_setup(int points, double gamma, double alpha_signal_db = 0.0,
                                double alpha_idler_db = 0.0, double half_span_thz = 4.0) {
    PdcSetup s;
    s.pump.center_wavelength = 755e-9;
    s.pump.fwhm_duration = 0.5e-12;
    const double wp = s.pump.center_omega();
    const double vgp = 0.9 * kSpeedOfLight / 1.9;
    s.waveguide.length = 0.01;
    s.waveguide.pump = {1.9, vgp, wp};
    s.waveguide.signal = {1.9, 0.95 * vgp, 0.5 * wp};
    s.waveguide.idler = {1.8, vgp, 0.5 * wp};
    s.waveguide.k_qpm =
        qpm_wavevector(s.waveguide.pump, s.waveguide.signal, s.waveguide.idler, wp);
    s.waveguide.alpha_signal = loss_db_per_cm_to_si(alpha_signal_db);
    s.waveguide.alpha_idler = loss_db_per_cm_to_si(alpha_idler_db);
    s.waveguide.gamma = gamma;
    s.grid = FrequencyGrid::centered(0.5 * wp, 2.0 * kPi * half_span_thz * 1e12, points);
    return s;
}

/// Haar-random unitary from the QR factorization of a complex Ginibre matrix.
inline Eigen::MatrixXcd random_unitary(int n, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    Eigen::MatrixXcd z(n, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) z(i, j) = {g(rng), g(rng)};
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(z);
    Eigen::MatrixXcd q = qr.householderQ();
    const Eigen::MatrixXcd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int j = 0; j < n; ++j) q.col(j) *= std::polar(1.0, std::arg(r(j, j)));
    return q;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::abs(b); }

/// Fresh scratch directory below the system temp dir.
inline std::string scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("pdcsim-unit-" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir.string();
}

/// Kind of the pdcsim::Error thrown by f, or empty when it returns normally.
inline std::optional<ErrorKind> kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    return std::nullopt;
}

}  // namespace pdcsim::testing
