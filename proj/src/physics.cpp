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

#include "pdcsim/physics.hpp"

#include <cmath>
#include <string>

#include "pdcsim/error.hpp"

namespace pdcsim {

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) fail(ErrorKind::domain, what);
}

}  // namespace

FrequencyGrid FrequencyGrid::centered(double omega_center, double half_span, int n_points) {
    require(n_points >= 2, "frequency grid needs at least 2 points");
    require(half_span > 0.0, "frequency grid half span must be positive");
    FrequencyGrid grid;
    grid.delta_omega = 2.0 * half_span / (n_points - 1);
    grid.omega_0 = omega_center - half_span;
    grid.n_points = n_points;
    return grid;
}

Eigen::VectorXd FrequencyGrid::omegas() const {
    Eigen::VectorXd w(n_points);
    for (int m = 0; m < n_points; ++m) w[m] = omega(m);
    return w;
}

void FrequencyGrid::validate() const {
    require(n_points >= 2, "frequency grid needs at least 2 points");
    require(delta_omega > 0.0, "frequency grid spacing must be positive");
    require(omega_0 > 0.0, "frequency grid must start at a positive frequency");
}

void DispersionBranch::validate() const {
    require(n_ref > 0.0, "refractive index must be positive");
    require(group_velocity > 0.0 && group_velocity < kSpeedOfLight,
            "group velocity must lie in (0, c)");
    require(omega_ref > 0.0, "reference frequency must be positive");
}

double refractive_index(const DispersionBranch& branch, double omega) {
    require(omega > 0.0, "refractive_index: omega must be positive");
    const double bracket = kSpeedOfLight / branch.group_velocity - branch.n_ref;
    return branch.n_ref + (omega - branch.omega_ref) / branch.omega_ref * bracket;
}

double wavevector(const DispersionBranch& branch, double omega) {
    return refractive_index(branch, omega) * omega / kSpeedOfLight;
}

double PumpPulse::spectral_fwhm() const {
    return 2.0 * std::log(2.0) / kPi / fwhm_duration;
}

void PumpPulse::validate() const {
    require(center_wavelength > 0.0, "pump wavelength must be positive");
    require(fwhm_duration > 0.0, "pump duration must be positive");
}

Complex pump_spectrum(const PumpPulse& pulse, double omega) {
    // |S|^2 = exp(-4 ln2 nu^2 / dnu^2)  =>  S = exp(-2 ln2 nu^2 / dnu^2)
    const double nu = (omega - pulse.center_omega()) / (2.0 * kPi);
    const double dnu = pulse.spectral_fwhm();
    return {std::exp(-2.0 * std::log(2.0) * nu * nu / (dnu * dnu)), 0.0};
}

void WaveguideSpec::validate() const {
    require(length > 0.0, "waveguide length must be positive");
    require(alpha_signal >= 0.0 && alpha_idler >= 0.0, "loss coefficients must be non-negative");
    require(gamma >= 0.0, "coupling strength must be non-negative");
    pump.validate();
    signal.validate();
    idler.validate();
}

double qpm_wavevector(const DispersionBranch& pump, const DispersionBranch& signal,
                      const DispersionBranch& idler, double omega_pump) {
    const double n_p = refractive_index(pump, omega_pump);
    const double n_s = refractive_index(signal, 0.5 * omega_pump);
    const double n_i = refractive_index(idler, 0.5 * omega_pump);
    return omega_pump / (2.0 * kSpeedOfLight) * (2.0 * n_p - n_s - n_i);
}

double loss_db_per_cm_to_si(double alpha_db_per_cm) {
    require(alpha_db_per_cm >= 0.0, "loss in dB/cm must be non-negative");
    return alpha_db_per_cm * 100.0 * std::log(10.0) / 10.0;
}

double loss_si_to_db_per_cm(double alpha_per_m) {
    require(alpha_per_m >= 0.0, "loss rate must be non-negative");
    return alpha_per_m * 10.0 / (100.0 * std::log(10.0));
}

void PdcSetup::validate() const {
    waveguide.validate();
    pump.validate();
    grid.validate();
}

namespace {

void require_position(const PdcSetup& setup, double z) {
    if (!(z >= 0.0 && z <= setup.waveguide.length)) {
        fail(ErrorKind::domain, "position z=" + std::to_string(z) + " outside [0, L]");
    }
}

}  // namespace

Eigen::MatrixXd pump_envelope_matrix(const PdcSetup& setup) {
    const int n = setup.grid.n_points;
    Eigen::MatrixXd s(n, n);
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            s(i, j) = pump_spectrum(setup.pump, setup.grid.omega(i) + setup.grid.omega(j)).real();
        }
    }
    return s;
}

Eigen::MatrixXcd coupling_matrix_J(const PdcSetup& setup, double z) {
    require_position(setup, z);
    const int n = setup.grid.n_points;
    const auto& wg = setup.waveguide;
    Eigen::MatrixXcd j(n, n);
    for (int col = 0; col < n; ++col) {
        for (int row = 0; row < n; ++row) {
            const double w = setup.grid.omega(row) + setup.grid.omega(col);
            const double phase = (wavevector(wg.pump, w) - wg.k_qpm) * z;
            j(row, col) = pump_spectrum(setup.pump, w) * std::polar(1.0, phase);
        }
    }
    return j;
}

LinearCoupling assemble_K_and_M(const PdcSetup& setup, double z) {
    const int n = setup.grid.n_points;
    const auto& wg = setup.waveguide;
    LinearCoupling out;
    out.kappa.resize(2 * n);
    for (int m = 0; m < n; ++m) {
        const double w = setup.grid.omega(m);
        out.kappa[m] = Complex(wavevector(wg.signal, w), 0.5 * wg.alpha_signal);
        out.kappa[n + m] = Complex(wavevector(wg.idler, w), 0.5 * wg.alpha_idler);
    }
    const Eigen::MatrixXcd j = coupling_matrix_J(setup, z);
    out.m = Eigen::MatrixXcd::Zero(2 * n, 2 * n);
    out.m.topRightCorner(n, n) = j;
    out.m.bottomLeftCorner(n, n) = j.transpose();
    return out;
}

Eigen::MatrixXd phase_mismatch(const PdcSetup& setup) {
    const int n = setup.grid.n_points;
    const auto& wg = setup.waveguide;
    Eigen::VectorXd ks(n), ki(n);
    for (int m = 0; m < n; ++m) {
        ks[m] = wavevector(wg.signal, setup.grid.omega(m));
        ki[m] = wavevector(wg.idler, setup.grid.omega(m));
    }
    Eigen::MatrixXd dk(n, n);
    for (int col = 0; col < n; ++col) {
        for (int row = 0; row < n; ++row) {
            const double w = setup.grid.omega(row) + setup.grid.omega(col);
            dk(row, col) = wavevector(wg.pump, w) - wg.k_qpm - ks[row] - ki[col];
        }
    }
    return dk;
}

}  // namespace pdcsim
