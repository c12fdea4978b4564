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

// Waveguide, pump and frequency-grid description of pulsed type-II PDC,
// plus the coupling matrices that drive the correlation master equation.
//
// Everything here is SI: angular frequencies in rad/s, lengths in m,
// loss coefficients as intensity rates in 1/m.

#pragma once

#include <complex>

#include <Eigen/Dense>

namespace pdcsim {

using Complex = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kSpeedOfLight = 299792458.0;  // m/s

/// Uniform angular-frequency axis omega_m = omega_0 + m * delta_omega.
struct FrequencyGrid {
    double omega_0 = 0.0;
    double delta_omega = 0.0;
    int n_points = 0;

    /// Grid of n points spanning [center - half_span, center + half_span].
    static FrequencyGrid centered(double omega_center, double half_span, int n_points);

    double omega(int m) const { return omega_0 + m * delta_omega; }
    double center() const { return omega_0 + 0.5 * (n_points - 1) * delta_omega; }
    /// T = 2 pi / delta_omega.
    double quantization_time() const { return 2.0 * kPi / delta_omega; }
    Eigen::VectorXd omegas() const;

    void validate() const;
};

/// First-order expansion of the refractive index around omega_ref.
struct DispersionBranch {
    double n_ref = 1.0;
    double group_velocity = kSpeedOfLight;  // m/s
    double omega_ref = 1.0;                 // rad/s

    double group_index() const { return kSpeedOfLight / group_velocity; }
    void validate() const;
};

double refractive_index(const DispersionBranch& branch, double omega);
double wavevector(const DispersionBranch& branch, double omega);

struct PumpPulse {
    double center_wavelength = 0.0;  // m
    double fwhm_duration = 0.0;      // intensity FWHM, s

    double center_omega() const { return 2.0 * kPi * kSpeedOfLight / center_wavelength; }
    /// FWHM of |S|^2 in ordinary frequency (Hz) for a transform-limited Gaussian.
    double spectral_fwhm() const;
    void validate() const;
};

/// Transform-limited Gaussian amplitude with max |S| = 1 at the pump carrier.
Complex pump_spectrum(const PumpPulse& pulse, double omega);

struct WaveguideSpec {
    double length = 0.0;  // m
    DispersionBranch pump;
    DispersionBranch signal;
    DispersionBranch idler;
    double alpha_signal = 0.0;  // 1/m, intensity
    double alpha_idler = 0.0;   // 1/m, intensity
    double k_qpm = 0.0;         // 1/m
    double gamma = 0.0;         // 1/m, multiplies the unit-peak pump spectrum

    void validate() const;
};

/// k_QPM that phase-matches the degenerate process omega_p -> omega_p/2 + omega_p/2,
/// i.e. (omega_p / 2c) (2 n_p - n_s - n_i) with indices taken at omega_p and omega_p/2.
double qpm_wavevector(const DispersionBranch& pump, const DispersionBranch& signal,
                      const DispersionBranch& idler, double omega_pump);

/// dB/cm of power loss to the intensity decay rate alpha in 1/m.
double loss_db_per_cm_to_si(double alpha_db_per_cm);
double loss_si_to_db_per_cm(double alpha_per_m);

/// Complete physical description of one simulation.
struct PdcSetup {
    WaveguideSpec waveguide;
    PumpPulse pump;
    FrequencyGrid grid;

    void validate() const;
    int modes_per_band() const { return grid.n_points; }
};

/// J_ij(z) = S(omega_i + omega_j) exp(i (k_p(omega_i + omega_j) - k_QPM) z).
Eigen::MatrixXcd coupling_matrix_J(const PdcSetup& setup, double z);

/// Linear propagation constants and the coupling matrix of the master equation.
struct LinearCoupling {
    Eigen::VectorXcd kappa;  // diagonal of K, 2N entries, kappa = k + i alpha / 2
    Eigen::MatrixXcd m;      // 2N x 2N, [[0, J], [J^T, 0]]

    Eigen::MatrixXcd k_matrix() const { return kappa.asDiagonal(); }
};

LinearCoupling assemble_K_and_M(const PdcSetup& setup, double z);

/// Phase mismatch Delta k_nm = k_p(omega_n + omega_m) - k_QPM - k_s(omega_n) - k_i(omega_m).
Eigen::MatrixXd phase_mismatch(const PdcSetup& setup);

/// Pump amplitudes S(omega_n + omega_m) on the signal x idler grid.
Eigen::MatrixXd pump_envelope_matrix(const PdcSetup& setup);

}  // namespace pdcsim
