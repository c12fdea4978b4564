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

// Observables of the propagated state: spectra, temporal profiles, JSI,
// click statistics behind a beamsplitter, HOM scans and g2.

#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "pdcsim/gaussian.hpp"
#include "pdcsim/physics.hpp"

namespace pdcsim {

enum class Subsystem { signal, idler };

const char* to_string(Subsystem s) noexcept;

struct SpectralResult {
    Eigen::VectorXd detuning_thz;  // nu - nu_p/2
    Eigen::VectorXd signal;        // photons per bin
    Eigen::VectorXd idler;
    double total_signal = 0.0;
    double total_idler = 0.0;
};

SpectralResult spectrum(const CorrelationState& state);

struct TemporalProfile {
    Eigen::VectorXd times;  // s, relative to the pump peak
    Eigen::VectorXd signal;
    Eigen::VectorXd idler;
    Eigen::VectorXd pump;  // |E_p|^2, peak 1
};

/// I(t) = sum_nm xi_n xi_m <c_n^dag c_m> exp(i (omega_n - omega_m) t) with
/// xi(omega) = sqrt(omega / n(omega)); the constant hbar / (2 eps0 c T) is 1.
TemporalProfile temporal_intensity(const CorrelationState& state, const PdcSetup& setup,
                                   std::span<const double> times);

/// JSI(n, m) = |<a_n b_m>|^2 + <n_a(n)> <n_b(m)> + |<a_n^dag b_m>|^2.
Eigen::MatrixXd jsi(const CorrelationState& state);

/// U(tau) = BS * diag(1, V(tau)), V = diag(exp(i omega_n tau)).
Eigen::MatrixXcd hom_unitary(const FrequencyGrid& grid, double tau);

struct ClickProbabilities {
    double p_c = 0.0;
    double p_d = 0.0;
    double p_cd = 0.0;
    double log_q_c = 0.0;
    double log_q_d = 0.0;
    double log_q_cd = 0.0;
    /// log q_cd - log q_c - log q_d, evaluated without the cancellation of
    /// the explicit difference.
    double log_correlation = 0.0;
};

/// Click statistics of two on-off detectors watching arm c (modes 0..N-1)
/// and arm d (modes N..2N-1).
ClickProbabilities click_probabilities(const CorrelationState& state);

struct HomScanResult {
    std::vector<double> delays;  // s, relative to delay_offset
    double delay_offset = 0.0;   // s, idler delay applied at delays = 0
    std::vector<double> p_cd;
    std::vector<double> p_c;
    std::vector<double> p_d;
    double plateau = 0.0;  // mean P_cd over the outermost 10% of the window
    double minimum = 0.0;
    double visibility = 0.0;    // (plateau - minimum) / plateau
    double dip_fwhm = 0.0;      // s, width of the dip at half depth
    double dip_position = 0.0;  // s, relative delay of the minimum
    double peak = 0.0;          // max P_cd
};

/// Scans idler delays delay_offset + delays[k].
HomScanResult hom_scan(const CorrelationState& state, std::span<const double> delays,
                       double delay_offset = 0.0);

/// Idler delay that cancels the mean signal-idler group delay of pairs
/// generated uniformly along the waveguide: L (n_g,s - n_g,i) / (2c).
double walkoff_delay_offset(const PdcSetup& setup);

struct G2Result {
    double g2_click = 0.0;
    double g2_moment = 0.0;
    Subsystem subsystem = Subsystem::signal;
};

/// P_cd / (P_c P_d) after mixing the subsystem with vacuum on a 50:50 splitter.
double g2_click(const CorrelationState& state, Subsystem subsystem);
/// 1 + Tr(D^2) / (Tr D)^2 of the subsystem block.
double g2_moment(const CorrelationState& state, Subsystem subsystem);
G2Result g2(const CorrelationState& state, Subsystem subsystem);

/// Replaces the complementary band by vacuum.
CorrelationState isolate_subsystem(const CorrelationState& state, Subsystem keep);

inline constexpr double kClickFloor = 1e-300;

}  // namespace pdcsim
