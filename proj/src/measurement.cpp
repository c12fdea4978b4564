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

#include "pdcsim/measurement.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "pdcsim/error.hpp"

namespace pdcsim {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXd;

const char* to_string(Subsystem s) noexcept {
    return s == Subsystem::signal ? "signal" : "idler";
}

SpectralResult spectrum(const CorrelationState& state) {
    const int n = state.modes_per_band();
    SpectralResult out;
    out.detuning_thz.resize(n);
    out.signal = state.d_signal().diagonal().real();
    out.idler = state.d_idler().diagonal().real();
    const double wc = state.grid.center();
    for (int m = 0; m < n; ++m) {
        out.detuning_thz[m] = (state.grid.omega(m) - wc) / (2.0 * kPi) * 1e-12;
    }
    out.total_signal = out.signal.sum();
    out.total_idler = out.idler.sum();
    return out;
}

namespace {

VectorXd quadratic_profile(const MatrixXcd& d, const MatrixXcd& basis) {
    // I(t) = u(t)^dag D u(t) for every column u(t) of the basis.
    const MatrixXcd du = d * basis;
    return (basis.conjugate().cwiseProduct(du)).colwise().sum().real().transpose();
}

}  // namespace

TemporalProfile temporal_intensity(const CorrelationState& state, const PdcSetup& setup,
                                   std::span<const double> times) {
    const int n = state.modes_per_band();
    const auto nt = static_cast<Eigen::Index>(times.size());
    const double wc = state.grid.center();
    const auto& wg = setup.waveguide;

    MatrixXcd basis_s(n, nt), basis_i(n, nt);
    for (int m = 0; m < n; ++m) {
        const double w = state.grid.omega(m);
        const double xi_s = std::sqrt(w / refractive_index(wg.signal, w));
        const double xi_i = std::sqrt(w / refractive_index(wg.idler, w));
        for (Eigen::Index k = 0; k < nt; ++k) {
            const Complex phase = std::polar(1.0, -(w - wc) * times[static_cast<size_t>(k)]);
            basis_s(m, k) = xi_s * phase;
            basis_i(m, k) = xi_i * phase;
        }
    }

    TemporalProfile out;
    out.times = Eigen::Map<const VectorXd>(times.data(), nt);
    out.signal = quadratic_profile(state.d_signal(), basis_s);
    out.idler = quadratic_profile(state.d_idler(), basis_i);

    // Pump on the sum-frequency grid, propagated to state.z in its own retarded frame.
    const double wp = setup.pump.center_omega();
    const double kp0 = wavevector(wg.pump, wp);
    const double inv_vg = 1.0 / wg.pump.group_velocity;
    out.pump.resize(nt);
    Complex peak{0.0, 0.0};
    std::vector<Complex> amp;
    std::vector<double> dw;
    for (int k = 0; k <= 2 * (n - 1); ++k) {
        const double w = 2.0 * state.grid.omega_0 + k * state.grid.delta_omega;
        const double phi = (wavevector(wg.pump, w) - kp0 - (w - wp) * inv_vg) * state.z;
        const Complex s = pump_spectrum(setup.pump, w);
        amp.push_back(s * std::polar(1.0, phi));
        dw.push_back(w - wp);
        peak += s;
    }
    const double norm = std::norm(peak);
    for (Eigen::Index t = 0; t < nt; ++t) {
        Complex field{0.0, 0.0};
        for (size_t k = 0; k < amp.size(); ++k) {
            field += amp[k] * std::polar(1.0, -dw[k] * times[static_cast<size_t>(t)]);
        }
        out.pump[t] = norm > 0.0 ? std::norm(field) / norm : 0.0;
    }
    return out;
}

MatrixXd jsi(const CorrelationState& state) {
    const int n = state.modes_per_band();
    const VectorXd na = state.d_signal().diagonal().real();
    const VectorXd nb = state.d_idler().diagonal().real();
    MatrixXd out = state.c_cross().cwiseAbs2();
    out += na * nb.transpose();
    out += state.d.topRightCorner(n, n).cwiseAbs2();
    return out;
}

MatrixXcd hom_unitary(const FrequencyGrid& grid, double tau) {
    const int n = grid.n_points;
    const double r = 1.0 / std::sqrt(2.0);
    MatrixXcd u = MatrixXcd::Zero(2 * n, 2 * n);
    for (int m = 0; m < n; ++m) {
        const Complex v = std::polar(1.0, grid.omega(m) * tau);
        u(m, m) = r;
        u(m, n + m) = r * v;
        u(n + m, m) = r;
        u(n + m, n + m) = -r * v;
    }
    return u;
}

namespace {

// Rows of the quadrature ordering (q_1..q_M, p_1..p_M) that belong to modes
// [first, first + count).
std::vector<Eigen::Index> quadrature_rows(Eigen::Index first, Eigen::Index count, Eigen::Index m) {
    std::vector<Eigen::Index> rows;
    for (Eigen::Index k = 0; k < count; ++k) rows.push_back(first + k);
    for (Eigen::Index k = 0; k < count; ++k) rows.push_back(m + first + k);
    return rows;
}

}  // namespace

ClickProbabilities click_probabilities(const CorrelationState& state) {
    const Eigen::Index n = state.modes_per_band();
    // With A = 1 + (sigma - 1)/2 = [[A_c, B], [B^T, A_d]] the no-click
    // probabilities are q = det(A)^(-1/2) of the matching blocks.
    const MatrixXd y = 0.5 * covariance_from_correlations(state).excess();
    const auto rc = quadrature_rows(0, n, 2 * n);
    const auto rd = quadrature_rows(n, n, 2 * n);
    const MatrixXd y_c = y(rc, rc);
    const MatrixXd y_d = y(rd, rd);
    const MatrixXd b = y(rc, rd);

    ClickProbabilities p;
    p.log_q_c = -0.5 * log_det_unit_plus(y_c);
    p.log_q_d = -0.5 * log_det_unit_plus(y_d);
    // log q_cd - log q_c - log q_d = -1/2 log det(1 - T) with the Schur
    // complement T = L_d^-1 B^T A_c^-1 B L_d^-T. Taking it from B directly
    // avoids subtracting log fidelities of nearly equal size, which would
    // lose all precision in P_cd at low photon numbers.
    double connected = 0.0;
    if (b.cwiseAbs().maxCoeff() > 0.0) {
        const Eigen::LLT<MatrixXd> chol_c(MatrixXd::Identity(y_c.rows(), y_c.cols()) + y_c);
        const Eigen::LLT<MatrixXd> chol_d(MatrixXd::Identity(y_d.rows(), y_d.cols()) + y_d);
        if (chol_c.info() != Eigen::Success || chol_d.info() != Eigen::Success) {
            fail(ErrorKind::numerical, "sigma + 1 is not positive definite");
        }
        const MatrixXd w = chol_c.matrixL().solve(b);
        const MatrixXd v = chol_d.matrixL().solve(w.transpose());
        connected = -0.5 * log_det_unit_plus(-(v * v.transpose()));
    }
    p.log_correlation = connected;
    p.log_q_cd = p.log_q_c + p.log_q_d + connected;
    p.p_c = -std::expm1(p.log_q_c);
    p.p_d = -std::expm1(p.log_q_d);
    // 1 + q_cd - q_c - q_d = P_c P_d + q_c q_d (q_cd / (q_c q_d) - 1)
    p.p_cd = p.p_c * p.p_d + std::exp(p.log_q_c + p.log_q_d) * std::expm1(connected);
    return p;
}

double walkoff_delay_offset(const PdcSetup& setup) {
    const auto& wg = setup.waveguide;
    return wg.length * (wg.signal.group_index() - wg.idler.group_index()) / (2.0 * kSpeedOfLight);
}

HomScanResult hom_scan(const CorrelationState& state, std::span<const double> delays,
                       double delay_offset) {
    if (delays.empty()) fail(ErrorKind::domain, "hom_scan: empty delay list");
    HomScanResult out;
    out.delay_offset = delay_offset;
    out.delays.assign(delays.begin(), delays.end());
    for (double tau : delays) {
        const CorrelationState mixed =
            apply_unitary(state, hom_unitary(state.grid, delay_offset + tau));
        const ClickProbabilities p = click_probabilities(mixed);
        out.p_cd.push_back(p.p_cd);
        out.p_c.push_back(p.p_c);
        out.p_d.push_back(p.p_d);
    }

    const auto [lo_it, hi_it] = std::minmax_element(out.delays.begin(), out.delays.end());
    const double mid = 0.5 * (*lo_it + *hi_it);
    const double half = 0.5 * (*hi_it - *lo_it);
    double sum = 0.0;
    int count = 0;
    for (size_t k = 0; k < out.delays.size(); ++k) {
        if (std::abs(out.delays[k] - mid) >= 0.9 * half) {
            sum += out.p_cd[k];
            ++count;
        }
    }
    out.plateau = count > 0 ? sum / count : 0.0;
    const auto min_it = std::min_element(out.p_cd.begin(), out.p_cd.end());
    const auto kmin = static_cast<size_t>(min_it - out.p_cd.begin());
    out.minimum = *min_it;
    out.peak = *std::max_element(out.p_cd.begin(), out.p_cd.end());
    out.dip_position = out.delays[kmin];
    if (out.plateau <= 0.0) return out;
    out.visibility = std::clamp((out.plateau - out.minimum) / out.plateau, 0.0, 1.0);

    // Width at half depth of the normalized dip, linear interpolation between samples.
    const double level = 1.0 - 0.5 * out.visibility;
    auto normalized = [&](size_t k) { return out.p_cd[k] / out.plateau; };
    double left = out.delays.front();
    for (size_t k = kmin; k > 0; --k) {
        if (normalized(k - 1) >= level) {
            const double f = (level - normalized(k)) / (normalized(k - 1) - normalized(k));
            left = out.delays[k] + f * (out.delays[k - 1] - out.delays[k]);
            break;
        }
    }
    double right = out.delays.back();
    for (size_t k = kmin; k + 1 < out.delays.size(); ++k) {
        if (normalized(k + 1) >= level) {
            const double f = (level - normalized(k)) / (normalized(k + 1) - normalized(k));
            right = out.delays[k] + f * (out.delays[k + 1] - out.delays[k]);
            break;
        }
    }
    out.dip_fwhm = right - left;
    return out;
}

CorrelationState isolate_subsystem(const CorrelationState& state, Subsystem keep) {
    const int n = state.modes_per_band();
    CorrelationState out = state;
    const int drop = keep == Subsystem::signal ? n : 0;
    out.d.middleRows(drop, n).setZero();
    out.d.middleCols(drop, n).setZero();
    out.c.middleRows(drop, n).setZero();
    out.c.middleCols(drop, n).setZero();
    return out;
}

double g2_click(const CorrelationState& state, Subsystem subsystem) {
    const CorrelationState mixed =
        apply_unitary(isolate_subsystem(state, subsystem), hom_unitary(state.grid, 0.0));
    const ClickProbabilities p = click_probabilities(mixed);
    if (!(p.p_c * p.p_d >= kClickFloor)) {
        fail(ErrorKind::gain_too_low, "g2_click: click probabilities below floor");
    }
    // P_cd / (P_c P_d) = 1 + q_c q_d (q_cd / (q_c q_d) - 1) / (P_c P_d)
    return 1.0 + std::exp(p.log_q_c + p.log_q_d) * std::expm1(p.log_correlation) / (p.p_c * p.p_d);
}

double g2_moment(const CorrelationState& state, Subsystem subsystem) {
    const MatrixXcd block = subsystem == Subsystem::signal ? MatrixXcd(state.d_signal())
                                                           : MatrixXcd(state.d_idler());
    const double trace = block.trace().real();
    if (!(trace > 0.0)) fail(ErrorKind::domain, "g2_moment: subsystem is in vacuum");
    return 1.0 + block.squaredNorm() / (trace * trace);
}

G2Result g2(const CorrelationState& state, Subsystem subsystem) {
    return {g2_click(state, subsystem), g2_moment(state, subsystem), subsystem};
}

}  // namespace pdcsim
