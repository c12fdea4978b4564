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

#include "pdcsim/propagation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include <unsupported/Eigen/MatrixFunctions>

#include "pdcsim/error.hpp"

namespace pdcsim {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;

namespace {

constexpr Complex kI{0.0, 1.0};

using Rhs = std::function<MatrixXcd(double, const MatrixXcd&)>;
// Called after every accepted step; may modify the state (re-symmetrization).
using StepHook = std::function<void(double z, MatrixXcd& y, int step)>;

void check_finite(const MatrixXcd& y, int step, double z) {
    if (!y.allFinite()) {
        std::ostringstream msg;
        msg << "integration produced NaN/Inf at step " << step << " (z = " << z << " m)";
        fail(ErrorKind::numerical, msg.str());
    }
}

int run_rk4(const Rhs& f, MatrixXcd& y, double length, int steps, const StepHook& hook) {
    const double h = length / steps;
    for (int s = 0; s < steps; ++s) {
        const double z = s * h;
        const MatrixXcd k1 = f(z, y);
        const MatrixXcd k2 = f(z + 0.5 * h, y + (0.5 * h) * k1);
        const MatrixXcd k3 = f(z + 0.5 * h, y + (0.5 * h) * k2);
        const MatrixXcd k4 = f(z + h, y + h * k3);
        y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        const double z_next = (s + 1 == steps) ? length : (s + 1) * h;
        check_finite(y, s + 1, z_next);
        hook(z_next, y, s + 1);
    }
    return steps;
}

// Dormand-Prince 5(4) with relative max-norm error control.
std::pair<int, int> run_rk45(const Rhs& f, MatrixXcd& y, double length, double h0, double tol,
                             const StepHook& hook) {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                            a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                            b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static constexpr double e1 = b1 - 5179.0 / 57600, e3 = b3 - 7571.0 / 16695,
                            e4 = b4 - 393.0 / 640, e5 = b5 + 92097.0 / 339200,
                            e6 = b6 - 187.0 / 2100, e7 = -1.0 / 40;

    double z = 0.0;
    double h = h0;
    int accepted = 0;
    int rejected = 0;
    MatrixXcd k1 = f(z, y);
    while (z < length) {
        if (z + h > length) h = length - z;
        const MatrixXcd k2 = f(z + c2 * h, y + h * (a21 * k1));
        const MatrixXcd k3 = f(z + c3 * h, y + h * (a31 * k1 + a32 * k2));
        const MatrixXcd k4 = f(z + c4 * h, y + h * (a41 * k1 + a42 * k2 + a43 * k3));
        const MatrixXcd k5 =
            f(z + c5 * h, y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
        const MatrixXcd k6 =
            f(z + h, y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
        MatrixXcd y_new = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        const MatrixXcd k7 = f(z + h, y_new);
        const MatrixXcd err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
        const double scale =
            std::max(y.cwiseAbs().maxCoeff(), y_new.cwiseAbs().maxCoeff()) + 1e-300;
        const double err_norm = err.cwiseAbs().maxCoeff() / (tol * scale);
        if (!std::isfinite(err_norm)) {
            check_finite(y_new, accepted + 1, z + h);
            fail(ErrorKind::numerical, "adaptive integrator error estimate is not finite");
        }
        if (err_norm <= 1.0) {
            z = (length - (z + h) < 1e-15 * length) ? length : z + h;
            y = std::move(y_new);
            ++accepted;
            hook(z, y, accepted);
            k1 = f(z, y);  // the hook may have re-symmetrized y
        } else {
            ++rejected;
        }
        const double factor = err_norm > 0.0 ? 0.9 * std::pow(err_norm, -0.2) : 5.0;
        h *= std::clamp(factor, 0.2, 5.0);
        if (h < 1e-14 * length) fail(ErrorKind::numerical, "adaptive step size underflow");
    }
    return {accepted, rejected};
}

double relative_drift(const MatrixXcd& d) {
    const double scale = d.cwiseAbs().maxCoeff();
    if (scale == 0.0) return 0.0;
    return (d - d.adjoint()).cwiseAbs().maxCoeff() / scale;
}

// Memoizes J(z) for the last few positions; RK4 reuses the midpoint and the
// end point of a step.
class CouplingCache {
  public:
    CouplingCache(MatrixXd envelope, MatrixXd mismatch)
        : envelope_(std::move(envelope)), mismatch_(std::move(mismatch)) {}

    const MatrixXcd& at(double z) {
        for (auto& e : entries_) {
            if (e.valid && e.z == z) return e.j;
        }
        Entry& e = entries_[next_];
        next_ = (next_ + 1) % entries_.size();
        e.z = z;
        e.valid = true;
        e.j.resize(envelope_.rows(), envelope_.cols());
        for (Eigen::Index col = 0; col < envelope_.cols(); ++col) {
            for (Eigen::Index row = 0; row < envelope_.rows(); ++row) {
                e.j(row, col) = envelope_(row, col) * std::polar(1.0, mismatch_(row, col) * z);
            }
        }
        return e.j;
    }

  private:
    struct Entry {
        double z = 0.0;
        bool valid = false;
        MatrixXcd j;
    };
    MatrixXd envelope_;
    MatrixXd mismatch_;
    std::array<Entry, 3> entries_{};
    size_t next_ = 0;
};

// Per-mode phases of the output frame at position z (2N entries).
Eigen::VectorXd output_frame_phases(const PdcSetup& setup, double z) {
    const int n = setup.grid.n_points;
    const auto& wg = setup.waveguide;
    const double wc = setup.grid.center();
    const double inv_vg = 1.0 / wg.pump.group_velocity;
    const double ks_c = wavevector(wg.signal, wc);
    const double ki_c = wavevector(wg.idler, wc);
    Eigen::VectorXd phi(2 * n);
    for (int m = 0; m < n; ++m) {
        const double w = setup.grid.omega(m);
        const double delay = (w - wc) * inv_vg * z;
        phi[m] = (wavevector(wg.signal, w) - ks_c) * z - delay;
        phi[n + m] = (wavevector(wg.idler, w) - ki_c) * z - delay;
    }
    return phi;
}

}  // namespace

void IntegratorConfig::validate() const {
    if (step_count < 16) fail(ErrorKind::domain, "integrator needs at least 16 steps");
    if (!(tolerance > 0.0 && tolerance <= 1e-3)) {
        fail(ErrorKind::domain, "integrator tolerance must lie in (0, 1e-3]");
    }
}

CorrelationDerivative master_rhs(const MatrixXcd& d, const MatrixXcd& c, const VectorXcd& kappa,
                                 const MatrixXcd& m, double gamma) {
    const Eigen::Index dim = kappa.size();
    if (d.rows() != dim || d.cols() != dim || c.rows() != dim || c.cols() != dim ||
        m.rows() != dim || m.cols() != dim) {
        fail(ErrorKind::contract, "master_rhs: dimension mismatch");
    }
    CorrelationDerivative out;
    const MatrixXcd md = m * d;
    out.d = kI * (d * kappa.asDiagonal() - kappa.conjugate().asDiagonal() * d) +
            (kI * gamma) * (c.conjugate() * m.transpose() - m.conjugate() * c);
    out.c = kI * (c * kappa.asDiagonal() + kappa.asDiagonal() * c) +
            (kI * gamma) * ((md + m).transpose() + md);
    return out;
}

CorrelationDerivative master_rhs(const CorrelationState& state, const PdcSetup& setup) {
    const LinearCoupling lc = assemble_K_and_M(setup, state.z);
    return master_rhs(state.d, state.c, lc.kappa, lc.m, setup.waveguide.gamma);
}

Type2Derivative type2_rhs(const MatrixXcd& d_aa, const MatrixXcd& d_bb, const MatrixXcd& c_ab,
                          const VectorXcd& kappa_a, const VectorXcd& kappa_b, const MatrixXcd& j,
                          double gamma) {
    const Complex ig = kI * gamma;
    Type2Derivative out;
    const MatrixXcd x = c_ab.conjugate() * j.transpose();
    out.d_aa = kI * (d_aa * kappa_a.asDiagonal() - kappa_a.conjugate().asDiagonal() * d_aa) +
               ig * (x - x.adjoint());
    const MatrixXcd y = c_ab.adjoint() * j;
    out.d_bb = kI * (d_bb * kappa_b.asDiagonal() - kappa_b.conjugate().asDiagonal() * d_bb) +
               ig * (y - y.adjoint());
    out.c_ab = kI * (kappa_a.asDiagonal() * c_ab + c_ab * kappa_b.asDiagonal()) +
               ig * (j + j * d_bb + d_aa.transpose() * j);
    return out;
}

double PropagationResult::photons_signal() const { return state.d_signal().trace().real(); }
double PropagationResult::photons_idler() const { return state.d_idler().trace().real(); }

CorrelationState to_output_frame(const PdcSetup& setup, const CorrelationState& in) {
    const Eigen::VectorXd phi = output_frame_phases(setup, in.z);
    const Eigen::Index dim = phi.size();
    VectorXcd u(dim);
    for (Eigen::Index k = 0; k < dim; ++k) u[k] = std::polar(1.0, phi[k]);
    CorrelationState out;
    out.grid = in.grid;
    out.z = in.z;
    out.d = u.conjugate().asDiagonal() * in.d * u.asDiagonal();
    out.c = u.asDiagonal() * in.c * u.asDiagonal();
    return out;
}

PropagationResult propagate(const PdcSetup& setup, const IntegratorConfig& integrator,
                            const PropagateOptions& options) {
    setup.validate();
    integrator.validate();
    const int n = setup.grid.n_points;
    const double length = setup.waveguide.length;
    const double gamma = setup.waveguide.gamma;

    // Interaction picture: only the loss part of kappa survives, and the
    // coupling picks up the full phase mismatch.
    const VectorXcd kappa_a = VectorXcd::Constant(n, Complex(0.0, 0.5 * setup.waveguide.alpha_signal));
    const VectorXcd kappa_b = VectorXcd::Constant(n, Complex(0.0, 0.5 * setup.waveguide.alpha_idler));
    CouplingCache coupling(pump_envelope_matrix(setup), phase_mismatch(setup));

    PropagationResult result;
    result.diagnostics.push_back({0.0, 0.0, 0.0, 0.0});

    const bool dense = integrator.layout == StateLayout::dense;
    MatrixXcd y = dense ? MatrixXcd::Zero(2 * n, 4 * n) : MatrixXcd::Zero(n, 3 * n);

    Rhs rhs;
    if (dense) {
        VectorXcd kappa(2 * n);
        kappa << kappa_a, kappa_b;
        rhs = [&, kappa](double z, const MatrixXcd& s) -> MatrixXcd {
            const MatrixXcd& j = coupling.at(z);
            MatrixXcd m = MatrixXcd::Zero(2 * n, 2 * n);
            m.topRightCorner(n, n) = j;
            m.bottomLeftCorner(n, n) = j.transpose();
            const CorrelationDerivative dv =
                master_rhs(s.leftCols(2 * n), s.rightCols(2 * n), kappa, m, gamma);
            MatrixXcd out(2 * n, 4 * n);
            out << dv.d, dv.c;
            return out;
        };
    } else {
        rhs = [&](double z, const MatrixXcd& s) -> MatrixXcd {
            const Type2Derivative dv = type2_rhs(s.leftCols(n), s.middleCols(n, n), s.rightCols(n),
                                                 kappa_a, kappa_b, coupling.at(z), gamma);
            MatrixXcd out(n, 3 * n);
            out << dv.d_aa, dv.d_bb, dv.c_ab;
            return out;
        };
    }

    auto unpack = [&](const MatrixXcd& s, double z) {
        CorrelationState st;
        st.grid = setup.grid;
        st.z = z;
        if (dense) {
            st.d = s.leftCols(2 * n);
            st.c = s.rightCols(2 * n);
        } else {
            st.d = MatrixXcd::Zero(2 * n, 2 * n);
            st.c = MatrixXcd::Zero(2 * n, 2 * n);
            st.d.topLeftCorner(n, n) = s.leftCols(n);
            st.d.bottomRightCorner(n, n) = s.middleCols(n, n);
            st.c.topRightCorner(n, n) = s.rightCols(n);
            st.c.bottomLeftCorner(n, n) = s.rightCols(n).transpose();
        }
        return st;
    };

    StepHook hook = [&](double z, MatrixXcd& s, int step) {
        double drift = 0.0;
        if (dense) {
            drift = relative_drift(s.leftCols(2 * n));
            const MatrixXcd d = s.leftCols(2 * n);
            s.leftCols(2 * n) = 0.5 * (d + d.adjoint());
            const MatrixXcd c = s.rightCols(2 * n);
            s.rightCols(2 * n) = 0.5 * (c + c.transpose());
        } else {
            for (int b = 0; b < 2; ++b) {
                const MatrixXcd d = s.middleCols(b * n, n);
                drift = std::max(drift, relative_drift(d));
                s.middleCols(b * n, n) = 0.5 * (d + d.adjoint());
            }
        }
        result.max_hermiticity_drift = std::max(result.max_hermiticity_drift, drift);
        const double na = dense ? s.block(0, 0, n, n).trace().real() : s.leftCols(n).trace().real();
        const double nb =
            dense ? s.block(n, n, n, n).trace().real() : s.middleCols(n, n).trace().real();
        result.diagnostics.push_back({z, na, nb, drift});
        if (options.checkpoint_every > 0 && options.on_checkpoint &&
            step % options.checkpoint_every == 0) {
            options.on_checkpoint(to_output_frame(setup, unpack(s, z)), step);
        }
    };

    if (integrator.method == IntegratorMethod::rk4) {
        result.steps_taken = run_rk4(rhs, y, length, integrator.step_count, hook);
    } else {
        const auto [accepted, rejected] =
            run_rk45(rhs, y, length, length / integrator.step_count, integrator.tolerance, hook);
        result.steps_taken = accepted;
        result.rejected_steps = rejected;
    }
    result.state = to_output_frame(setup, unpack(y, length));
    return result;
}

RawMoments integrate_master_equation(const VectorXcd& kappa,
                                     const std::function<MatrixXcd(double)>& coupling,
                                     double gamma, double length,
                                     const IntegratorConfig& integrator) {
    integrator.validate();
    if (!(length > 0.0)) fail(ErrorKind::domain, "integration length must be positive");
    const Eigen::Index dim = kappa.size();
    Rhs rhs = [&](double z, const MatrixXcd& s) -> MatrixXcd {
        const CorrelationDerivative dv =
            master_rhs(s.leftCols(dim), s.rightCols(dim), kappa, coupling(z), gamma);
        MatrixXcd out(dim, 2 * dim);
        out << dv.d, dv.c;
        return out;
    };
    StepHook hook = [&](double, MatrixXcd& s, int) {
        const MatrixXcd d = s.leftCols(dim);
        s.leftCols(dim) = 0.5 * (d + d.adjoint());
        const MatrixXcd c = s.rightCols(dim);
        s.rightCols(dim) = 0.5 * (c + c.transpose());
    };
    MatrixXcd y = MatrixXcd::Zero(dim, 2 * dim);
    if (integrator.method == IntegratorMethod::rk4) {
        run_rk4(rhs, y, length, integrator.step_count, hook);
    } else {
        run_rk45(rhs, y, length, length / integrator.step_count, integrator.tolerance, hook);
    }
    return {y.leftCols(dim), y.rightCols(dim)};
}

TwoModeMoments two_mode_analytic_oracle(double gamma_eff, double alpha_s, double alpha_i,
                                        double length) {
    // With <a b> = i y:  n_a' = -alpha_s n_a + 2 g y,  n_b' = -alpha_i n_b + 2 g y,
    //                    y'   = -(alpha_s + alpha_i)/2 y + g (1 + n_a + n_b).
    Eigen::Matrix4d a = Eigen::Matrix4d::Zero();
    a(0, 0) = -alpha_s;
    a(0, 2) = 2.0 * gamma_eff;
    a(1, 1) = -alpha_i;
    a(1, 2) = 2.0 * gamma_eff;
    a(2, 0) = gamma_eff;
    a(2, 1) = gamma_eff;
    a(2, 2) = -0.5 * (alpha_s + alpha_i);
    a(2, 3) = gamma_eff;  // inhomogeneous term carried by the constant 4th component
    const Eigen::Matrix4d propagator = (a * length).exp();
    const Eigen::Vector4d x = propagator.col(3);
    return {x[0], x[1], Complex(0.0, x[2])};
}

}  // namespace pdcsim
