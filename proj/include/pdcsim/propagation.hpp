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

// Spatial integration of the second-order-correlation master equation
//
//   dD/dz = i (D K - K^* D) + i Gamma (C^* M^T - M^* C)
//   dC/dz = i (C K + K C)   + i Gamma ((M D + M)^T + M D)
//
// from vacuum at z = 0 to the waveguide end.

#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pdcsim/gaussian.hpp"
#include "pdcsim/physics.hpp"

namespace pdcsim {

enum class IntegratorMethod { rk4, rk45 };

/// type2_blocks evolves only <a^dag a>, <b^dag b> and <a b>, the blocks that
/// type-II PDC from vacuum can populate. dense evolves the full 2N x 2N pair.
enum class StateLayout { type2_blocks, dense };

struct IntegratorConfig {
    int step_count = 512;
    IntegratorMethod method = IntegratorMethod::rk4;
    double tolerance = 1e-8;  // rk45 only
    StateLayout layout = StateLayout::type2_blocks;

    void validate() const;
};

struct CorrelationDerivative {
    Eigen::MatrixXcd d;
    Eigen::MatrixXcd c;
};

CorrelationDerivative master_rhs(const Eigen::MatrixXcd& d, const Eigen::MatrixXcd& c,
                                 const Eigen::VectorXcd& kappa, const Eigen::MatrixXcd& m,
                                 double gamma);

/// Lab-frame right-hand side at position z of the state.
CorrelationDerivative master_rhs(const CorrelationState& state, const PdcSetup& setup);

/// The same equation restricted to the type-II blocks. Returns derivatives of
/// (<a^dag a>, <b^dag b>, <a b>).
struct Type2Derivative {
    Eigen::MatrixXcd d_aa;
    Eigen::MatrixXcd d_bb;
    Eigen::MatrixXcd c_ab;
};
Type2Derivative type2_rhs(const Eigen::MatrixXcd& d_aa, const Eigen::MatrixXcd& d_bb,
                          const Eigen::MatrixXcd& c_ab, const Eigen::VectorXcd& kappa_a,
                          const Eigen::VectorXcd& kappa_b, const Eigen::MatrixXcd& j,
                          double gamma);

struct DiagnosticSample {
    double z = 0.0;
    double photons_signal = 0.0;
    double photons_idler = 0.0;
    double hermiticity_drift = 0.0;  // max |D - D^dag| / max |D| before re-symmetrization
};

inline constexpr const char* kOutputFrame =
    "pump-retarded frame (t - z/v_g,pump), band-center phases removed";

struct PropagationResult {
    CorrelationState state;
    std::vector<DiagnosticSample> diagnostics;
    double max_hermiticity_drift = 0.0;
    int steps_taken = 0;
    int rejected_steps = 0;
    std::string frame = kOutputFrame;

    double photons_signal() const;
    double photons_idler() const;
    double total_photons() const { return photons_signal() + photons_idler(); }
};

struct PropagateOptions {
    int checkpoint_every = 0;
    std::function<void(const CorrelationState&, int step)> on_checkpoint;
};

/// Integrates from vacuum at z = 0 to z = L. The integration runs in the
/// interaction picture of the real wavevectors; the returned state is mapped
/// to the output frame described by kOutputFrame.
PropagationResult propagate(const PdcSetup& setup, const IntegratorConfig& integrator,
                            const PropagateOptions& options = {});

/// Maps an interaction-picture state at position state.z to the output frame.
CorrelationState to_output_frame(const PdcSetup& setup, const CorrelationState& interaction_state);

/// Integrates the dense master equation for arbitrary constant K and
/// position-dependent M from D = C = 0. Used for small validation systems.
struct RawMoments {
    Eigen::MatrixXcd d;
    Eigen::MatrixXcd c;
};
RawMoments integrate_master_equation(const Eigen::VectorXcd& kappa,
                                     const std::function<Eigen::MatrixXcd(double)>& coupling,
                                     double gamma, double length,
                                     const IntegratorConfig& integrator);

struct TwoModeMoments {
    double n_a = 0.0;
    double n_b = 0.0;
    Complex c_ab;
};

/// One phase-matched mode pair with constant unit coupling: exact solution
/// of the linear ODE for (<a^dag a>, <b^dag b>, <a b>) by matrix exponential.
TwoModeMoments two_mode_analytic_oracle(double gamma_eff, double alpha_s, double alpha_i,
                                        double length);

}  // namespace pdcsim
