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

// Undisplaced multimode Gaussian states described by their second-order
// moments D_ij = <c_i^dag c_j> and C_ij = <c_i c_j>.

#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "pdcsim/physics.hpp"

namespace pdcsim {

/// Absolute tolerance for Hermiticity, eigenvalue and symplectic checks.
inline constexpr double kPhysicalityTolerance = 1e-8;

/// Moments of a two-band (signal, idler) state. Modes 0..N-1 are the signal
/// band, N..2N-1 the idler band.
struct CorrelationState {
    Eigen::MatrixXcd d;  // Hermitian, PSD
    Eigen::MatrixXcd c;  // complex symmetric
    double z = 0.0;
    FrequencyGrid grid;

    static CorrelationState vacuum(const FrequencyGrid& grid, double z = 0.0);

    int modes_per_band() const { return grid.n_points; }
    int total_modes() const { return static_cast<int>(d.rows()); }

    auto d_signal() const { return d.topLeftCorner(grid.n_points, grid.n_points); }
    auto d_idler() const { return d.bottomRightCorner(grid.n_points, grid.n_points); }
    /// <a_i b_j>
    auto c_cross() const { return c.topRightCorner(grid.n_points, grid.n_points); }

    /// Throws contract error on shape mismatch or broken Hermiticity/symmetry.
    void check_structure(double tol = kPhysicalityTolerance) const;
};

/// Quadrature covariance in the hbar = 2 convention, ordering (q_1..q_M, p_1..p_M).
/// Stored as the excess sigma - 1 so that states close to vacuum keep full
/// relative precision.
class CovarianceMatrix {
  public:
    CovarianceMatrix() = default;
    explicit CovarianceMatrix(Eigen::MatrixXd excess) : excess_(std::move(excess)) {}

    static CovarianceMatrix from_sigma(const Eigen::MatrixXd& sigma);

    int modes() const { return static_cast<int>(excess_.rows() / 2); }
    const Eigen::MatrixXd& excess() const { return excess_; }
    Eigen::MatrixXd sigma() const;

  private:
    Eigen::MatrixXd excess_;
};

/// F = U^* D U^T, E = U C U^T.
CorrelationState apply_unitary(const CorrelationState& state, const Eigen::MatrixXcd& u,
                               double tol = 1e-10);

/// Covariance of the whole state.
CovarianceMatrix covariance_from_correlations(const Eigen::MatrixXcd& d, const Eigen::MatrixXcd& c);
CovarianceMatrix covariance_from_correlations(const CorrelationState& state);
/// Covariance of the reduced state on `modes` (Gaussian partial trace).
CovarianceMatrix covariance_from_correlations(const CorrelationState& state,
                                              std::span<const int> modes);

/// Inverse of covariance_from_correlations.
struct Moments {
    Eigen::MatrixXcd d;
    Eigen::MatrixXcd c;
};
Moments correlations_from_covariance(const CovarianceMatrix& sigma);

/// log det(1 + y) for symmetric y with 1 + y positive definite. Factorizes
/// 1 + y while carrying only the excess of each pivot over one.
double log_det_unit_plus(const Eigen::MatrixXd& y);

/// ln F(sigma) with F = 2^M / sqrt(det(sigma + 1)).
double log_vacuum_fidelity(const CovarianceMatrix& sigma);
double vacuum_fidelity(const CovarianceMatrix& sigma);

/// Symplectic spectrum of sigma (ascending, M values).
Eigen::VectorXd symplectic_eigenvalues(const CovarianceMatrix& sigma);

struct MercerWolfDecomposition {
    Eigen::MatrixXcd v_a;
    Eigen::MatrixXcd v_b;
    Eigen::VectorXd eigenvalues_a;  // descending
    Eigen::VectorXd eigenvalues_b;  // descending
    Eigen::MatrixXcd cross_block;   // V_a^T <a b> V_b

    /// ||offdiag(cross)||_F / ||diag(cross)||_F. Basis dependent inside
    /// degenerate eigenspaces.
    double cross_offdiagonal_ratio() const;
};

MercerWolfDecomposition mercer_wolf(const CorrelationState& state);

/// Eigen-decomposition of a Hermitian block, descending order, with the
/// largest-magnitude component of every eigenvector made real positive.
void sorted_hermitian_eigen(const Eigen::MatrixXcd& h, Eigen::VectorXd& values,
                            Eigen::MatrixXcd& vectors);

/// 1 / sum_i (n_i / sum_j n_j)^2.
double mode_number(std::span<const double> occupations);
double mode_number(const Eigen::VectorXd& occupations);

struct ModeNumbers {
    double mu_ab = 0.0;
    double mu_a = 0.0;
    double mu_b = 0.0;
};
ModeNumbers mode_numbers(const MercerWolfDecomposition& mw);

}  // namespace pdcsim
