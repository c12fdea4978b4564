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

#include "pdcsim/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "pdcsim/error.hpp"

namespace pdcsim {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXd;

CorrelationState CorrelationState::vacuum(const FrequencyGrid& grid, double z) {
    CorrelationState s;
    s.grid = grid;
    s.z = z;
    s.d = MatrixXcd::Zero(2 * grid.n_points, 2 * grid.n_points);
    s.c = MatrixXcd::Zero(2 * grid.n_points, 2 * grid.n_points);
    return s;
}

void CorrelationState::check_structure(double tol) const {
    const Eigen::Index dim = 2 * static_cast<Eigen::Index>(grid.n_points);
    if (d.rows() != dim || d.cols() != dim || c.rows() != dim || c.cols() != dim) {
        fail(ErrorKind::contract, "correlation matrices do not match the frequency grid");
    }
    const double scale = std::max(1.0, d.cwiseAbs().maxCoeff());
    if ((d - d.adjoint()).cwiseAbs().maxCoeff() > tol * scale) {
        fail(ErrorKind::contract, "D is not Hermitian");
    }
    const double cscale = std::max(1.0, c.cwiseAbs().maxCoeff());
    if ((c - c.transpose()).cwiseAbs().maxCoeff() > tol * cscale) {
        fail(ErrorKind::contract, "C is not symmetric");
    }
}

CovarianceMatrix CovarianceMatrix::from_sigma(const MatrixXd& sigma) {
    return CovarianceMatrix(sigma - MatrixXd::Identity(sigma.rows(), sigma.cols()));
}

MatrixXd CovarianceMatrix::sigma() const {
    return excess_ + MatrixXd::Identity(excess_.rows(), excess_.cols());
}

CorrelationState apply_unitary(const CorrelationState& state, const MatrixXcd& u, double tol) {
    if (u.rows() != state.d.rows() || u.cols() != state.d.cols()) {
        fail(ErrorKind::contract, "apply_unitary: dimension mismatch");
    }
    const double defect =
        (u.adjoint() * u - MatrixXcd::Identity(u.rows(), u.cols())).cwiseAbs().maxCoeff();
    if (defect > tol) {
        std::ostringstream msg;
        msg << "apply_unitary: matrix is not unitary (||U^dag U - 1||_max = " << defect << ")";
        fail(ErrorKind::contract, msg.str());
    }
    CorrelationState out;
    out.grid = state.grid;
    out.z = state.z;
    out.d = u.conjugate() * state.d * u.transpose();
    out.c = u * state.c * u.transpose();
    return out;
}

CovarianceMatrix covariance_from_correlations(const MatrixXcd& d, const MatrixXcd& c) {
    const Eigen::Index m = d.rows();
    if (m == 0) fail(ErrorKind::domain, "covariance of an empty mode selection");
    if (d.cols() != m || c.rows() != m || c.cols() != m) {
        fail(ErrorKind::contract, "covariance_from_correlations: dimension mismatch");
    }
    MatrixXd x(2 * m, 2 * m);
    const MatrixXd re_d = d.real();
    const MatrixXd re_c = c.real();
    x.topLeftCorner(m, m) = 2.0 * (re_d + re_c);
    x.bottomRightCorner(m, m) = 2.0 * (re_d - re_c);
    // rows p_i, columns q_j
    const MatrixXd pq = 2.0 * (c.imag() - d.imag());
    x.bottomLeftCorner(m, m) = pq;
    x.topRightCorner(m, m) = pq.transpose();
    return CovarianceMatrix(std::move(x));
}

CovarianceMatrix covariance_from_correlations(const CorrelationState& state) {
    return covariance_from_correlations(state.d, state.c);
}

CovarianceMatrix covariance_from_correlations(const CorrelationState& state,
                                              std::span<const int> modes) {
    if (modes.empty()) fail(ErrorKind::domain, "covariance of an empty mode selection");
    const auto m = static_cast<Eigen::Index>(modes.size());
    MatrixXcd d(m, m), c(m, m);
    for (Eigen::Index j = 0; j < m; ++j) {
        for (Eigen::Index i = 0; i < m; ++i) {
            const int r = modes[static_cast<size_t>(i)];
            const int s = modes[static_cast<size_t>(j)];
            if (r < 0 || r >= state.total_modes() || s < 0 || s >= state.total_modes()) {
                fail(ErrorKind::domain, "mode index out of range");
            }
            d(i, j) = state.d(r, s);
            c(i, j) = state.c(r, s);
        }
    }
    return covariance_from_correlations(d, c);
}

Moments correlations_from_covariance(const CovarianceMatrix& sigma) {
    const MatrixXd& x = sigma.excess();
    const Eigen::Index m = x.rows() / 2;
    const MatrixXd qq = x.topLeftCorner(m, m);
    const MatrixXd pp = x.bottomRightCorner(m, m);
    const MatrixXd b = x.bottomLeftCorner(m, m);
    Moments out;
    const MatrixXd re_d = 0.25 * (qq + pp);
    const MatrixXd re_c = 0.25 * (qq - pp);
    const MatrixXd im_c = 0.25 * (b + b.transpose());
    const MatrixXd im_d = -0.25 * (b - b.transpose());
    out.d = re_d.cast<Complex>() + Complex(0.0, 1.0) * im_d.cast<Complex>();
    out.c = re_c.cast<Complex>() + Complex(0.0, 1.0) * im_c.cast<Complex>();
    return out;
}

double log_det_unit_plus(const MatrixXd& y) {
    const Eigen::Index n = y.rows();
    if (y.cols() != n) fail(ErrorKind::contract, "log_det_unit_plus: matrix must be square");
    // Row-major so that the inner products below run over contiguous memory.
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> l =
        Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>::Zero(n, n);
    double log_det = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        const auto row_j = l.row(j).head(j);
        const double excess = y(j, j) - row_j.squaredNorm();
        if (!(1.0 + excess > 0.0)) {
            fail(ErrorKind::numerical, "sigma + 1 is not positive definite");
        }
        const double pivot = std::sqrt(1.0 + excess);
        l(j, j) = pivot;
        log_det += std::log1p(excess);
        for (Eigen::Index i = j + 1; i < n; ++i) {
            l(i, j) = (y(i, j) - l.row(i).head(j).dot(row_j)) / pivot;
        }
    }
    return log_det;
}

double log_vacuum_fidelity(const CovarianceMatrix& sigma) {
    // F = 2^M / sqrt(det(sigma + 1)) = det(1 + (sigma - 1)/2)^(-1/2)
    return -0.5 * log_det_unit_plus(0.5 * sigma.excess());
}

double vacuum_fidelity(const CovarianceMatrix& sigma) {
    return std::exp(log_vacuum_fidelity(sigma));
}

VectorXd symplectic_eigenvalues(const CovarianceMatrix& sigma) {
    const MatrixXd s = sigma.sigma();
    const Eigen::Index two_m = s.rows();
    const Eigen::Index m = two_m / 2;
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(s);
    if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0) {
        fail(ErrorKind::numerical, "covariance matrix is not positive definite");
    }
    const MatrixXd root = es.operatorSqrt();
    MatrixXcd i_omega = MatrixXcd::Zero(two_m, two_m);
    i_omega.topRightCorner(m, m) = Complex(0.0, 1.0) * MatrixXcd::Identity(m, m);
    i_omega.bottomLeftCorner(m, m) = Complex(0.0, -1.0) * MatrixXcd::Identity(m, m);
    const MatrixXcd rc = root.cast<Complex>();
    const MatrixXcd h = rc * i_omega * rc;
    Eigen::SelfAdjointEigenSolver<MatrixXcd> hs(0.5 * (h + h.adjoint()), Eigen::EigenvaluesOnly);
    // Eigenvalues come in +-nu pairs; keep the non-negative half.
    return hs.eigenvalues().tail(m);
}

double MercerWolfDecomposition::cross_offdiagonal_ratio() const {
    const double diag = cross_block.diagonal().norm();
    const double total = cross_block.norm();
    const double off = std::sqrt(std::max(0.0, total * total - diag * diag));
    return diag > 0.0 ? off / diag : (off > 0.0 ? INFINITY : 0.0);
}

void sorted_hermitian_eigen(const MatrixXcd& h, VectorXd& values, MatrixXcd& vectors) {
    Eigen::SelfAdjointEigenSolver<MatrixXcd> es(0.5 * (h + h.adjoint()));
    if (es.info() != Eigen::Success) fail(ErrorKind::numerical, "eigen-decomposition failed");
    const Eigen::Index n = h.rows();
    std::vector<Eigen::Index> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        return es.eigenvalues()[a] > es.eigenvalues()[b];
    });
    values.resize(n);
    vectors.resize(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const Eigen::Index src = order[static_cast<size_t>(k)];
        values[k] = es.eigenvalues()[src];
        Eigen::VectorXcd v = es.eigenvectors().col(src);
        Eigen::Index dominant = 0;
        v.cwiseAbs().maxCoeff(&dominant);
        const Complex pivot = v[dominant];
        if (std::abs(pivot) > 0.0) v *= std::conj(pivot) / std::abs(pivot);
        v[dominant] = Complex(v[dominant].real(), 0.0);
        vectors.col(k) = v;
    }
}

MercerWolfDecomposition mercer_wolf(const CorrelationState& state) {
    MercerWolfDecomposition mw;
    sorted_hermitian_eigen(state.d_signal(), mw.eigenvalues_a, mw.v_a);
    sorted_hermitian_eigen(state.d_idler(), mw.eigenvalues_b, mw.v_b);
    mw.cross_block = mw.v_a.transpose() * state.c_cross() * mw.v_b;
    return mw;
}

double mode_number(std::span<const double> occupations) {
    if (occupations.empty()) fail(ErrorKind::domain, "mode_number: empty occupation list");
    double total = 0.0;
    for (double n : occupations) total += n;
    if (!(total > 0.0)) fail(ErrorKind::domain, "mode_number: no occupied modes");
    double sum_sq = 0.0;
    for (double n : occupations) {
        if (n < -kPhysicalityTolerance) {
            fail(ErrorKind::domain, "mode_number: negative occupation");
        }
        const double p = n / total;
        sum_sq += p * p;
    }
    return 1.0 / sum_sq;
}

double mode_number(const VectorXd& occupations) {
    return mode_number(std::span<const double>(occupations.data(), static_cast<size_t>(occupations.size())));
}

ModeNumbers mode_numbers(const MercerWolfDecomposition& mw) {
    ModeNumbers out;
    VectorXd all(mw.eigenvalues_a.size() + mw.eigenvalues_b.size());
    all << mw.eigenvalues_a, mw.eigenvalues_b;
    out.mu_ab = mode_number(all);
    out.mu_a = mode_number(mw.eigenvalues_a);
    out.mu_b = mode_number(mw.eigenvalues_b);
    return out;
}

}  // namespace pdcsim
