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

#include <doctest.h>

#include <array>
#include <cmath>
#include <random>
#include <vector>

#include "fixtures.hpp"
#include "pdcsim/error.hpp"
#include "pdcsim/gaussian.hpp"
#include "pdcsim/propagation.hpp"

using namespace pdcsim;
using Eigen::MatrixXcd;
using Eigen::VectorXcd;
using pdcsim::testing::reference_setup;
using pdcsim::testing::rel_err;

namespace {

constexpr Complex kI{0.0, 1.0};

// Hand derivation from da/dz = i kappa_a a + i G J b^dag (and a <-> b):
//   n_a' = -alpha_s n_a + 2 G Im(J^* c)
//   n_b' = -alpha_i n_b + 2 G Im(J^* c)
//   c'   = i (kappa_a + kappa_b) c + i G J (1 + n_a + n_b)
struct Pair {
    double na, nb;
    Complex c;
};

Pair pair_rhs(const Pair& x, Complex ka, Complex kb, Complex j, double g) {
    const double src = 2.0 * g * std::imag(std::conj(j) * x.c);
    return {-2.0 * ka.imag() * x.na + src, -2.0 * kb.imag() * x.nb + src,
            kI * (ka + kb) * x.c + kI * g * j * (1.0 + x.na + x.nb)};
}

Pair pair_rk4(double g, double as, double ai, double length, int steps) {
    const Complex ka{0.0, 0.5 * as}, kb{0.0, 0.5 * ai};
    Pair x{0, 0, 0};
    const double h = length / steps;
    auto axpy = [](const Pair& a, double s, const Pair& b) {
        return Pair{a.na + s * b.na, a.nb + s * b.nb, a.c + s * b.c};
    };
    for (int k = 0; k < steps; ++k) {
        const Pair k1 = pair_rhs(x, ka, kb, 1.0, g);
        const Pair k2 = pair_rhs(axpy(x, 0.5 * h, k1), ka, kb, 1.0, g);
        const Pair k3 = pair_rhs(axpy(x, 0.5 * h, k2), ka, kb, 1.0, g);
        const Pair k4 = pair_rhs(axpy(x, h, k3), ka, kb, 1.0, g);
        x.na += h / 6 * (k1.na + 2 * k2.na + 2 * k3.na + k4.na);
        x.nb += h / 6 * (k1.nb + 2 * k2.nb + 2 * k3.nb + k4.nb);
        x.c += h / 6 * (k1.c + 2.0 * k2.c + 2.0 * k3.c + k4.c);
    }
    return x;
}

RawMoments pair_master(double g, double as, double ai, double length, int steps) {
    VectorXcd kappa(2);
    kappa << Complex(0.0, 0.5 * as), Complex(0.0, 0.5 * ai);
    MatrixXcd m(2, 2);
    m << 0.0, 1.0, 1.0, 0.0;
    IntegratorConfig ic;
    ic.step_count = steps;
    ic.layout = StateLayout::dense;
    return integrate_master_equation(kappa, [&](double) { return m; }, g, length, ic);
}

IntegratorConfig steps(int n, StateLayout layout = StateLayout::type2_blocks) {
    IntegratorConfig ic;
    ic.step_count = n;
    ic.layout = layout;
    return ic;
}

}  // namespace

TEST_CASE("master equation right-hand side") {
    SUBCASE("vacuum without coupling is stationary") {
        const PdcSetup s = reference_setup(6, 0.0, 3.0, 1.0);
        const CorrelationDerivative d = master_rhs(CorrelationState::vacuum(s.grid), s);
        CHECK(d.d.cwiseAbs().maxCoeff() == 0.0);
        CHECK(d.c.cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("vacuum with coupling is seeded by i G M^T") {
        const PdcSetup s = reference_setup(6, 0.7, 3.0, 1.0);
        CorrelationState v = CorrelationState::vacuum(s.grid, 0.004);
        const CorrelationDerivative d = master_rhs(v, s);
        const MatrixXcd m = assemble_K_and_M(s, 0.004).m;
        CHECK(d.d.cwiseAbs().maxCoeff() == 0.0);
        CHECK((d.c - kI * 0.7 * m.transpose()).cwiseAbs().maxCoeff() < 1e-15);
    }
    SUBCASE("single mode pair reduces to the hand-derived scalar system") {
        std::mt19937_64 rng(1);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        for (int trial = 0; trial < 10; ++trial) {
            const Complex ka{3.0 * u(rng), 2.0 + u(rng)}, kb{3.0 * u(rng), 1.5 + u(rng)};
            const Complex j{u(rng), u(rng)};
            const double g = 1.0 + u(rng);
            const Pair x{0.4 + 0.3 * u(rng), 0.4 + 0.3 * u(rng), Complex(u(rng), u(rng))};
            MatrixXcd d = MatrixXcd::Zero(2, 2), c = MatrixXcd::Zero(2, 2), m(2, 2);
            d(0, 0) = x.na;
            d(1, 1) = x.nb;
            c(0, 1) = c(1, 0) = x.c;
            m << 0.0, j, j, 0.0;
            VectorXcd kappa(2);
            kappa << ka, kb;
            const CorrelationDerivative got = master_rhs(d, c, kappa, m, g);
            const Pair want = pair_rhs(x, ka, kb, j, g);
            CHECK(std::abs(got.d(0, 0) - want.na) < 1e-14);
            CHECK(std::abs(got.d(1, 1) - want.nb) < 1e-14);
            CHECK(std::abs(got.c(0, 1) - want.c) < 1e-14);
            CHECK(std::abs(got.c(1, 0) - want.c) < 1e-14);
            CHECK(std::abs(got.d(0, 1)) < 1e-15);
            CHECK(std::abs(got.c(0, 0)) < 1e-15);
        }
    }
    SUBCASE("type-II blocks match the dense equation") {
        const PdcSetup s = reference_setup(5, 0.9, 6.0, 2.0);
        const int n = 5;
        const MatrixXcd x = MatrixXcd::Random(n, n), y = MatrixXcd::Random(n, n);
        CorrelationState st = CorrelationState::vacuum(s.grid, 0.002);
        st.d.topLeftCorner(n, n) = x * x.adjoint();
        st.d.bottomRightCorner(n, n) = y * y.adjoint();
        const MatrixXcd cab = MatrixXcd::Random(n, n);
        st.c.topRightCorner(n, n) = cab;
        st.c.bottomLeftCorner(n, n) = cab.transpose();

        const CorrelationDerivative full = master_rhs(st, s);
        const LinearCoupling lc = assemble_K_and_M(s, 0.002);
        const Type2Derivative blk =
            type2_rhs(st.d.topLeftCorner(n, n), st.d.bottomRightCorner(n, n), cab,
                      lc.kappa.head(n), lc.kappa.tail(n), lc.m.topRightCorner(n, n), 0.9);
        const double scale = full.d.cwiseAbs().maxCoeff() + full.c.cwiseAbs().maxCoeff();
        CHECK((blk.d_aa - full.d.topLeftCorner(n, n)).cwiseAbs().maxCoeff() < 1e-13 * scale);
        CHECK((blk.d_bb - full.d.bottomRightCorner(n, n)).cwiseAbs().maxCoeff() < 1e-13 * scale);
        CHECK((blk.c_ab - full.c.topRightCorner(n, n)).cwiseAbs().maxCoeff() < 1e-13 * scale);
        // Blocks that type-II generation never populates stay untouched.
        CHECK(full.d.topRightCorner(n, n).cwiseAbs().maxCoeff() < 1e-13 * scale);
        CHECK(full.c.topLeftCorner(n, n).cwiseAbs().maxCoeff() < 1e-13 * scale);
    }
}

TEST_CASE("two-mode analytic oracle") {
    SUBCASE("lossless closed form") {
        const double g = 30.0, length = 0.01;  // gL = 0.3
        const TwoModeMoments m = two_mode_analytic_oracle(g, 0.0, 0.0, length);
        const double sh = std::sinh(g * length), ch = std::cosh(g * length);
        CHECK(rel_err(m.n_a, sh * sh) < 1e-13);
        CHECK(rel_err(m.n_b, sh * sh) < 1e-13);
        CHECK(std::abs(m.c_ab - kI * sh * ch) < 1e-13);
    }
    SUBCASE("no coupling gives vacuum") {
        const TwoModeMoments m = two_mode_analytic_oracle(0.0, 50.0, 10.0, 0.01);
        CHECK(m.n_a == 0.0);
        CHECK(m.n_b == 0.0);
        CHECK(std::abs(m.c_ab) == 0.0);
    }
    SUBCASE("low gain with equal losses") {
        // First order: n = 2 g^2 / a [ (1 - e^{-aL}) / a - L e^{-aL} ].
        const double g = 1e-2, a = 230.0, length = 0.01;
        const TwoModeMoments m = two_mode_analytic_oracle(g, a, a, length);
        const double e = std::exp(-a * length);
        const double first = 2 * g * g / a * ((1 - e) / a - length * e);
        CHECK(rel_err(m.n_a, first) < 1e-6);
        CHECK(m.n_a == doctest::Approx(m.n_b).epsilon(1e-14));
    }
    SUBCASE("independent fine RK4 of the scalar system") {
        for (auto [as, ai] : {std::array{0.0, 0.0}, std::array{230.0, 0.0}, std::array{120.0, 400.0}}) {
            const TwoModeMoments m = two_mode_analytic_oracle(40.0, as, ai, 0.01);
            const Pair x = pair_rk4(40.0, as, ai, 0.01, 4000);
            CHECK(rel_err(m.n_a, x.na) < 1e-11);
            CHECK(rel_err(m.n_b, x.nb) < 1e-11);
            CHECK(std::abs(m.c_ab - x.c) < 1e-11 * std::abs(x.c));
        }
    }
}

TEST_CASE("master-equation integrator against the analytic oracle") {
    for (auto [as, ai] : {std::array{0.0, 0.0}, std::array{230.0, 230.0}, std::array{50.0, 300.0}}) {
        CAPTURE(as);
        CAPTURE(ai);
        const double g = 60.0, length = 0.01;
        const TwoModeMoments want = two_mode_analytic_oracle(g, as, ai, length);
        const RawMoments got = pair_master(g, as, ai, length, 2000);
        CHECK(rel_err(got.d(0, 0).real(), want.n_a) < 1e-8);
        CHECK(rel_err(got.d(1, 1).real(), want.n_b) < 1e-8);
        CHECK(std::abs(got.c(0, 1) - want.c_ab) < 1e-8 * std::abs(want.c_ab));
    }
}

TEST_CASE("propagation of the reference waveguide") {
    SUBCASE("zero coupling stays vacuum") {
        const PropagationResult r = propagate(reference_setup(12, 0.0, 30.0, 5.0), steps(32));
        CHECK(r.state.d.cwiseAbs().maxCoeff() == 0.0);
        CHECK(r.state.c.cwiseAbs().maxCoeff() == 0.0);
        CHECK(r.total_photons() == 0.0);
    }
    SUBCASE("type-II blocks agree with the dense layout") {
        const PdcSetup s = reference_setup(10, 3.0, 7.0, 2.0);
        const PropagationResult a = propagate(s, steps(128));
        const PropagationResult b = propagate(s, steps(128, StateLayout::dense));
        const double scale = a.state.c.cwiseAbs().maxCoeff();
        CHECK((a.state.d - b.state.d).cwiseAbs().maxCoeff() < 1e-12 * scale);
        CHECK((a.state.c - b.state.c).cwiseAbs().maxCoeff() < 1e-12 * scale);
        CHECK(b.state.d.topRightCorner(10, 10).cwiseAbs().maxCoeff() < 1e-14 * scale);
        CHECK(b.state.c.topLeftCorner(10, 10).cwiseAbs().maxCoeff() < 1e-14 * scale);
        CHECK(b.state.c.bottomRightCorner(10, 10).cwiseAbs().maxCoeff() < 1e-14 * scale);
    }
    SUBCASE("lossless output is pure with paired photon numbers") {
        const PropagationResult r = propagate(reference_setup(24, 8.0), steps(512));
        CHECK(r.total_photons() > 1e-3);
        CHECK(rel_err(r.photons_signal(), r.photons_idler()) < 1e-10);
        const Eigen::VectorXd nu = symplectic_eigenvalues(covariance_from_correlations(r.state));
        CHECK((nu.array() - 1.0).abs().maxCoeff() < 1e-8);
        CHECK_NOTHROW(r.state.check_structure());
        CHECK(r.max_hermiticity_drift < 1e-10);
    }
    SUBCASE("losses make the state mixed") {
        const PropagationResult r = propagate(reference_setup(16, 8.0, 10.0, 10.0), steps(256));
        const Eigen::VectorXd nu = symplectic_eigenvalues(covariance_from_correlations(r.state));
        CHECK(nu.maxCoeff() > 1.0 + 1e-6);
        CHECK(nu.minCoeff() > 1.0 - 1e-8);
    }
    SUBCASE("equal losses keep signal and idler photon numbers equal") {
        for (double a : {1.0, 10.0, 30.0}) {
            const PropagationResult r = propagate(reference_setup(16, 2.0, a, a), steps(128));
            CHECK(rel_err(r.photons_signal(), r.photons_idler()) < 1e-10);
        }
    }
    SUBCASE("photon number falls with loss and the lossier arm loses more") {
        // The grid has to resolve the narrow signal phase-matching width; on
        // coarse grids the lossless sum over mismatched bins nearly cancels
        // and loss can raise the photon number.
        double previous = INFINITY;
        for (double a : {0.0, 5.0, 30.0}) {
            const double n = propagate(reference_setup(24, 2.0, a, a, 1.5), steps(128)).total_photons();
            CHECK(n < previous);
            previous = n;
        }
        const PropagationResult r = propagate(reference_setup(24, 2.0, 20.0, 2.0, 1.5), steps(128));
        CHECK(r.photons_signal() < r.photons_idler());
    }
    SUBCASE("low gain photon number is quadratic in the coupling") {
        const double n1 = propagate(reference_setup(16, 0.05, 3.0, 1.0), steps(128)).total_photons();
        const double n2 = propagate(reference_setup(16, 0.10, 3.0, 1.0), steps(128)).total_photons();
        CHECK(n2 / n1 == doctest::Approx(4.0).epsilon(1e-4));
    }
    SUBCASE("adaptive integration agrees with fixed steps") {
        const PdcSetup s = reference_setup(12, 4.0, 5.0, 1.0);
        IntegratorConfig adaptive;
        adaptive.method = IntegratorMethod::rk45;
        adaptive.tolerance = 1e-10;
        const PropagationResult a = propagate(s, adaptive);
        const PropagationResult b = propagate(s, steps(2048));
        CHECK(rel_err(a.total_photons(), b.total_photons()) < 1e-7);
        CHECK(a.steps_taken > 0);
    }
    SUBCASE("repeated runs are bit-identical") {
        const PdcSetup s = reference_setup(12, 4.0, 5.0, 1.0);
        const PropagationResult a = propagate(s, steps(64));
        const PropagationResult b = propagate(s, steps(64));
        CHECK(a.state.d == b.state.d);
        CHECK(a.state.c == b.state.c);
        CHECK(a.frame == std::string(kOutputFrame));
    }
}

TEST_CASE("checkpoints and diagnostics") {
    const PdcSetup s = reference_setup(8, 3.0, 2.0, 2.0);
    std::vector<int> seen;
    std::vector<double> zs;
    PropagateOptions opt;
    opt.checkpoint_every = 16;
    opt.on_checkpoint = [&](const CorrelationState& st, int step) {
        seen.push_back(step);
        zs.push_back(st.z);
    };
    const PropagationResult r = propagate(s, steps(64), opt);
    REQUIRE(seen == std::vector<int>{16, 32, 48, 64});
    CHECK(zs.back() == doctest::Approx(s.waveguide.length));
    CHECK(zs.front() == doctest::Approx(0.25 * s.waveguide.length));
    REQUIRE(!r.diagnostics.empty());
    CHECK(r.diagnostics.back().z == doctest::Approx(s.waveguide.length));
    CHECK(r.diagnostics.back().photons_signal == doctest::Approx(r.photons_signal()));
    for (size_t k = 1; k < r.diagnostics.size(); ++k) CHECK(r.diagnostics[k].z > r.diagnostics[k - 1].z);
}

TEST_CASE("integrator configuration is validated") {
    IntegratorConfig ic;
    ic.step_count = 0;
    CHECK_THROWS_AS(ic.validate(), Error);
    ic = {};
    ic.method = IntegratorMethod::rk45;
    ic.tolerance = -1.0;
    CHECK_THROWS_AS(ic.validate(), Error);
    PdcSetup bad = reference_setup(8, 1.0);
    bad.waveguide.length = -1.0;
    CHECK_THROWS_AS(propagate(bad, steps(8)), Error);
}
