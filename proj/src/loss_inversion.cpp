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

#include "pdcsim/loss_inversion.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>
#include <tuple>

#include <json.hpp>

#include "pdcsim/error.hpp"
#include "pdcsim/io.hpp"
#include "pdcsim/measurement.hpp"

namespace pdcsim {

using Eigen::MatrixXd;
using json = nlohmann::ordered_json;

LossParams LossParams::from_losses(double alpha_signal_db, double alpha_idler_db) {
    if (alpha_signal_db < 0.0 || alpha_idler_db < 0.0) {
        fail(ErrorKind::domain, "losses must be non-negative");
    }
    const double mean = 0.5 * (alpha_signal_db + alpha_idler_db);
    if (mean == 0.0) return {0.0, 0.0};
    return {mean, (alpha_signal_db - alpha_idler_db) / (2.0 * mean)};
}

void LossParams::validate() const {
    if (!(alpha_bar >= 0.0) || !std::isfinite(alpha_bar)) {
        fail(ErrorKind::domain, "alpha_bar must be finite and non-negative");
    }
    if (!(std::abs(r) < 1.0)) fail(ErrorKind::domain, "loss asymmetry r must satisfy |r| < 1");
}

CalibrationResult calibrate_gamma(const PdcSetup& setup, const IntegratorConfig& integrator,
                                  double target, double rel_tol, int max_propagations) {
    if (!(target >= 0.0) || !std::isfinite(target)) {
        fail(ErrorKind::domain, "calibration target must be finite and non-negative");
    }
    CalibrationResult out;
    if (target == 0.0) return out;

    PdcSetup s = setup;
    s.waveguide.alpha_signal = 0.0;
    s.waveguide.alpha_idler = 0.0;
    if (!(s.waveguide.gamma > 0.0)) s.waveguide.gamma = 1e-3;

    for (int k = 0; k < max_propagations; ++k) {
        const double n = propagate(s, integrator).total_photons();
        ++out.propagations;
        if (!(n > 0.0) || !std::isfinite(n)) {
            fail(ErrorKind::numerical, "calibration: photon number is not positive");
        }
        out.gamma = s.waveguide.gamma;
        out.total_photons = n;
        out.relative_error = std::abs(n - target) / target;
        if (out.relative_error < rel_tol) return out;
        s.waveguide.gamma *= std::sqrt(target / n);
    }
    fail(ErrorKind::numerical, "calibration did not reach the requested photon number");
}

ForwardModel::ForwardModel(PdcSetup setup, IntegratorConfig integrator)
    : setup_(std::move(setup)), integrator_(integrator) {
    setup_.validate();
    integrator_.validate();
}

PdcSetup ForwardModel::setup_for(const LossParams& p) const {
    p.validate();
    PdcSetup s = setup_;
    s.waveguide.alpha_signal = loss_db_per_cm_to_si(p.alpha_signal());
    s.waveguide.alpha_idler = loss_db_per_cm_to_si(p.alpha_idler());
    return s;
}

ForwardValues ForwardModel::evaluate(const LossParams& p) const {
    const PropagationResult run = propagate(setup_for(p), integrator_);
    ForwardValues v;
    v.g2_signal = g2_click(run.state, Subsystem::signal);
    v.g2_idler = g2_click(run.state, Subsystem::idler);
    const double ns = run.photons_signal();
    const double ni = run.photons_idler();
    v.r_n = (ns + ni) > 0.0 ? (ni - ns) / (ns + ni) : 0.0;
    return v;
}

namespace {

// Index k with axis[k] <= x <= axis[k+1], or -1.
Eigen::Index bracket(const std::vector<double>& axis, double x) {
    if (axis.size() < 2) return (axis.size() == 1 && x == axis[0]) ? 0 : -1;
    const double span = axis.back() - axis.front();
    const double eps = 1e-12 * span;
    if (x < axis.front() - eps || x > axis.back() + eps) return -1;
    auto it = std::upper_bound(axis.begin(), axis.end(), x);
    auto k = static_cast<Eigen::Index>(it - axis.begin()) - 1;
    return std::clamp<Eigen::Index>(k, 0, static_cast<Eigen::Index>(axis.size()) - 2);
}

double lerp_fraction(const std::vector<double>& axis, Eigen::Index k, double x) {
    if (axis.size() < 2) return 0.0;
    return std::clamp((x - axis[k]) / (axis[k + 1] - axis[k]), 0.0, 1.0);
}

void check_axis(const std::vector<double>& axis, const char* name) {
    if (axis.empty()) fail(ErrorKind::domain, std::string(name) + " axis is empty");
    for (size_t k = 0; k < axis.size(); ++k) {
        if (!std::isfinite(axis[k])) fail(ErrorKind::domain, std::string(name) + " axis not finite");
        if (k > 0 && !(axis[k] > axis[k - 1])) {
            fail(ErrorKind::domain, std::string(name) + " axis must be strictly increasing");
        }
    }
}

}  // namespace

std::optional<ForwardValues> ForwardMapGrid::interpolate(const LossParams& p) const {
    const Eigen::Index ia = bracket(alpha_axis, p.alpha_bar);
    const Eigen::Index ir = bracket(r_axis, p.r);
    if (ia < 0 || ir < 0) return std::nullopt;
    const Eigen::Index ia1 = alpha_axis.size() > 1 ? ia + 1 : ia;
    const Eigen::Index ir1 = r_axis.size() > 1 ? ir + 1 : ir;
    if (!valid_cell(ia, ir) || !valid_cell(ia1, ir) || !valid_cell(ia, ir1) ||
        !valid_cell(ia1, ir1)) {
        return std::nullopt;
    }
    const double fa = lerp_fraction(alpha_axis, ia, p.alpha_bar);
    const double fr = lerp_fraction(r_axis, ir, p.r);
    auto blend = [&](const MatrixXd& s) {
        return (1 - fa) * ((1 - fr) * s(ia, ir) + fr * s(ia, ir1)) +
               fa * ((1 - fr) * s(ia1, ir) + fr * s(ia1, ir1));
    };
    return ForwardValues{blend(g2_signal), blend(g2_idler), blend(r_n)};
}

void ForwardMapGrid::check_consistency() const {
    check_axis(alpha_axis, "alpha_bar");
    check_axis(r_axis, "r");
    const auto na = static_cast<Eigen::Index>(alpha_axis.size());
    const auto nr = static_cast<Eigen::Index>(r_axis.size());
    for (const MatrixXd* s : {&g2_signal, &g2_idler, &r_n}) {
        if (s->rows() != na || s->cols() != nr) {
            fail(ErrorKind::contract, "forward grid surfaces do not match the axes");
        }
    }
    if (valid.rows() != na || valid.cols() != nr) {
        fail(ErrorKind::contract, "forward grid validity mask does not match the axes");
    }
    for (Eigen::Index i = 0; i < na; ++i) {
        for (Eigen::Index j = 0; j < nr; ++j) {
            if (valid_cell(i, j) && !(std::isfinite(g2_signal(i, j)) &&
                                      std::isfinite(g2_idler(i, j)) && std::isfinite(r_n(i, j)))) {
                fail(ErrorKind::contract, "forward grid has a non-finite valid cell");
            }
        }
    }
}

std::vector<double> default_alpha_axis() {
    return {0.0, 0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0,
            6.5, 8.0, 10.0, 12.5, 15.0, 18.0, 21.0, 25.0, 30.0};
}

std::vector<double> default_r_axis() { return uniform_axis(-0.9, 0.9, 19); }

std::vector<double> uniform_axis(double lo, double hi, int points) {
    if (points < 1) fail(ErrorKind::domain, "axis needs at least one point");
    if (points == 1) return {lo};
    if (!(hi > lo)) fail(ErrorKind::domain, "axis range must be increasing");
    std::vector<double> axis(static_cast<size_t>(points));
    for (int k = 0; k < points; ++k) axis[k] = lo + (hi - lo) * k / (points - 1);
    axis.back() = hi;
    return axis;
}

ForwardMapGrid build_forward_grid(const ForwardModel& model, std::vector<double> alpha_axis,
                                  std::vector<double> r_axis, int jobs,
                                  std::uint64_t config_hash, const GridProgress& progress) {
    check_axis(alpha_axis, "alpha_bar");
    check_axis(r_axis, "r");
    if (alpha_axis.front() < 0.0) fail(ErrorKind::domain, "alpha_bar axis must be >= 0");
    if (std::abs(r_axis.front()) >= 1.0 || std::abs(r_axis.back()) >= 1.0) {
        fail(ErrorKind::domain, "r axis must lie inside (-1, 1)");
    }

    ForwardMapGrid g;
    const auto na = static_cast<Eigen::Index>(alpha_axis.size());
    const auto nr = static_cast<Eigen::Index>(r_axis.size());
    g.alpha_axis = std::move(alpha_axis);
    g.r_axis = std::move(r_axis);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    g.g2_signal = MatrixXd::Constant(na, nr, nan);
    g.g2_idler = MatrixXd::Constant(na, nr, nan);
    g.r_n = MatrixXd::Constant(na, nr, nan);
    g.valid.setZero(na, nr);
    g.config_hash = config_hash;
    g.gamma = model.setup().waveguide.gamma;
    g.grid_points = model.setup().grid.n_points;
    g.step_count = model.integrator().step_count;

    const int total = static_cast<int>(na * nr);
    std::atomic<int> next{0};
    std::mutex mu;
    int done = 0;
    std::vector<std::pair<int, std::string>> errors;

    auto worker = [&] {
        for (int cell = next++; cell < total; cell = next++) {
            const Eigen::Index ia = cell / nr;
            const Eigen::Index ir = cell % nr;
            const LossParams p{g.alpha_axis[ia], g.r_axis[ir]};
            std::optional<ForwardValues> v;
            std::string err;
            try {
                v = model.evaluate(p);
            } catch (const Error& e) {
                err = e.what();
            }
            std::lock_guard lock(mu);
            if (v) {
                g.g2_signal(ia, ir) = v->g2_signal;
                g.g2_idler(ia, ir) = v->g2_idler;
                g.r_n(ia, ir) = v->r_n;
                g.valid(ia, ir) = 1;
            } else {
                std::ostringstream ss;
                ss << format_double(p.alpha_bar) << "," << format_double(p.r) << ": " << err;
                errors.emplace_back(cell, ss.str());
            }
            ++done;
            if (progress) progress(done, total);
        }
    };

    const int n_threads = std::clamp(jobs, 1, std::max(1, total));
    std::vector<std::thread> pool;
    for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    std::sort(errors.begin(), errors.end());
    for (auto& [cell, msg] : errors) g.cell_errors.push_back(std::move(msg));
    return g;
}

void save_forward_grid(const std::string& path, const ForwardMapGrid& g) {
    g.check_consistency();
    json meta;
    meta["config_hash"] = hex64(g.config_hash);
    meta["gamma"] = g.gamma;
    meta["grid_points"] = g.grid_points;
    meta["step_count"] = g.step_count;
    meta["alpha_axis"] = g.alpha_axis;
    meta["r_axis"] = g.r_axis;
    meta["cell_errors"] = g.cell_errors;
    BinaryContainer c;
    c.kind = "forward-grid";
    c.metadata_json = meta.dump();
    c.matrices = {{"g2_signal", g.g2_signal.cast<Complex>()},
                  {"g2_idler", g.g2_idler.cast<Complex>()},
                  {"r_n", g.r_n.cast<Complex>()},
                  {"valid", g.valid.cast<double>().cast<Complex>()}};
    save_container(path, c);
}

ForwardMapGrid load_forward_grid(const std::string& path) {
    const BinaryContainer c = load_container(path);
    if (c.kind != "forward-grid") fail(ErrorKind::io, path + " does not hold a forward grid");
    ForwardMapGrid g;
    try {
        const json meta = json::parse(c.metadata_json);
        g.config_hash = std::stoull(meta.at("config_hash").get<std::string>(), nullptr, 16);
        g.gamma = meta.at("gamma").get<double>();
        g.grid_points = meta.at("grid_points").get<int>();
        g.step_count = meta.at("step_count").get<int>();
        g.alpha_axis = meta.at("alpha_axis").get<std::vector<double>>();
        g.r_axis = meta.at("r_axis").get<std::vector<double>>();
        g.cell_errors = meta.at("cell_errors").get<std::vector<std::string>>();
    } catch (const std::exception& e) {
        fail(ErrorKind::io, std::string("forward grid metadata: ") + e.what());
    }
    g.g2_signal = c.matrix("g2_signal").real();
    g.g2_idler = c.matrix("g2_idler").real();
    g.r_n = c.matrix("r_n").real();
    g.valid = (c.matrix("valid").real().array() > 0.5).cast<std::uint8_t>();
    g.check_consistency();
    return g;
}

ForwardMapGrid cached_forward_grid(const std::string& path, const ForwardModel& model,
                                   std::vector<double> alpha_axis, std::vector<double> r_axis,
                                   int jobs, std::uint64_t config_hash,
                                   const GridProgress& progress) {
    if (!path.empty() && std::filesystem::exists(path)) {
        try {
            ForwardMapGrid g = load_forward_grid(path);
            if (g.config_hash == config_hash && g.alpha_axis == alpha_axis &&
                g.r_axis == r_axis && g.grid_points == model.setup().grid.n_points &&
                g.step_count == model.integrator().step_count &&
                g.gamma == model.setup().waveguide.gamma) {
                return g;
            }
        } catch (const Error&) {
            // Stale or corrupt cache: rebuild below.
        }
    }
    ForwardMapGrid g = build_forward_grid(model, std::move(alpha_axis), std::move(r_axis), jobs,
                                          config_hash, progress);
    if (!path.empty()) save_forward_grid(path, g);
    return g;
}

const char* to_string(Consistency c) noexcept {
    switch (c) {
        case Consistency::pass: return "pass";
        case Consistency::fail: return "fail";
        case Consistency::not_checked: return "not-checked";
    }
    return "unknown";
}

std::vector<LossParams> seed_candidates(const ForwardMapGrid& grid, const Measurement& meas,
                                        const InversionOptions& opt) {
    grid.check_consistency();
    constexpr int kSub = 8;
    const auto na = static_cast<int>(grid.alpha_axis.size());
    const auto nr = static_cast<int>(grid.r_axis.size());
    const int fa = na > 1 ? (na - 1) * kSub + 1 : 1;
    const int fr = nr > 1 ? (nr - 1) * kSub + 1 : 1;

    auto coord = [](const std::vector<double>& axis, int k) {
        if (axis.size() == 1) return axis[0];
        const int cell = std::min(k / kSub, static_cast<int>(axis.size()) - 2);
        const double f = static_cast<double>(k - cell * kSub) / kSub;
        return axis[cell] + f * (axis[cell + 1] - axis[cell]);
    };

    const double inf = std::numeric_limits<double>::infinity();
    MatrixXd misfit = MatrixXd::Constant(fa, fr, inf);
    for (int i = 0; i < fa; ++i) {
        for (int j = 0; j < fr; ++j) {
            const auto v = grid.interpolate({coord(grid.alpha_axis, i), coord(grid.r_axis, j)});
            if (v) misfit(i, j) = std::hypot(v->g2_signal - meas.g2_signal, v->g2_idler - meas.g2_idler);
        }
    }

    std::vector<std::tuple<double, int, int>> minima;
    for (int i = 0; i < fa; ++i) {
        for (int j = 0; j < fr; ++j) {
            const double m = misfit(i, j);
            if (!(m < opt.measurement_tolerance)) continue;
            bool is_min = true;
            for (int di = -1; di <= 1 && is_min; ++di) {
                for (int dj = -1; dj <= 1; ++dj) {
                    const int a = i + di, b = j + dj;
                    if ((di == 0 && dj == 0) || a < 0 || b < 0 || a >= fa || b >= fr) continue;
                    // Ties broken by lattice order so plateaus yield one point.
                    if (misfit(a, b) < m || (misfit(a, b) == m && std::tie(a, b) < std::tie(i, j))) {
                        is_min = false;
                        break;
                    }
                }
            }
            if (is_min) minima.emplace_back(m, i, j);
        }
    }
    std::sort(minima.begin(), minima.end());

    std::vector<LossParams> seeds;
    for (const auto& [m, i, j] : minima) {
        const LossParams p{coord(grid.alpha_axis, i), coord(grid.r_axis, j)};
        bool separated = true;
        for (const LossParams& q : seeds) {
            const double da = (p.alpha_bar - q.alpha_bar) / (1.0 + 0.5 * (p.alpha_bar + q.alpha_bar));
            const double dr = p.r - q.r;
            if (std::hypot(da, dr) < 0.1) {
                separated = false;
                break;
            }
        }
        if (separated) seeds.push_back(p);
        if (static_cast<int>(seeds.size()) >= opt.max_candidates) break;
    }
    return seeds;
}

namespace {

struct Evaluation {
    bool ok = false;
    Eigen::Vector2d f = Eigen::Vector2d::Zero();
    double r_n = 0.0;
};

}  // namespace

LossEstimate refine_estimate(const ForwardModel& model, const Measurement& meas, LossParams x,
                             const InversionOptions& opt) {
    return refine_estimate([&](const LossParams& p) { return model.evaluate(p); }, meas, x, opt);
}

LossEstimate refine_estimate(const ForwardFn& forward, const Measurement& meas, LossParams x,
                             const InversionOptions& opt) {
    LossEstimate est;
    est.r_n_tolerance = opt.r_n_tolerance;
    auto clamp_params = [&](LossParams p) {
        p.alpha_bar = std::max(0.0, p.alpha_bar);
        p.r = std::clamp(p.r, -opt.max_abs_r, opt.max_abs_r);
        return p;
    };
    auto eval = [&](const LossParams& p) {
        Evaluation e;
        ++est.evaluations;
        try {
            const ForwardValues v = forward(p);
            e.f = {v.g2_signal - meas.g2_signal, v.g2_idler - meas.g2_idler};
            e.r_n = v.r_n;
            e.ok = e.f.allFinite();
        } catch (const Error&) {
            e.ok = false;
        }
        return e;
    };

    x = clamp_params(x);
    Evaluation cur = eval(x);
    if (!cur.ok) {
        est.params = x;
        est.note = "forward model failed at the seed";
        return est;
    }
    for (;;) {
        if (cur.f.cwiseAbs().maxCoeff() < opt.residual_tolerance) {
            est.converged = true;
            break;
        }
        if (est.iterations >= opt.max_iterations) {
            est.note = "iteration limit reached";
            break;
        }
        ++est.iterations;

        const double ha = opt.relative_step * std::max(x.alpha_bar, 1.0);
        const double hr = x.r + opt.relative_step > opt.max_abs_r ? -opt.relative_step
                                                                   : opt.relative_step;
        const Evaluation ea = eval({x.alpha_bar + ha, x.r});
        const Evaluation er = eval({x.alpha_bar, x.r + hr});
        if (!ea.ok || !er.ok) {
            est.note = "forward model failed while forming the Jacobian";
            break;
        }
        Eigen::Matrix2d jac;
        jac.col(0) = (ea.f - cur.f) / ha;
        jac.col(1) = (er.f - cur.f) / hr;

        // Levenberg-regularized Newton step; the tiny damping only matters
        // where r decouples (alpha_bar -> 0).
        const Eigen::Matrix2d jtj = jac.transpose() * jac;
        const double mu = 1e-12 * std::max(jtj.trace(), 1e-300);
        Eigen::Vector2d step =
            -(jtj + mu * Eigen::Matrix2d::Identity()).ldlt().solve(jac.transpose() * cur.f);
        const double limit_a = std::max(2.0, 0.5 * x.alpha_bar);
        const double shrink = std::max({1.0, std::abs(step(0)) / limit_a, std::abs(step(1)) / 0.3});
        step /= shrink;

        bool accepted = false;
        for (double lambda = 1.0; lambda > 1e-3; lambda *= 0.5) {
            const LossParams trial =
                clamp_params({x.alpha_bar + lambda * step(0), x.r + lambda * step(1)});
            const Evaluation et = eval(trial);
            if (et.ok && et.f.norm() < cur.f.norm()) {
                x = trial;
                cur = et;
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            est.note = "line search stalled";
            break;
        }
    }
    est.params = x;
    est.residual_signal = cur.f(0);
    est.residual_idler = cur.f(1);
    est.r_n_predicted = cur.r_n;
    return est;
}

namespace {

bool same_root(const LossParams& a, const LossParams& b, const InversionOptions& opt) {
    const double mean = 0.5 * (a.alpha_bar + b.alpha_bar);
    return std::abs(a.alpha_bar - b.alpha_bar) <= opt.merge_alpha_rel * std::max(mean, 1.0) &&
           std::abs(a.r - b.r) * std::min(1.0, mean) <= opt.merge_r_abs;
}

std::string describe(const LossParams& p) {
    std::ostringstream ss;
    ss << "(alpha_bar=" << p.alpha_bar << " dB/cm, r=" << p.r << ")";
    return ss.str();
}

}  // namespace

LossEstimate invert_losses(const ForwardMapGrid& grid, const ForwardModel& model,
                           const Measurement& meas, const InversionOptions& opt) {
    return invert_losses(grid, [&](const LossParams& p) { return model.evaluate(p); }, meas, opt);
}

LossEstimate invert_losses(const ForwardMapGrid& grid, const ForwardFn& forward,
                           const Measurement& meas, const InversionOptions& opt) {
    if (!std::isfinite(meas.g2_signal) || !std::isfinite(meas.g2_idler)) {
        fail(ErrorKind::domain, "measured g2 values must be finite");
    }
    const std::vector<LossParams> seeds = seed_candidates(grid, meas, opt);
    if (seeds.empty()) {
        fail(ErrorKind::no_intersection,
             "no forward-grid point lies within the measurement tolerance; the g2 isolines do not "
             "cross inside the sampled loss range");
    }

    std::vector<LossEstimate> roots;
    for (const LossParams& seed : seeds) {
        LossEstimate e = refine_estimate(forward, meas, seed, opt);
        if (!e.converged) continue;
        auto same = std::find_if(roots.begin(), roots.end(),
                                 [&](const LossEstimate& r) { return same_root(r.params, e.params, opt); });
        if (same == roots.end()) {
            roots.push_back(std::move(e));
        } else {
            const double cur = std::hypot(same->residual_signal, same->residual_idler);
            if (std::hypot(e.residual_signal, e.residual_idler) < cur) *same = std::move(e);
        }
    }
    if (roots.empty()) {
        fail(ErrorKind::no_intersection,
             "the g2 isolines approach but no Newton refinement reached the residual tolerance");
    }
    if (roots.size() > 1) {
        std::string msg = "several loss pairs reproduce the measured g2 values:";
        for (const auto& r : roots) msg += " " + describe(r.params);
        fail(ErrorKind::ambiguity, msg);
    }

    LossEstimate est = std::move(roots.front());
    if (meas.r_n) {
        est.r_n_consistency = std::abs(est.r_n_predicted - *meas.r_n) <= opt.r_n_tolerance
                                  ? Consistency::pass
                                  : Consistency::fail;
        if (est.r_n_consistency == Consistency::fail) {
            est.note = "predicted R_N disagrees with the measurement; the assumed waveguide "
                       "parameters are likely not correct";
        }
    }
    return est;
}

namespace {

// Edge of the sampling lattice: horizontal edges join (i, j)-(i, j+1),
// vertical edges join (i, j)-(i+1, j).
using EdgeKey = std::tuple<int, int, int>;  // (kind 0 = horizontal / 1 = vertical, i, j)

}  // namespace

std::vector<Polyline> isolines(const ForwardMapGrid& grid, const MatrixXd& s, double level) {
    grid.check_consistency();
    const auto na = static_cast<int>(grid.alpha_axis.size());
    const auto nr = static_cast<int>(grid.r_axis.size());
    if (s.rows() != na || s.cols() != nr) fail(ErrorKind::contract, "isolines: surface shape");

    auto point = [&](const EdgeKey& e) {
        const auto [kind, i, j] = e;
        const int i2 = kind == 1 ? i + 1 : i;
        const int j2 = kind == 0 ? j + 1 : j;
        const double v1 = s(i, j), v2 = s(i2, j2);
        const double f = v1 == v2 ? 0.5 : std::clamp((level - v1) / (v2 - v1), 0.0, 1.0);
        return LossParams{grid.alpha_axis[i] + f * (grid.alpha_axis[i2] - grid.alpha_axis[i]),
                          grid.r_axis[j] + f * (grid.r_axis[j2] - grid.r_axis[j])};
    };

    std::vector<std::pair<EdgeKey, EdgeKey>> segments;
    for (int i = 0; i + 1 < na; ++i) {
        for (int j = 0; j + 1 < nr; ++j) {
            if (!grid.valid_cell(i, j) || !grid.valid_cell(i + 1, j) ||
                !grid.valid_cell(i, j + 1) || !grid.valid_cell(i + 1, j + 1)) {
                continue;
            }
            // Corners counter-clockwise: (i,j), (i,j+1), (i+1,j+1), (i+1,j).
            const bool b0 = s(i, j) >= level, b1 = s(i, j + 1) >= level;
            const bool b2 = s(i + 1, j + 1) >= level, b3 = s(i + 1, j) >= level;
            const EdgeKey e01{0, i, j}, e12{1, i, j + 1}, e32{0, i + 1, j}, e03{1, i, j};
            std::vector<EdgeKey> crossed;
            if (b0 != b1) crossed.push_back(e01);
            if (b1 != b2) crossed.push_back(e12);
            if (b3 != b2) crossed.push_back(e32);
            if (b0 != b3) crossed.push_back(e03);
            if (crossed.size() == 2) {
                segments.emplace_back(crossed[0], crossed[1]);
            } else if (crossed.size() == 4) {
                const double centre = 0.25 * (s(i, j) + s(i, j + 1) + s(i + 1, j + 1) + s(i + 1, j));
                if ((centre >= level) == b0) {
                    segments.emplace_back(e01, e12);
                    segments.emplace_back(e32, e03);
                } else {
                    segments.emplace_back(e01, e03);
                    segments.emplace_back(e12, e32);
                }
            }
        }
    }

    std::map<EdgeKey, std::vector<size_t>> touching;
    for (size_t k = 0; k < segments.size(); ++k) {
        touching[segments[k].first].push_back(k);
        touching[segments[k].second].push_back(k);
    }
    std::vector<bool> used(segments.size(), false);
    std::vector<Polyline> out;
    auto trace = [&](size_t first, EdgeKey start) {
        Polyline line;
        line.points.push_back(point(start));
        EdgeKey at = start;
        for (size_t seg = first;;) {
            used[seg] = true;
            at = segments[seg].first == at ? segments[seg].second : segments[seg].first;
            line.points.push_back(point(at));
            size_t next = segments.size();
            for (size_t cand : touching[at]) {
                if (!used[cand]) {
                    next = cand;
                    break;
                }
            }
            if (next == segments.size()) break;
            seg = next;
        }
        out.push_back(std::move(line));
    };
    // Open chains start at an end (edge touched once), closed loops anywhere.
    for (const auto& [edge, segs] : touching) {
        if (segs.size() == 1 && !used[segs[0]]) trace(segs[0], edge);
    }
    for (size_t k = 0; k < segments.size(); ++k) {
        if (!used[k]) trace(k, segments[k].first);
    }
    return out;
}

namespace {

json polylines_json(const std::vector<Polyline>& lines) {
    json arr = json::array();
    for (const auto& l : lines) {
        json pts = json::array();
        for (const auto& p : l.points) pts.push_back({p.alpha_bar, p.r});
        arr.push_back(std::move(pts));
    }
    return arr;
}

}  // namespace

std::string isolines_to_json(const ForwardMapGrid& grid, const Measurement& meas) {
    json j;
    j["axes"] = {{"alpha_bar_db_per_cm", grid.alpha_axis}, {"r", grid.r_axis}};
    j["point_order"] = {"alpha_bar_db_per_cm", "r"};
    j["g2_s"] = {{"level", meas.g2_signal},
                 {"polylines", polylines_json(isolines(grid, grid.g2_signal, meas.g2_signal))}};
    j["g2_i"] = {{"level", meas.g2_idler},
                 {"polylines", polylines_json(isolines(grid, grid.g2_idler, meas.g2_idler))}};
    if (meas.r_n) {
        j["r_n"] = {{"level", *meas.r_n},
                    {"polylines", polylines_json(isolines(grid, grid.r_n, *meas.r_n))}};
    }
    return j.dump(1);
}

std::string estimate_to_json(const LossEstimate& e) {
    json j;
    j["alpha_bar_db_per_cm"] = e.params.alpha_bar;
    j["r"] = e.params.r;
    j["alpha_s_db_per_cm"] = e.params.alpha_signal();
    j["alpha_i_db_per_cm"] = e.params.alpha_idler();
    j["residual_g2"] = {e.residual_signal, e.residual_idler};
    j["r_n_predicted"] = e.r_n_predicted;
    j["r_n_consistency"] = to_string(e.r_n_consistency);
    j["r_n_tolerance"] = e.r_n_tolerance;
    j["converged"] = e.converged;
    j["iterations"] = e.iterations;
    j["evaluations"] = e.evaluations;
    j["note"] = e.note;
    return j.dump(1);
}

}  // namespace pdcsim
