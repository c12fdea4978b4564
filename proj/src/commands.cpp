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

#include "pdcsim/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "pdcsim/error.hpp"
#include "pdcsim/io.hpp"
#include "pdcsim/loss_inversion.hpp"

namespace pdcsim {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

const char* library_version() noexcept { return PDCSIM_VERSION; }

namespace {

void say(const RunContext& ctx, const std::string& msg) {
    if (ctx.log) ctx.log(msg);
}

std::string path_in(const RunContext& ctx, const std::string& name) {
    return (fs::path(ctx.out_dir) / name).string();
}

void write_text(const RunContext& ctx, const std::string& name, const std::string& text) {
    write_file_atomic(path_in(ctx, name), text);
}

json json_or_null(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

// Physical part of the configuration that determines a lossless run.
json physics_key(const RunConfig& c) {
    RunConfig k = c;
    k.waveguide.alpha_signal_db_per_cm = 0.0;
    k.waveguide.alpha_idler_db_per_cm = 0.0;
    json j = json::parse(config_to_json(k));
    return {{"waveguide", j["waveguide"]},
            {"pump", j["pump"]},
            {"grid", j["grid"]},
            {"integrator", j["integrator"]}};
}

struct Metadata {
    std::string config_hash;
    double gamma = 0.0;
    std::string gamma_source;
    int grid_points = 0;
    double half_span_thz = 0.0;
    int steps = 0;
};

Metadata metadata(const RunContext& ctx, const GammaResolution& g) {
    return {hex64(config_hash(ctx.config)), g.gamma, g.source, ctx.config.grid.points,
            ctx.config.grid.half_span_thz, ctx.config.integrator.steps};
}

json meta_json(const Metadata& m) {
    return {{"code_version", library_version()},
            {"config_hash", m.config_hash},
            {"gamma_per_m", m.gamma},
            {"gamma_source", m.gamma_source},
            {"grid_points", m.grid_points},
            {"half_span_thz", m.half_span_thz},
            {"integrator_steps", m.steps},
            {"frame", kOutputFrame}};
}

CsvTable csv_with_meta(const Metadata& m) {
    CsvTable t;
    t.metadata = {{"code_version", library_version()},
                  {"config_hash", m.config_hash},
                  {"gamma_per_m", format_double(m.gamma)},
                  {"gamma_source", m.gamma_source},
                  {"grid_points", std::to_string(m.grid_points)},
                  {"half_span_thz", format_double(m.half_span_thz)},
                  {"integrator_steps", std::to_string(m.steps)},
                  {"frame", kOutputFrame}};
    return t;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

PdcSetup setup_with_gamma(const RunConfig& c, double gamma) {
    PdcSetup s = build_setup(c);
    s.waveguide.gamma = gamma;
    return s;
}

PropagationResult propagate_run(const RunContext& ctx, const PdcSetup& setup,
                                const std::string& checkpoint_dir) {
    PropagateOptions opt;
    if (ctx.config.integrator.checkpoint_every > 0 && !checkpoint_dir.empty()) {
        opt.checkpoint_every = ctx.config.integrator.checkpoint_every;
        opt.on_checkpoint = [&](const CorrelationState& s, int step) {
            char name[32];
            std::snprintf(name, sizeof name, "step-%06d.pdcs", step);
            save_state((fs::path(checkpoint_dir) / name).string(), s);
        };
    }
    say(ctx, "propagating: N = " + std::to_string(setup.grid.n_points) + ", " +
                 std::to_string(ctx.config.integrator.steps) + " steps");
    return propagate(setup, build_integrator(ctx.config), opt);
}

std::vector<double> linspace(double lo, double hi, int n) { return uniform_axis(lo, hi, n); }

HomScanResult scan_hom(const RunContext& ctx, const PropagationResult& run, const PdcSetup& setup) {
    const auto& h = ctx.config.hom;
    std::vector<double> delays = linspace(h.delay_min_ps * 1e-12, h.delay_max_ps * 1e-12, h.points);
    const double offset = h.delay_offset_ps ? *h.delay_offset_ps * 1e-12 : walkoff_delay_offset(setup);
    say(ctx, "HOM scan: " + std::to_string(h.points) + " delays");
    return hom_scan(run.state, delays, offset);
}

std::optional<double> g2_or_null(const CorrelationState& s, Subsystem sub, bool click) {
    try {
        return click ? g2_click(s, sub) : g2_moment(s, sub);
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::gain_too_low || e.kind() == ErrorKind::domain) return std::nullopt;
        throw;
    }
}

json summary_object(const PropagationResult& run, const HomScanResult* hom) {
    json j;
    const double na = run.photons_signal();
    const double nb = run.photons_idler();
    j["N_a"] = na;
    j["N_b"] = nb;
    std::optional<ModeNumbers> mu;
    if (na > 0.0 && nb > 0.0) mu = mode_numbers(mercer_wolf(run.state));
    j["mu_a"] = mu ? json(mu->mu_a) : json(nullptr);
    j["mu_b"] = mu ? json(mu->mu_b) : json(nullptr);
    j["mu_ab"] = mu ? json(mu->mu_ab) : json(nullptr);
    j["g2_s_click"] = json_or_null(g2_or_null(run.state, Subsystem::signal, true));
    j["g2_i_click"] = json_or_null(g2_or_null(run.state, Subsystem::idler, true));
    j["g2_s_moment"] = json_or_null(g2_or_null(run.state, Subsystem::signal, false));
    j["g2_i_moment"] = json_or_null(g2_or_null(run.state, Subsystem::idler, false));
    j["visibility"] = hom ? json(hom->visibility) : json(nullptr);
    j["N_total"] = na + nb;
    j["R_N"] = (na + nb) > 0.0 ? (nb - na) / (na + nb) : 0.0;
    j["max_hermiticity_drift"] = run.max_hermiticity_drift;
    return j;
}

CsvTable hom_table(const Metadata& m, const HomScanResult& hom) {
    CsvTable t = csv_with_meta(m);
    t.metadata.emplace_back("delay_offset_ps", format_double(hom.delay_offset * 1e12));
    t.columns = {"tau_ps", "P_cd", "P_c", "P_d"};
    for (size_t k = 0; k < hom.delays.size(); ++k) {
        t.rows.push_back({hom.delays[k] * 1e12, hom.p_cd[k], hom.p_c[k], hom.p_d[k]});
    }
    return t;
}

json hom_object(const HomScanResult& hom) {
    return {{"delay_offset_ps", hom.delay_offset * 1e12},
            {"peak", hom.peak},
            {"plateau", hom.plateau},
            {"minimum", hom.minimum},
            {"visibility", hom.visibility},
            {"dip_fwhm_ps", hom.dip_fwhm * 1e12},
            {"dip_position_ps", hom.dip_position * 1e12}};
}

void write_spectrum(const RunContext& ctx, const Metadata& m, const CorrelationState& s) {
    const SpectralResult sp = spectrum(s);
    CsvTable t = csv_with_meta(m);
    t.columns = {"detuning_thz", "n_signal", "n_idler"};
    for (Eigen::Index k = 0; k < sp.detuning_thz.size(); ++k) {
        t.rows.push_back({sp.detuning_thz[k], sp.signal[k], sp.idler[k]});
    }
    write_text(ctx, "spectrum.csv", t.render());
}

void write_jsi(const RunContext& ctx, const Metadata& m, const CorrelationState& s) {
    const Eigen::MatrixXd j = jsi(s);
    const SpectralResult sp = spectrum(s);
    CsvTable t = csv_with_meta(m);
    t.metadata.emplace_back("layout", "rows: signal detuning (THz); columns: idler detuning (THz)");
    t.columns.push_back("signal_thz\\idler_thz");
    for (Eigen::Index k = 0; k < sp.detuning_thz.size(); ++k) {
        t.columns.push_back(format_double(sp.detuning_thz[k]));
    }
    for (Eigen::Index r = 0; r < j.rows(); ++r) {
        std::vector<double> row{sp.detuning_thz[r]};
        for (Eigen::Index c = 0; c < j.cols(); ++c) row.push_back(j(r, c));
        t.rows.push_back(std::move(row));
    }
    write_text(ctx, "jsi.csv", t.render());
}

void write_temporal(const RunContext& ctx, const Metadata& m, const CorrelationState& s,
                    const PdcSetup& setup) {
    const auto& tc = ctx.config.temporal;
    const std::vector<double> times = linspace(tc.time_min_ps * 1e-12, tc.time_max_ps * 1e-12, tc.points);
    const TemporalProfile p = temporal_intensity(s, setup, times);
    // Signal and idler share one scale, the idler peak; the pump has its own.
    const double peak = p.idler.size() > 0 ? p.idler.maxCoeff() : 0.0;
    const double scale = peak > 0.0 ? 1.0 / peak : 0.0;
    CsvTable t = csv_with_meta(m);
    t.metadata.emplace_back("normalization", "I_signal and I_idler divided by max I_idler; I_pump peak 1");
    t.columns = {"t_ps", "I_signal", "I_idler", "I_pump"};
    for (size_t k = 0; k < times.size(); ++k) {
        t.rows.push_back({times[k] * 1e12, p.signal[k] * scale, p.idler[k] * scale, p.pump[k]});
    }
    write_text(ctx, "temporal.csv", t.render());
}

void write_diagnostics(const RunContext& ctx, const Metadata& m, const PropagationResult& run) {
    CsvTable t = csv_with_meta(m);
    t.columns = {"z_mm", "N_a", "N_b", "hermiticity_drift"};
    for (const DiagnosticSample& d : run.diagnostics) {
        t.rows.push_back({d.z * 1e3, d.photons_signal, d.photons_idler, d.hermiticity_drift});
    }
    write_text(ctx, "diagnostics.csv", t.render());
}

std::string sweep_name(double alpha_s, double alpha_i) {
    return "sweep_as" + format_double(alpha_s) + "_ai" + format_double(alpha_i);
}

}  // namespace

std::string state_summary_json(const PropagationResult& run, const PdcSetup& setup,
                               const RunConfig& config, const HomScanResult* hom) {
    RunContext ctx{config, "", 1, {}};
    GammaResolution g{setup.waveguide.gamma, "given", std::nullopt};
    json j = summary_object(run, hom);
    j["meta"] = meta_json(metadata(ctx, g));
    return dump(j);
}

GammaResolution resolve_gamma(const RunContext& ctx) {
    const RunConfig& c = ctx.config;
    if (c.waveguide.gamma_per_m) return {*c.waveguide.gamma_per_m, "config", std::nullopt};
    if (!c.calibration.target_total_photons) {
        fail(ErrorKind::config,
             "set waveguide.gamma_per_m or calibration.target_total_photons to fix the coupling");
    }
    const double target = *c.calibration.target_total_photons;
    json key = physics_key(c);
    key["target_total_photons"] = target;
    const std::string cache =
        ctx.out_dir.empty() ? std::string()
                            : path_in(ctx, "cache/calibration-" + hex64(fnv1a(key.dump())) + ".json");
    if (!cache.empty() && fs::exists(cache)) {
        try {
            const json j = json::parse(read_file(cache));
            if (j.at("key") == key) {
                return {j.at("gamma_per_m").get<double>(), "calibrated",
                        j.at("total_photons").get<double>()};
            }
        } catch (const std::exception&) {
            // Fall through and recalibrate.
        }
    }
    say(ctx, "calibrating gamma to N_total = " + format_double(target));
    const CalibrationResult r = calibrate_gamma(build_setup(c), build_integrator(c), target);
    json out;
    out["key"] = key;
    out["gamma_per_m"] = r.gamma;
    out["total_photons"] = r.total_photons;
    out["relative_error"] = r.relative_error;
    if (!cache.empty()) write_file_atomic(cache, dump(out));
    return {r.gamma, "calibrated", r.total_photons};
}

std::string run_simulate(const RunContext& ctx) {
    const GammaResolution g = resolve_gamma(ctx);
    const Metadata m = metadata(ctx, g);
    const PdcSetup setup = setup_with_gamma(ctx.config, g.gamma);
    const PropagationResult run = propagate_run(ctx, setup, path_in(ctx, "checkpoints"));
    const HomScanResult hom = scan_hom(ctx, run, setup);

    write_spectrum(ctx, m, run.state);
    write_jsi(ctx, m, run.state);
    write_temporal(ctx, m, run.state, setup);
    write_diagnostics(ctx, m, run);
    write_text(ctx, "hom.csv", hom_table(m, hom).render());
    save_state(path_in(ctx, "state.pdcs"), run.state);

    json j = summary_object(run, &hom);
    j["meta"] = meta_json(m);
    const std::string text = dump(j);
    write_text(ctx, "summary.json", text);
    return text;
}

std::string run_hom(const RunContext& ctx) {
    const GammaResolution g = resolve_gamma(ctx);
    const Metadata m = metadata(ctx, g);
    const PdcSetup setup = setup_with_gamma(ctx.config, g.gamma);
    const PropagationResult run = propagate_run(ctx, setup, path_in(ctx, "checkpoints"));
    const HomScanResult hom = scan_hom(ctx, run, setup);
    write_text(ctx, "hom.csv", hom_table(m, hom).render());
    json j = hom_object(hom);
    j["meta"] = meta_json(m);
    const std::string text = dump(j);
    write_text(ctx, "hom_summary.json", text);
    return text;
}

std::string run_g2(const RunContext& ctx) {
    const GammaResolution g = resolve_gamma(ctx);
    const Metadata m = metadata(ctx, g);
    const PdcSetup setup = setup_with_gamma(ctx.config, g.gamma);
    const PropagationResult run = propagate_run(ctx, setup, path_in(ctx, "checkpoints"));
    json j;
    j["g2_s_click"] = json_or_null(g2_or_null(run.state, Subsystem::signal, true));
    j["g2_i_click"] = json_or_null(g2_or_null(run.state, Subsystem::idler, true));
    j["g2_s_moment"] = json_or_null(g2_or_null(run.state, Subsystem::signal, false));
    j["g2_i_moment"] = json_or_null(g2_or_null(run.state, Subsystem::idler, false));
    std::optional<ModeNumbers> mu;
    if (run.photons_signal() > 0.0 && run.photons_idler() > 0.0) {
        mu = mode_numbers(mercer_wolf(run.state));
    }
    j["mu_a"] = mu ? json(mu->mu_a) : json(nullptr);
    j["mu_b"] = mu ? json(mu->mu_b) : json(nullptr);
    j["meta"] = meta_json(m);
    const std::string text = dump(j);
    write_text(ctx, "g2.json", text);
    return text;
}

std::string run_calibrate(const RunContext& ctx, std::optional<double> target) {
    RunConfig c = ctx.config;
    if (target) c.calibration.target_total_photons = *target;
    if (!c.calibration.target_total_photons) {
        fail(ErrorKind::config, "calibrate needs calibration.target_total_photons or a target");
    }
    c.waveguide.gamma_per_m.reset();
    RunContext sub = ctx;
    sub.config = c;
    const GammaResolution g = resolve_gamma(sub);

    RunConfig calibrated = c;
    calibrated.waveguide.gamma_per_m = g.gamma;
    write_text(ctx, "config.calibrated.json", config_to_json(calibrated) + "\n");

    json j;
    j["gamma_per_m"] = g.gamma;
    j["target_total_photons"] = *c.calibration.target_total_photons;
    j["total_photons"] = json_or_null(g.lossless_total_photons);
    j["relative_error"] =
        g.lossless_total_photons && *c.calibration.target_total_photons > 0.0
            ? json(std::abs(*g.lossless_total_photons - *c.calibration.target_total_photons) /
                   *c.calibration.target_total_photons)
            : json(0.0);
    j["meta"] = meta_json(metadata(sub, g));
    const std::string text = dump(j);
    write_text(ctx, "calibration.json", text);
    return text;
}

std::string run_invert(const RunContext& ctx) {
    const auto& inv = ctx.config.invert;
    if (!inv.g2_signal || !inv.g2_idler) {
        fail(ErrorKind::config, "invert needs invert.g2_signal and invert.g2_idler");
    }
    const GammaResolution g = resolve_gamma(ctx);
    const Metadata m = metadata(ctx, g);
    const PdcSetup setup = setup_with_gamma(ctx.config, g.gamma);
    const ForwardModel model(setup, build_integrator(ctx.config));

    // The seeding grid runs at its own resolution; its coupling is rescaled so
    // the lossless photon number matches the main model.
    double n_lossless = 0.0;
    if (g.lossless_total_photons) {
        n_lossless = *g.lossless_total_photons;
    } else {
        PdcSetup lossless = setup;
        lossless.waveguide.alpha_signal = lossless.waveguide.alpha_idler = 0.0;
        n_lossless = propagate(lossless, model.integrator()).total_photons();
    }
    RunConfig seed_cfg = ctx.config;
    seed_cfg.grid.points = inv.grid_points;
    seed_cfg.integrator.steps = inv.grid_steps;
    seed_cfg.waveguide.gamma_per_m.reset();
    seed_cfg.calibration.target_total_photons = n_lossless;
    RunContext seed_ctx = ctx;
    seed_ctx.config = seed_cfg;
    const GammaResolution seed_gamma = resolve_gamma(seed_ctx);
    const ForwardModel seed_model(setup_with_gamma(seed_cfg, seed_gamma.gamma),
                                  build_integrator(seed_cfg));

    json key = physics_key(seed_cfg);
    key["gamma_per_m"] = seed_gamma.gamma;
    key["alpha_axis"] = inv.alpha_axis;
    key["r_axis"] = inv.r_axis;
    const std::uint64_t grid_hash = fnv1a(key.dump());
    const std::string cache = path_in(ctx, "cache/forward-grid-" + hex64(grid_hash) + ".pdcs");
    say(ctx, "forward grid: " + std::to_string(inv.alpha_axis.size() * inv.r_axis.size()) +
                 " cells (cache " + cache + ")");
    int last_pct = -1;
    const ForwardMapGrid grid = cached_forward_grid(
        cache, seed_model, inv.alpha_axis, inv.r_axis, ctx.jobs, grid_hash,
        [&](int done, int total) {
            const int pct = 100 * done / total;
            if (pct / 10 != last_pct / 10) say(ctx, "forward grid " + std::to_string(pct) + "%");
            last_pct = pct;
        });

    Measurement meas{*inv.g2_signal, *inv.g2_idler, inv.r_n};
    InversionOptions opt;
    opt.residual_tolerance = inv.residual_tolerance;
    opt.measurement_tolerance = inv.measurement_tolerance;
    opt.r_n_tolerance = inv.r_n_tolerance;
    opt.max_iterations = inv.max_iterations;

    if (inv.isolines) write_text(ctx, "isolines.json", isolines_to_json(grid, meas) + "\n");
    say(ctx, "refining loss estimate");
    const LossEstimate est = invert_losses(grid, model, meas, opt);

    json j = json::parse(estimate_to_json(est));
    j["measured"] = {{"g2_signal", meas.g2_signal},
                     {"g2_idler", meas.g2_idler},
                     {"r_n", json_or_null(meas.r_n)}};
    j["seed_grid"] = {{"grid_points", inv.grid_points},
                      {"integrator_steps", inv.grid_steps},
                      {"gamma_per_m", seed_gamma.gamma},
                      {"invalid_cells", grid.cell_errors.size()}};
    j["meta"] = meta_json(m);
    const std::string text = dump(j);
    write_text(ctx, "estimate.json", text);
    return text;
}

std::string run_sweep(const RunContext& ctx) {
    const auto& sw = ctx.config.sweep;
    std::vector<std::pair<double, double>> points;  // (alpha_s, alpha_i) dB/cm
    // Checked here rather than when parsing so that overrides can set the two one at a time.
    if (sw.alpha_bar.empty() != sw.r.empty()) {
        fail(ErrorKind::config, "'sweep.alpha_bar' and 'sweep.r' must be given together");
    }
    for (double a : sw.alpha_db_per_cm) points.emplace_back(a, a);
    for (double ab : sw.alpha_bar) {
        for (double r : sw.r) {
            const LossParams p{ab, r};
            points.emplace_back(p.alpha_signal(), p.alpha_idler());
        }
    }
    if (points.empty()) {
        fail(ErrorKind::config, "sweep needs sweep.alpha_db_per_cm or sweep.alpha_bar with sweep.r");
    }
    const GammaResolution g = resolve_gamma(ctx);
    const Metadata m = metadata(ctx, g);

    std::vector<json> results(points.size());
    std::vector<std::string> errors(points.size());
    std::atomic<size_t> next{0};
    std::mutex mu;
    auto worker = [&] {
        for (size_t k = next++; k < points.size(); k = next++) {
            try {
                RunContext sub = ctx;
                sub.config.waveguide.alpha_signal_db_per_cm = points[k].first;
                sub.config.waveguide.alpha_idler_db_per_cm = points[k].second;
                sub.log = {};
                const PdcSetup setup = setup_with_gamma(sub.config, g.gamma);
                const PropagationResult run = propagate(setup, build_integrator(sub.config));
                const HomScanResult hom = scan_hom(sub, run, setup);
                json j;
                j["alpha_s_db_per_cm"] = points[k].first;
                j["alpha_i_db_per_cm"] = points[k].second;
                const LossParams lp = LossParams::from_losses(points[k].first, points[k].second);
                j["alpha_bar_db_per_cm"] = lp.alpha_bar;
                j["r"] = lp.r;
                j.update(summary_object(run, &hom));
                j["hom"] = hom_object(hom);
                results[k] = std::move(j);
                write_text(ctx, sweep_name(points[k].first, points[k].second) + ".json",
                           dump(results[k]));
            } catch (const Error& e) {
                errors[k] = e.what();
            }
            std::lock_guard lock(mu);
            say(ctx, "sweep point " + std::to_string(k + 1) + "/" + std::to_string(points.size()) +
                         " done");
        }
    };
    const int n_threads = std::clamp(ctx.jobs, 1, static_cast<int>(points.size()));
    std::vector<std::thread> pool;
    for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    for (size_t k = 0; k < points.size(); ++k) {
        if (!errors[k].empty()) fail(ErrorKind::numerical, "sweep point " + std::to_string(k) + ": " + errors[k]);
    }

    CsvTable t = csv_with_meta(m);
    t.columns = {"alpha_s_db_per_cm", "alpha_i_db_per_cm", "N_a", "N_b", "mu_a", "mu_b", "mu_ab",
                 "g2_s_click", "g2_i_click", "g2_s_moment", "g2_i_moment", "visibility",
                 "hom_peak", "hom_dip_fwhm_ps"};
    const double nan = std::nan("");
    auto num = [&](const json& v) { return v.is_null() ? nan : v.get<double>(); };
    for (const json& r : results) {
        t.rows.push_back({num(r["alpha_s_db_per_cm"]), num(r["alpha_i_db_per_cm"]), num(r["N_a"]),
                          num(r["N_b"]), num(r["mu_a"]), num(r["mu_b"]), num(r["mu_ab"]),
                          num(r["g2_s_click"]), num(r["g2_i_click"]), num(r["g2_s_moment"]),
                          num(r["g2_i_moment"]), num(r["visibility"]), num(r["hom"]["peak"]),
                          num(r["hom"]["dip_fwhm_ps"])});
    }
    write_text(ctx, "sweep.csv", t.render());
    json j;
    j["points"] = results;
    j["meta"] = meta_json(m);
    const std::string text = dump(j);
    write_text(ctx, "sweep.json", text);
    return text;
}

std::string run_command(const RunContext& ctx, std::string_view command) {
    if (command == "simulate") return run_simulate(ctx);
    if (command == "hom") return run_hom(ctx);
    if (command == "g2") return run_g2(ctx);
    if (command == "invert") return run_invert(ctx);
    if (command == "calibrate") return run_calibrate(ctx);
    if (command == "sweep") return run_sweep(ctx);
    fail(ErrorKind::config, "unknown command '" + std::string(command) + "'");
}

}  // namespace pdcsim
