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

// Run configuration: one JSON or TOML file per run, every physical quantity
// in explicit units, converted to SI exactly once when the setup is built.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pdcsim/loss_inversion.hpp"
#include "pdcsim/physics.hpp"
#include "pdcsim/propagation.hpp"

namespace pdcsim {

struct BranchConfig {
    double n = 1.0;
    double group_velocity_over_c = 1.0;
    /// Frequency at which n is quoted; defaults to the pump center for the
    /// pump branch and half of it for signal and idler.
    std::optional<double> reference_wavelength_nm;
};

struct RunConfig {
    struct Waveguide {
        double length_mm = 10.0;
        double alpha_signal_db_per_cm = 0.0;
        double alpha_idler_db_per_cm = 0.0;
        std::optional<double> gamma_per_m;
        std::optional<double> k_qpm_per_m;  // default: phase matched at the pump center
        BranchConfig pump, signal, idler;
    } waveguide;

    struct Pump {
        double wavelength_nm = 755.0;
        double fwhm_ps = 0.5;
    } pump;

    struct Grid {
        int points = 192;
        double half_span_thz = 4.0;
    } grid;

    struct Integrator {
        int steps = 512;
        IntegratorMethod method = IntegratorMethod::rk4;
        double tolerance = 1e-8;
        StateLayout layout = StateLayout::type2_blocks;
        int checkpoint_every = 0;
    } integrator;

    struct Calibration {
        std::optional<double> target_total_photons;
    } calibration;

    struct Hom {
        double delay_min_ps = -6.0;
        double delay_max_ps = 6.0;
        int points = 241;
        std::optional<double> delay_offset_ps;  // empty: walk-off midpoint
    } hom;

    struct Temporal {
        double time_min_ps = -4.0;
        double time_max_ps = 4.0;
        int points = 401;
    } temporal;

    struct Invert {
        std::optional<double> g2_signal;
        std::optional<double> g2_idler;
        std::optional<double> r_n;
        double residual_tolerance = 1e-4;
        double measurement_tolerance = 0.02;
        double r_n_tolerance = 0.05;
        int max_iterations = 30;
        int grid_points = 128;  // resolution of the seeding grid
        int grid_steps = 256;
        std::vector<double> alpha_axis = default_alpha_axis();
        std::vector<double> r_axis = default_r_axis();
        bool isolines = true;
    } invert;

    struct Sweep {
        std::vector<double> alpha_db_per_cm;  // equal losses
        std::vector<double> alpha_bar;        // with r: product grid
        std::vector<double> r;
    } sweep;

    struct Output {
        std::string dir = "out";
    } output;
};

/// Strict parse: unknown keys, wrong types and out-of-range values raise
/// ErrorKind::config.
RunConfig parse_config(std::string_view text, std::string_view format);
RunConfig load_config(const std::string& path);

/// Canonical JSON with all defaults filled in; stable key order.
std::string config_to_json(const RunConfig& config);

/// Applies "section.key=value" with value parsed as JSON when possible and
/// as a bare string otherwise, then re-validates.
RunConfig apply_override(const RunConfig& config, std::string_view assignment);

/// FNV-1a of the canonical JSON without the output section.
std::uint64_t config_hash(const RunConfig& config);

/// SI setup at the configured resolution. Gamma is taken from the config
/// (zero when unset); see resolve_gamma.
PdcSetup build_setup(const RunConfig& config);
IntegratorConfig build_integrator(const RunConfig& config);

}  // namespace pdcsim
