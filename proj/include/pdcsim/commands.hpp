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

// The run-level workflows behind each command of the command-line tool.
// Every command writes its files below an output directory and returns the
// JSON document it would print.

#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>

#include "pdcsim/config.hpp"
#include "pdcsim/measurement.hpp"
#include "pdcsim/propagation.hpp"

namespace pdcsim {

const char* library_version() noexcept;

using LogSink = std::function<void(std::string_view)>;

struct RunContext {
    RunConfig config;
    std::string out_dir;
    int jobs = 1;
    LogSink log;
};

struct GammaResolution {
    double gamma = 0.0;
    std::string source;  // "config" or "calibrated"
    std::optional<double> lossless_total_photons;
};

/// Gamma from the config, or calibrated to calibration.target_total_photons
/// at the configured resolution. Calibrations are cached under
/// <out_dir>/cache keyed by the physical configuration.
GammaResolution resolve_gamma(const RunContext& ctx);

std::string run_simulate(const RunContext& ctx);
std::string run_hom(const RunContext& ctx);
std::string run_g2(const RunContext& ctx);
std::string run_invert(const RunContext& ctx);
/// target overrides calibration.target_total_photons when given.
std::string run_calibrate(const RunContext& ctx, std::optional<double> target = std::nullopt);
std::string run_sweep(const RunContext& ctx);

/// Dispatches by command name.
std::string run_command(const RunContext& ctx, std::string_view command);

/// Summary of one propagated state: photon numbers, mode numbers, both g2
/// definitions and, when a scan is given, the HOM visibility. Ratios that
/// are undefined for the vacuum are null.
std::string state_summary_json(const PropagationResult& run, const PdcSetup& setup,
                               const RunConfig& config, const HomScanResult* hom);

}  // namespace pdcsim
