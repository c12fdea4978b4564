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

// pdcsim command-line tool. Talks to the library only through its C API.

#include <cstdio>
#include <cstdlib>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pdcsim/pdcsim.h"

namespace {

constexpr int kExitIo = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitNoIntersection = 4;
constexpr int kExitAmbiguity = 5;

int exit_code(pdcsim_status s) {
    switch (s) {
        case PDCSIM_OK: return 0;
        case PDCSIM_ERR_CONFIG:
        case PDCSIM_ERR_INVALID_ARGUMENT: return kExitConfig;
        case PDCSIM_ERR_NO_INTERSECTION: return kExitNoIntersection;
        case PDCSIM_ERR_AMBIGUITY: return kExitAmbiguity;
        case PDCSIM_ERR_IO: return kExitIo;
        default: return kExitNumerical;
    }
}

int report(pdcsim_status s) {
    std::fprintf(stderr, "pdcsim: %s error: %s\n", pdcsim_status_name(s), pdcsim_last_error());
    return exit_code(s);
}

void log_to_stderr(const char* message, void*) { std::fprintf(stderr, "pdcsim: %s\n", message); }

struct Options {
    std::string command;
    std::string config;
    std::string out;
    int jobs = 1;
    std::vector<std::string> sets;
    double target = -1.0;
    bool quiet = false;
};

int run(const Options& opt) {
    if (!opt.quiet) pdcsim_set_log_callback(log_to_stderr, nullptr);

    pdcsim_config* config = nullptr;
    if (pdcsim_status s = pdcsim_config_load(opt.config.c_str(), &config); s != PDCSIM_OK) {
        return report(s);
    }
    std::unique_ptr<pdcsim_config, decltype(&pdcsim_config_free)> guard(config, pdcsim_config_free);

    for (const std::string& assignment : opt.sets) {
        if (pdcsim_status s = pdcsim_config_set(config, assignment.c_str()); s != PDCSIM_OK) {
            return report(s);
        }
    }
    if (opt.target >= 0.0) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", opt.target);
        const std::string a = "calibration.target_total_photons=" + std::string(buf);
        if (pdcsim_status s = pdcsim_config_set(config, a.c_str()); s != PDCSIM_OK) {
            return report(s);
        }
    }

    // Output directory: --out, then the environment, then the config file.
    std::string out_dir = opt.out;
    if (out_dir.empty()) {
        if (const char* env = std::getenv("PDCSIM_OUT_DIR"); env && *env) out_dir = env;
    }
    if (out_dir.empty()) {
        char* dir = nullptr;
        if (pdcsim_status s = pdcsim_config_output_dir(config, &dir); s != PDCSIM_OK) return report(s);
        out_dir = dir;
        pdcsim_free_string(dir);
    }

    char* result = nullptr;
    const pdcsim_status s = pdcsim_run(config, opt.command.c_str(), out_dir.c_str(), opt.jobs, &result);
    if (s != PDCSIM_OK) return report(s);
    std::fputs(result, stdout);
    pdcsim_free_string(result);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Pulsed type-II PDC in lossy waveguides: propagation, observables and loss inversion"};
    app.set_version_flag("--version", std::string(pdcsim_version()));
    app.require_subcommand(1);

    Options opt;
    const std::pair<const char*, const char*> commands[] = {
        {"simulate", "Propagate and write summary, spectra, JSI, temporal profiles and HOM scan"},
        {"hom", "Propagate and scan the Hong-Ou-Mandel delay"},
        {"g2", "Propagate and report click- and moment-based g2 of both subsystems"},
        {"invert", "Estimate internal losses from measured g2 values"},
        {"calibrate", "Fix the coupling to a lossless total photon number"},
        {"sweep", "Run a list of loss settings"},
    };
    for (const auto& [name, help] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", opt.config, "Run configuration (.json or .toml)")
            ->required()
            ->check(CLI::ExistingFile);
        sub->add_option("--out", opt.out, "Output directory (overrides PDCSIM_OUT_DIR and output.dir)");
        sub->add_option("--jobs", opt.jobs, "Worker threads for grids and sweeps")
            ->check(CLI::PositiveNumber);
        sub->add_option("--set", opt.sets, "Override a config value: section.key=value (repeatable)")
            ->take_all();
        sub->add_flag("--quiet", opt.quiet, "Suppress progress messages");
        if (std::string(name) == "calibrate") {
            sub->add_option("--target", opt.target, "Lossless total photon number")
                ->check(CLI::NonNegativeNumber);
        }
        sub->callback([&opt, sub] { opt.command = sub->get_name(); });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }
    return run(opt);
}
