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

#include "pdcsim/pdcsim.h"

#include <cstdlib>
#include <cstring>
#include <mutex>
#include <new>
#include <string>

#include "pdcsim/commands.hpp"
#include "pdcsim/config.hpp"
#include "pdcsim/error.hpp"
#include "pdcsim/gaussian.hpp"
#include "pdcsim/io.hpp"
#include "pdcsim/measurement.hpp"

struct pdcsim_config {
    pdcsim::RunConfig config;
};

struct pdcsim_state {
    pdcsim::CorrelationState state;
};

namespace {

thread_local std::string g_last_error;

std::mutex g_log_mutex;
pdcsim_log_fn g_log_fn = nullptr;
void* g_log_user = nullptr;

pdcsim_status status_of(pdcsim::ErrorKind kind) {
    using pdcsim::ErrorKind;
    switch (kind) {
        case ErrorKind::domain: return PDCSIM_ERR_DOMAIN;
        case ErrorKind::contract: return PDCSIM_ERR_CONTRACT;
        case ErrorKind::config: return PDCSIM_ERR_CONFIG;
        case ErrorKind::numerical: return PDCSIM_ERR_NUMERICAL;
        case ErrorKind::gain_too_low: return PDCSIM_ERR_GAIN_TOO_LOW;
        case ErrorKind::no_intersection: return PDCSIM_ERR_NO_INTERSECTION;
        case ErrorKind::ambiguity: return PDCSIM_ERR_AMBIGUITY;
        case ErrorKind::io: return PDCSIM_ERR_IO;
    }
    return PDCSIM_ERR_INTERNAL;
}

template <class F>
pdcsim_status guarded(F&& body) {
    g_last_error.clear();
    try {
        body();
        return PDCSIM_OK;
    } catch (const pdcsim::Error& e) {
        g_last_error = e.what();
        return status_of(e.kind());
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return PDCSIM_ERR_INTERNAL;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return PDCSIM_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown failure";
        return PDCSIM_ERR_INTERNAL;
    }
}

pdcsim_status invalid(const char* what) {
    g_last_error = what;
    return PDCSIM_ERR_INVALID_ARGUMENT;
}

char* copy_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, s.data(), s.size() + 1);
    return out;
}

void log_message(std::string_view msg) {
    std::lock_guard lock(g_log_mutex);
    if (g_log_fn) g_log_fn(std::string(msg).c_str(), g_log_user);
}

pdcsim::RunContext context(const pdcsim_config* c, const char* out_dir, int jobs) {
    pdcsim::RunContext ctx{c->config, out_dir ? out_dir : "", jobs, {}};
    ctx.log = log_message;
    return ctx;
}

}  // namespace

extern "C" {

const char* pdcsim_version(void) { return pdcsim::library_version(); }

const char* pdcsim_last_error(void) { return g_last_error.c_str(); }

const char* pdcsim_status_name(pdcsim_status status) {
    switch (status) {
        case PDCSIM_OK: return "ok";
        case PDCSIM_ERR_IO: return "io";
        case PDCSIM_ERR_CONFIG: return "config";
        case PDCSIM_ERR_NUMERICAL: return "numerical";
        case PDCSIM_ERR_NO_INTERSECTION: return "no-intersection";
        case PDCSIM_ERR_AMBIGUITY: return "ambiguity";
        case PDCSIM_ERR_DOMAIN: return "domain";
        case PDCSIM_ERR_CONTRACT: return "contract";
        case PDCSIM_ERR_GAIN_TOO_LOW: return "gain-too-low";
        case PDCSIM_ERR_INVALID_ARGUMENT: return "invalid-argument";
        case PDCSIM_ERR_INTERNAL: return "internal";
    }
    return "unknown";
}

void pdcsim_free_string(char* s) { std::free(s); }

void pdcsim_set_log_callback(pdcsim_log_fn fn, void* user_data) {
    std::lock_guard lock(g_log_mutex);
    g_log_fn = fn;
    g_log_user = user_data;
}

pdcsim_status pdcsim_config_load(const char* path, pdcsim_config** out) {
    if (!path || !out) return invalid("pdcsim_config_load: null argument");
    *out = nullptr;
    return guarded([&] { *out = new pdcsim_config{pdcsim::load_config(path)}; });
}

pdcsim_status pdcsim_config_parse(const char* text, const char* format, pdcsim_config** out) {
    if (!text || !format || !out) return invalid("pdcsim_config_parse: null argument");
    *out = nullptr;
    return guarded([&] { *out = new pdcsim_config{pdcsim::parse_config(text, format)}; });
}

pdcsim_status pdcsim_config_set(pdcsim_config* config, const char* assignment) {
    if (!config || !assignment) return invalid("pdcsim_config_set: null argument");
    return guarded([&] { config->config = pdcsim::apply_override(config->config, assignment); });
}

pdcsim_status pdcsim_config_to_json(const pdcsim_config* config, char** out) {
    if (!config || !out) return invalid("pdcsim_config_to_json: null argument");
    *out = nullptr;
    return guarded([&] { *out = copy_string(pdcsim::config_to_json(config->config)); });
}

pdcsim_status pdcsim_config_hash(const pdcsim_config* config, uint64_t* out) {
    if (!config || !out) return invalid("pdcsim_config_hash: null argument");
    return guarded([&] { *out = pdcsim::config_hash(config->config); });
}

pdcsim_status pdcsim_config_output_dir(const pdcsim_config* config, char** out) {
    if (!config || !out) return invalid("pdcsim_config_output_dir: null argument");
    *out = nullptr;
    return guarded([&] { *out = copy_string(config->config.output.dir); });
}

void pdcsim_config_free(pdcsim_config* config) { delete config; }

pdcsim_status pdcsim_run(const pdcsim_config* config, const char* command, const char* out_dir,
                         int jobs, char** json_out) {
    if (!config || !command || !out_dir) return invalid("pdcsim_run: null argument");
    if (json_out) *json_out = nullptr;
    return guarded([&] {
        const std::string text = pdcsim::run_command(context(config, out_dir, jobs), command);
        if (json_out) *json_out = copy_string(text);
    });
}

pdcsim_status pdcsim_calibrate(pdcsim_config* config, double target, double* gamma_out) {
    if (!config) return invalid("pdcsim_calibrate: null argument");
    return guarded([&] {
        const pdcsim::RunConfig& c = config->config;
        const pdcsim::CalibrationResult r = pdcsim::calibrate_gamma(
            pdcsim::build_setup(c), pdcsim::build_integrator(c), target);
        config->config.waveguide.gamma_per_m = r.gamma;
        if (gamma_out) *gamma_out = r.gamma;
    });
}

pdcsim_status pdcsim_propagate(const pdcsim_config* config, pdcsim_state** out) {
    if (!config || !out) return invalid("pdcsim_propagate: null argument");
    *out = nullptr;
    return guarded([&] {
        const pdcsim::RunContext ctx = context(config, nullptr, 1);
        pdcsim::PdcSetup setup = pdcsim::build_setup(config->config);
        setup.waveguide.gamma = pdcsim::resolve_gamma(ctx).gamma;
        auto run = pdcsim::propagate(setup, pdcsim::build_integrator(config->config));
        *out = new pdcsim_state{std::move(run.state)};
    });
}

pdcsim_status pdcsim_state_photons(const pdcsim_state* state, double* signal, double* idler) {
    if (!state) return invalid("pdcsim_state_photons: null argument");
    return guarded([&] {
        if (signal) *signal = state->state.d_signal().trace().real();
        if (idler) *idler = state->state.d_idler().trace().real();
    });
}

pdcsim_status pdcsim_state_modes(const pdcsim_state* state, int* modes_per_band) {
    if (!state || !modes_per_band) return invalid("pdcsim_state_modes: null argument");
    *modes_per_band = state->state.modes_per_band();
    return PDCSIM_OK;
}

pdcsim_status pdcsim_state_g2(const pdcsim_state* state, pdcsim_subsystem subsystem,
                              double* g2_click, double* g2_moment) {
    if (!state) return invalid("pdcsim_state_g2: null argument");
    if (subsystem != PDCSIM_SIGNAL && subsystem != PDCSIM_IDLER) {
        return invalid("pdcsim_state_g2: unknown subsystem");
    }
    return guarded([&] {
        const auto sub = subsystem == PDCSIM_SIGNAL ? pdcsim::Subsystem::signal
                                                    : pdcsim::Subsystem::idler;
        if (g2_click) *g2_click = pdcsim::g2_click(state->state, sub);
        if (g2_moment) *g2_moment = pdcsim::g2_moment(state->state, sub);
    });
}

pdcsim_status pdcsim_state_mode_numbers(const pdcsim_state* state, double* mu_ab, double* mu_a,
                                        double* mu_b) {
    if (!state) return invalid("pdcsim_state_mode_numbers: null argument");
    return guarded([&] {
        const pdcsim::ModeNumbers mu = pdcsim::mode_numbers(pdcsim::mercer_wolf(state->state));
        if (mu_ab) *mu_ab = mu.mu_ab;
        if (mu_a) *mu_a = mu.mu_a;
        if (mu_b) *mu_b = mu.mu_b;
    });
}

pdcsim_status pdcsim_state_save(const pdcsim_state* state, const char* path) {
    if (!state || !path) return invalid("pdcsim_state_save: null argument");
    return guarded([&] { pdcsim::save_state(path, state->state); });
}

pdcsim_status pdcsim_state_load(const char* path, pdcsim_state** out) {
    if (!path || !out) return invalid("pdcsim_state_load: null argument");
    *out = nullptr;
    return guarded([&] { *out = new pdcsim_state{pdcsim::load_state(path)}; });
}

pdcsim_status pdcsim_state_to_json(const pdcsim_state* state, char** out) {
    if (!state || !out) return invalid("pdcsim_state_to_json: null argument");
    *out = nullptr;
    return guarded([&] { *out = copy_string(pdcsim::state_to_json(state->state)); });
}

void pdcsim_state_free(pdcsim_state* state) { delete state; }

}  // extern "C"
