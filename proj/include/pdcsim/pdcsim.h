/*
 * Copyright 2026 The pdcsim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/*
 * C interface of the pdcsim library.
 *
 * Objects are opaque handles released with the matching *_free function.
 * Every fallible call returns a pdcsim_status; on failure a description is
 * available from pdcsim_last_error() on the calling thread until the next
 * call into the library. Strings returned through char** out-parameters are
 * owned by the caller and released with pdcsim_free_string.
 */

#ifndef PDCSIM_PDCSIM_H_
#define PDCSIM_PDCSIM_H_

#include <stdint.h>

#if defined(_WIN32)
#define PDCSIM_API __declspec(dllexport)
#else
#define PDCSIM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pdcsim_status {
    PDCSIM_OK = 0,
    PDCSIM_ERR_IO = 1,
    PDCSIM_ERR_CONFIG = 2,
    PDCSIM_ERR_NUMERICAL = 3,
    PDCSIM_ERR_NO_INTERSECTION = 4,
    PDCSIM_ERR_AMBIGUITY = 5,
    PDCSIM_ERR_DOMAIN = 6,
    PDCSIM_ERR_CONTRACT = 7,
    PDCSIM_ERR_GAIN_TOO_LOW = 8,
    PDCSIM_ERR_INVALID_ARGUMENT = 9,
    PDCSIM_ERR_INTERNAL = 10
} pdcsim_status;

typedef enum pdcsim_subsystem { PDCSIM_SIGNAL = 0, PDCSIM_IDLER = 1 } pdcsim_subsystem;

typedef struct pdcsim_config pdcsim_config;
typedef struct pdcsim_state pdcsim_state;

typedef void (*pdcsim_log_fn)(const char* message, void* user_data);

PDCSIM_API const char* pdcsim_version(void);
PDCSIM_API const char* pdcsim_last_error(void);
PDCSIM_API const char* pdcsim_status_name(pdcsim_status status);
PDCSIM_API void pdcsim_free_string(char* s);

/* Progress messages of long-running calls; NULL disables. Process-wide. */
PDCSIM_API void pdcsim_set_log_callback(pdcsim_log_fn fn, void* user_data);

/* Configuration. Format is chosen by extension (.toml, otherwise JSON). */
PDCSIM_API pdcsim_status pdcsim_config_load(const char* path, pdcsim_config** out);
/* format: "json" or "toml". */
PDCSIM_API pdcsim_status pdcsim_config_parse(const char* text, const char* format,
                                             pdcsim_config** out);
/* assignment: "section.key=value"; value is read as JSON, else as a string. */
PDCSIM_API pdcsim_status pdcsim_config_set(pdcsim_config* config, const char* assignment);
PDCSIM_API pdcsim_status pdcsim_config_to_json(const pdcsim_config* config, char** out);
PDCSIM_API pdcsim_status pdcsim_config_hash(const pdcsim_config* config, uint64_t* out);
PDCSIM_API pdcsim_status pdcsim_config_output_dir(const pdcsim_config* config, char** out);
PDCSIM_API void pdcsim_config_free(pdcsim_config* config);

/*
 * Runs one command ("simulate", "hom", "g2", "invert", "calibrate",
 * "sweep") writing its files below out_dir. The JSON document describing
 * the result is returned in *json_out (may be NULL).
 */
PDCSIM_API pdcsim_status pdcsim_run(const pdcsim_config* config, const char* command,
                                    const char* out_dir, int jobs, char** json_out);

/* Calibrates the coupling to the lossless total photon number target and
 * stores it in the configuration. */
PDCSIM_API pdcsim_status pdcsim_calibrate(pdcsim_config* config, double target_total_photons,
                                          double* gamma_out);

/* Propagates the configured waveguide. The coupling must be set
 * (waveguide.gamma_per_m) or calibratable (calibration.target_total_photons). */
PDCSIM_API pdcsim_status pdcsim_propagate(const pdcsim_config* config, pdcsim_state** out);
PDCSIM_API pdcsim_status pdcsim_state_photons(const pdcsim_state* state, double* signal,
                                              double* idler);
PDCSIM_API pdcsim_status pdcsim_state_modes(const pdcsim_state* state, int* modes_per_band);
PDCSIM_API pdcsim_status pdcsim_state_g2(const pdcsim_state* state, pdcsim_subsystem subsystem,
                                         double* g2_click, double* g2_moment);
PDCSIM_API pdcsim_status pdcsim_state_mode_numbers(const pdcsim_state* state, double* mu_ab,
                                                   double* mu_a, double* mu_b);
PDCSIM_API pdcsim_status pdcsim_state_save(const pdcsim_state* state, const char* path);
PDCSIM_API pdcsim_status pdcsim_state_load(const char* path, pdcsim_state** out);
PDCSIM_API pdcsim_status pdcsim_state_to_json(const pdcsim_state* state, char** out);
PDCSIM_API void pdcsim_state_free(pdcsim_state* state);

#ifdef __cplusplus
}
#endif

#endif /* PDCSIM_PDCSIM_H_ */
