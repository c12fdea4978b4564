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

// Estimation of internal waveguide losses from the pair of measured g2
// values. The loss pair is parametrized as
//
//   alpha_s = alpha_bar (1 + r),   alpha_i = alpha_bar (1 - r)
//
// and the forward map (alpha_bar, r) -> (g2_s, g2_i, R_N) is inverted by
// seeding from a sampled grid and polishing with damped Newton steps.

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pdcsim/physics.hpp"
#include "pdcsim/propagation.hpp"

namespace pdcsim {

struct LossParams {
    double alpha_bar = 0.0;  // dB/cm
    double r = 0.0;

    double alpha_signal() const { return alpha_bar * (1.0 + r); }  // dB/cm
    double alpha_idler() const { return alpha_bar * (1.0 - r); }   // dB/cm
    static LossParams from_losses(double alpha_signal_db, double alpha_idler_db);
    void validate() const;
};

struct CalibrationResult {
    double gamma = 0.0;
    double total_photons = 0.0;
    double relative_error = 0.0;
    int propagations = 0;
};

/// Finds Gamma such that the lossless total photon number equals the target.
/// Uses N ~ Gamma^2 and repeats the rescale until the relative error is
/// below rel_tol. Losses in the setup are ignored.
CalibrationResult calibrate_gamma(const PdcSetup& setup, const IntegratorConfig& integrator,
                                  double target_total_photons, double rel_tol = 1e-5,
                                  int max_propagations = 8);

struct ForwardValues {
    double g2_signal = 0.0;
    double g2_idler = 0.0;
    double r_n = 0.0;  // (N_i - N_s) / (N_s + N_i)
};

/// Pure map from loss parameters to click-based g2 values and photon imbalance.
class ForwardModel {
  public:
    ForwardModel(PdcSetup setup, IntegratorConfig integrator);

    ForwardValues evaluate(const LossParams& params) const;
    PdcSetup setup_for(const LossParams& params) const;

    const PdcSetup& setup() const { return setup_; }
    const IntegratorConfig& integrator() const { return integrator_; }

  private:
    PdcSetup setup_;
    IntegratorConfig integrator_;
};

struct ForwardMapGrid {
    std::vector<double> alpha_axis;  // dB/cm, increasing
    std::vector<double> r_axis;      // increasing
    Eigen::MatrixXd g2_signal;       // rows follow alpha_axis, columns r_axis
    Eigen::MatrixXd g2_idler;
    Eigen::MatrixXd r_n;
    Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> valid;
    std::vector<std::string> cell_errors;  // "alpha,r: message" for invalid cells

    std::uint64_t config_hash = 0;
    double gamma = 0.0;
    int grid_points = 0;
    int step_count = 0;

    bool valid_cell(Eigen::Index ia, Eigen::Index ir) const { return valid(ia, ir) != 0; }
    /// Bilinear interpolation; empty when outside the axes or a corner is invalid.
    std::optional<ForwardValues> interpolate(const LossParams& p) const;
    void check_consistency() const;
};

/// Default sampling used to seed inversions: denser at small alpha_bar where
/// the surfaces curve most.
std::vector<double> default_alpha_axis();
std::vector<double> default_r_axis();
std::vector<double> uniform_axis(double lo, double hi, int points);

using GridProgress = std::function<void(int done, int total)>;

ForwardMapGrid build_forward_grid(const ForwardModel& model, std::vector<double> alpha_axis,
                                  std::vector<double> r_axis, int jobs = 1,
                                  std::uint64_t config_hash = 0,
                                  const GridProgress& progress = {});

void save_forward_grid(const std::string& path, const ForwardMapGrid& grid);
ForwardMapGrid load_forward_grid(const std::string& path);

/// Loads the cache when it exists and its key matches, else builds and stores it.
ForwardMapGrid cached_forward_grid(const std::string& path, const ForwardModel& model,
                                   std::vector<double> alpha_axis, std::vector<double> r_axis,
                                   int jobs, std::uint64_t config_hash,
                                   const GridProgress& progress = {});

struct InversionOptions {
    double residual_tolerance = 1e-4;    // g2 units, max norm
    double measurement_tolerance = 0.02;  // g2 units, for the coarse scan
    double r_n_tolerance = 0.05;
    int max_iterations = 30;
    double max_abs_r = 0.99;
    double relative_step = 1e-3;
    /// Converged roots closer than this (relative alpha_bar, absolute r) are one.
    double merge_alpha_rel = 0.05;
    double merge_r_abs = 0.05;
    int max_candidates = 6;
};

struct Measurement {
    double g2_signal = 0.0;
    double g2_idler = 0.0;
    std::optional<double> r_n;
};

enum class Consistency { pass, fail, not_checked };
const char* to_string(Consistency c) noexcept;

struct LossEstimate {
    LossParams params;
    double residual_signal = 0.0;  // model - measured
    double residual_idler = 0.0;
    double r_n_predicted = 0.0;
    Consistency r_n_consistency = Consistency::not_checked;
    double r_n_tolerance = 0.0;
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
    std::string note;
};

/// Seeds from the grid and refines each well-separated seed with Newton on
/// the model. Throws no_intersection when nothing fits and ambiguity when
/// several distinct roots do.
/// Any smooth (alpha_bar, r) -> g2 map; the model overloads wrap ForwardModel::evaluate.
using ForwardFn = std::function<ForwardValues(const LossParams&)>;

LossEstimate invert_losses(const ForwardMapGrid& grid, const ForwardModel& model,
                           const Measurement& measured, const InversionOptions& options = {});
LossEstimate invert_losses(const ForwardMapGrid& grid, const ForwardFn& forward,
                           const Measurement& measured, const InversionOptions& options = {});

/// Candidate seeds: local minima of the interpolated misfit within the
/// measurement tolerance, best first, thinned to well-separated points.
std::vector<LossParams> seed_candidates(const ForwardMapGrid& grid, const Measurement& measured,
                                        const InversionOptions& options);

/// Newton refinement from one seed. Never throws for non-convergence; check
/// LossEstimate::converged.
LossEstimate refine_estimate(const ForwardModel& model, const Measurement& measured,
                             LossParams seed, const InversionOptions& options);
LossEstimate refine_estimate(const ForwardFn& forward, const Measurement& measured,
                             LossParams seed, const InversionOptions& options);

struct Polyline {
    std::vector<LossParams> points;
};

/// Level set of a sampled surface (rows alpha_axis, columns r_axis) by
/// marching squares, stitched into polylines.
std::vector<Polyline> isolines(const ForwardMapGrid& grid, const Eigen::MatrixXd& surface,
                               double level);

std::string isolines_to_json(const ForwardMapGrid& grid, const Measurement& measured);
std::string estimate_to_json(const LossEstimate& estimate);

}  // namespace pdcsim
