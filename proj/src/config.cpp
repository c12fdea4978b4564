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

#include "pdcsim/config.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include <json.hpp>
#include <toml.hpp>

#include "pdcsim/error.hpp"
#include "pdcsim/io.hpp"

namespace pdcsim {

using json = nlohmann::ordered_json;

namespace {

json toml_to_json(const toml::node& node, const std::string& path) {
    if (const auto* t = node.as_table()) {
        json obj = json::object();
        for (const auto& [k, v] : *t) obj[std::string(k.str())] = toml_to_json(v, path + "." + std::string(k.str()));
        return obj;
    }
    if (const auto* a = node.as_array()) {
        json arr = json::array();
        for (const auto& v : *a) arr.push_back(toml_to_json(v, path));
        return arr;
    }
    if (const auto* v = node.as_integer()) return v->get();
    if (const auto* v = node.as_floating_point()) return v->get();
    if (const auto* v = node.as_boolean()) return v->get();
    if (const auto* v = node.as_string()) return v->get();
    fail(ErrorKind::config, "unsupported TOML value type at " + path);
}

// Reads one object, remembering which keys were consumed so that leftovers
// can be reported as unknown.
class Section {
  public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) fail(ErrorKind::config, where() + " must be a table");
    }

    bool has(const char* key) const { return j_.contains(key); }

    std::optional<double> opt_number(const char* key) {
        if (!take(key)) return std::nullopt;
        const json& v = j_.at(key);
        if (!v.is_number()) fail(ErrorKind::config, where(key) + " must be a number");
        const double x = v.get<double>();
        if (!std::isfinite(x)) fail(ErrorKind::config, where(key) + " must be finite");
        return x;
    }
    double number(const char* key, double def) { return opt_number(key).value_or(def); }
    double required_number(const char* key) {
        auto v = opt_number(key);
        if (!v) fail(ErrorKind::config, where(key) + " is required");
        return *v;
    }

    int integer(const char* key, int def) {
        if (!take(key)) return def;
        const json& v = j_.at(key);
        if (v.is_number_integer()) {
            const auto x = v.get<long long>();
            if (x < INT32_MIN || x > INT32_MAX) fail(ErrorKind::config, where(key) + " out of range");
            return static_cast<int>(x);
        }
        if (v.is_number_float()) {
            const double x = v.get<double>();
            if (x == std::floor(x) && std::abs(x) < 2e9) return static_cast<int>(x);
        }
        fail(ErrorKind::config, where(key) + " must be an integer");
    }

    bool boolean(const char* key, bool def) {
        if (!take(key)) return def;
        if (!j_.at(key).is_boolean()) fail(ErrorKind::config, where(key) + " must be true or false");
        return j_.at(key).get<bool>();
    }

    std::string string(const char* key, const std::string& def) {
        if (!take(key)) return def;
        if (!j_.at(key).is_string()) fail(ErrorKind::config, where(key) + " must be a string");
        return j_.at(key).get<std::string>();
    }

    std::vector<double> numbers(const char* key, std::vector<double> def) {
        if (!take(key)) return def;
        const json& v = j_.at(key);
        if (!v.is_array()) fail(ErrorKind::config, where(key) + " must be an array of numbers");
        std::vector<double> out;
        for (const auto& x : v) {
            if (!x.is_number()) fail(ErrorKind::config, where(key) + " must be an array of numbers");
            out.push_back(x.get<double>());
            if (!std::isfinite(out.back())) fail(ErrorKind::config, where(key) + " must be finite");
        }
        return out;
    }

    Section sub(const char* key, bool required) {
        static const json empty = json::object();
        if (!take(key)) {
            if (required) fail(ErrorKind::config, where(key) + " section is required");
            return Section(empty, path_.empty() ? key : path_ + "." + key);
        }
        return Section(j_.at(key), path_.empty() ? key : path_ + "." + key);
    }

    const json& raw(const char* key) {
        take(key);
        return j_.at(key);
    }

    void finish() const {
        for (const auto& [k, v] : j_.items()) {
            if (!seen_.count(k)) fail(ErrorKind::config, "unknown key " + where(k.c_str()));
        }
    }

    std::string where(const char* key = nullptr) const {
        std::string p = path_;
        if (key) p = p.empty() ? key : p + "." + key;
        return "'" + (p.empty() ? std::string("<root>") : p) + "'";
    }

  private:
    bool take(const char* key) {
        if (!j_.contains(key)) return false;
        seen_.insert(key);
        return true;
    }
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

void require(bool ok, const std::string& message) {
    if (!ok) fail(ErrorKind::config, message);
}

BranchConfig parse_branch(Section s) {
    BranchConfig b;
    b.n = s.required_number("n");
    const auto v = s.opt_number("group_velocity_over_c");
    const auto ng = s.opt_number("group_index");
    require(v.has_value() != ng.has_value(),
            s.where() + " needs exactly one of group_velocity_over_c or group_index");
    b.group_velocity_over_c = v ? *v : 1.0 / *ng;
    b.reference_wavelength_nm = s.opt_number("reference_wavelength_nm");
    s.finish();
    require(b.n > 0.0, s.where("n") + " must be positive");
    require(b.group_velocity_over_c > 0.0 && b.group_velocity_over_c <= 1.0,
            s.where() + " group velocity must lie in (0, c]");
    require(!b.reference_wavelength_nm || *b.reference_wavelength_nm > 0.0,
            s.where("reference_wavelength_nm") + " must be positive");
    return b;
}

void check_axis(const std::vector<double>& axis, const std::string& what) {
    require(!axis.empty(), what + " must not be empty");
    for (size_t k = 1; k < axis.size(); ++k) {
        require(axis[k] > axis[k - 1], what + " must be strictly increasing");
    }
}

RunConfig parse_json_tree(const json& root) {
    RunConfig c;
    Section top(root, "");

    {
        Section w = top.sub("waveguide", true);
        auto& o = c.waveguide;
        o.length_mm = w.required_number("length_mm");
        o.alpha_signal_db_per_cm = w.number("alpha_signal_db_per_cm", 0.0);
        o.alpha_idler_db_per_cm = w.number("alpha_idler_db_per_cm", 0.0);
        o.gamma_per_m = w.opt_number("gamma_per_m");
        o.k_qpm_per_m = w.opt_number("k_qpm_per_m");
        o.pump = parse_branch(w.sub("pump", true));
        o.signal = parse_branch(w.sub("signal", true));
        o.idler = parse_branch(w.sub("idler", true));
        w.finish();
        require(o.length_mm > 0.0, "'waveguide.length_mm' must be positive");
        require(o.alpha_signal_db_per_cm >= 0.0 && o.alpha_idler_db_per_cm >= 0.0,
                "waveguide losses must be non-negative");
        require(!o.gamma_per_m || *o.gamma_per_m >= 0.0, "'waveguide.gamma_per_m' must be >= 0");
    }
    {
        Section p = top.sub("pump", true);
        c.pump.wavelength_nm = p.required_number("wavelength_nm");
        c.pump.fwhm_ps = p.required_number("fwhm_ps");
        p.finish();
        require(c.pump.wavelength_nm > 0.0, "'pump.wavelength_nm' must be positive");
        require(c.pump.fwhm_ps > 0.0, "'pump.fwhm_ps' must be positive");
    }
    {
        Section g = top.sub("grid", false);
        c.grid.points = g.integer("points", c.grid.points);
        c.grid.half_span_thz = g.number("half_span_thz", c.grid.half_span_thz);
        g.finish();
        require(c.grid.points >= 2, "'grid.points' must be at least 2");
        require(c.grid.half_span_thz > 0.0, "'grid.half_span_thz' must be positive");
    }
    {
        Section s = top.sub("integrator", false);
        auto& o = c.integrator;
        o.steps = s.integer("steps", o.steps);
        const std::string method = s.string("method", "rk4");
        if (method == "rk4") o.method = IntegratorMethod::rk4;
        else if (method == "rk45") o.method = IntegratorMethod::rk45;
        else fail(ErrorKind::config, "'integrator.method' must be \"rk4\" or \"rk45\"");
        o.tolerance = s.number("tolerance", o.tolerance);
        const std::string layout = s.string("layout", "type2");
        if (layout == "type2") o.layout = StateLayout::type2_blocks;
        else if (layout == "dense") o.layout = StateLayout::dense;
        else fail(ErrorKind::config, "'integrator.layout' must be \"type2\" or \"dense\"");
        o.checkpoint_every = s.integer("checkpoint_every", 0);
        s.finish();
        require(o.checkpoint_every >= 0, "'integrator.checkpoint_every' must be >= 0");
    }
    {
        Section s = top.sub("calibration", false);
        c.calibration.target_total_photons = s.opt_number("target_total_photons");
        s.finish();
        require(!c.calibration.target_total_photons || *c.calibration.target_total_photons >= 0.0,
                "'calibration.target_total_photons' must be >= 0");
    }
    {
        Section s = top.sub("hom", false);
        auto& o = c.hom;
        o.delay_min_ps = s.number("delay_min_ps", o.delay_min_ps);
        o.delay_max_ps = s.number("delay_max_ps", o.delay_max_ps);
        o.points = s.integer("points", o.points);
        if (s.has("delay_offset_ps")) {
            const json& v = s.raw("delay_offset_ps");
            if (v.is_string() && v.get<std::string>() == "walkoff") {
                o.delay_offset_ps.reset();
            } else if (v.is_number() && std::isfinite(v.get<double>())) {
                o.delay_offset_ps = v.get<double>();
            } else {
                fail(ErrorKind::config, "'hom.delay_offset_ps' must be a number or \"walkoff\"");
            }
        }
        s.finish();
        require(o.points >= 2, "'hom.points' must be at least 2");
        require(o.delay_max_ps > o.delay_min_ps, "'hom' delay range must be increasing");
    }
    {
        Section s = top.sub("temporal", false);
        auto& o = c.temporal;
        o.time_min_ps = s.number("time_min_ps", o.time_min_ps);
        o.time_max_ps = s.number("time_max_ps", o.time_max_ps);
        o.points = s.integer("points", o.points);
        s.finish();
        require(o.points >= 2, "'temporal.points' must be at least 2");
        require(o.time_max_ps > o.time_min_ps, "'temporal' time range must be increasing");
    }
    {
        Section s = top.sub("invert", false);
        auto& o = c.invert;
        o.g2_signal = s.opt_number("g2_signal");
        o.g2_idler = s.opt_number("g2_idler");
        o.r_n = s.opt_number("r_n");
        o.residual_tolerance = s.number("residual_tolerance", o.residual_tolerance);
        o.measurement_tolerance = s.number("measurement_tolerance", o.measurement_tolerance);
        o.r_n_tolerance = s.number("r_n_tolerance", o.r_n_tolerance);
        o.max_iterations = s.integer("max_iterations", o.max_iterations);
        o.grid_points = s.integer("grid_points", o.grid_points);
        o.grid_steps = s.integer("grid_steps", o.grid_steps);
        o.alpha_axis = s.numbers("alpha_axis", o.alpha_axis);
        o.r_axis = s.numbers("r_axis", o.r_axis);
        o.isolines = s.boolean("isolines", o.isolines);
        s.finish();
        require(o.residual_tolerance > 0.0 && o.measurement_tolerance > 0.0 && o.r_n_tolerance > 0.0,
                "'invert' tolerances must be positive");
        require(o.max_iterations >= 1 && o.max_iterations <= 30,
                "'invert.max_iterations' must lie in [1, 30]");
        require(o.grid_points >= 2, "'invert.grid_points' must be at least 2");
        require(o.grid_steps >= 16, "'invert.grid_steps' must be at least 16");
        check_axis(o.alpha_axis, "'invert.alpha_axis'");
        check_axis(o.r_axis, "'invert.r_axis'");
        require(o.alpha_axis.front() >= 0.0, "'invert.alpha_axis' must be >= 0");
        require(std::abs(o.r_axis.front()) < 1.0 && std::abs(o.r_axis.back()) < 1.0,
                "'invert.r_axis' must lie inside (-1, 1)");
    }
    {
        Section s = top.sub("sweep", false);
        auto& o = c.sweep;
        o.alpha_db_per_cm = s.numbers("alpha_db_per_cm", {});
        o.alpha_bar = s.numbers("alpha_bar", {});
        o.r = s.numbers("r", {});
        s.finish();
        for (double a : o.alpha_db_per_cm) require(a >= 0.0, "'sweep.alpha_db_per_cm' must be >= 0");
        for (double a : o.alpha_bar) require(a >= 0.0, "'sweep.alpha_bar' must be >= 0");
        for (double r : o.r) require(std::abs(r) < 1.0, "'sweep.r' entries must satisfy |r| < 1");
    }
    {
        Section s = top.sub("output", false);
        c.output.dir = s.string("dir", c.output.dir);
        s.finish();
        require(!c.output.dir.empty(), "'output.dir' must not be empty");
    }
    top.finish();

    // Range checks that live in the numerical layer.
    try {
        build_setup(c).validate();
        build_integrator(c).validate();
    } catch (const Error& e) {
        fail(ErrorKind::config, std::string("invalid configuration: ") + e.what());
    }
    return c;
}

json branch_json(const BranchConfig& b) {
    json j;
    j["n"] = b.n;
    j["group_velocity_over_c"] = b.group_velocity_over_c;
    if (b.reference_wavelength_nm) j["reference_wavelength_nm"] = *b.reference_wavelength_nm;
    return j;
}

json config_tree(const RunConfig& c) {
    json j;
    {
        json w;
        w["length_mm"] = c.waveguide.length_mm;
        w["alpha_signal_db_per_cm"] = c.waveguide.alpha_signal_db_per_cm;
        w["alpha_idler_db_per_cm"] = c.waveguide.alpha_idler_db_per_cm;
        if (c.waveguide.gamma_per_m) w["gamma_per_m"] = *c.waveguide.gamma_per_m;
        if (c.waveguide.k_qpm_per_m) w["k_qpm_per_m"] = *c.waveguide.k_qpm_per_m;
        w["pump"] = branch_json(c.waveguide.pump);
        w["signal"] = branch_json(c.waveguide.signal);
        w["idler"] = branch_json(c.waveguide.idler);
        j["waveguide"] = std::move(w);
    }
    j["pump"] = {{"wavelength_nm", c.pump.wavelength_nm}, {"fwhm_ps", c.pump.fwhm_ps}};
    j["grid"] = {{"points", c.grid.points}, {"half_span_thz", c.grid.half_span_thz}};
    j["integrator"] = {
        {"steps", c.integrator.steps},
        {"method", c.integrator.method == IntegratorMethod::rk4 ? "rk4" : "rk45"},
        {"tolerance", c.integrator.tolerance},
        {"layout", c.integrator.layout == StateLayout::type2_blocks ? "type2" : "dense"},
        {"checkpoint_every", c.integrator.checkpoint_every}};
    j["calibration"] = json::object();
    if (c.calibration.target_total_photons) {
        j["calibration"]["target_total_photons"] = *c.calibration.target_total_photons;
    }
    {
        json h;
        h["delay_min_ps"] = c.hom.delay_min_ps;
        h["delay_max_ps"] = c.hom.delay_max_ps;
        h["points"] = c.hom.points;
        if (c.hom.delay_offset_ps) h["delay_offset_ps"] = *c.hom.delay_offset_ps;
        else h["delay_offset_ps"] = "walkoff";
        j["hom"] = std::move(h);
    }
    j["temporal"] = {{"time_min_ps", c.temporal.time_min_ps},
                     {"time_max_ps", c.temporal.time_max_ps},
                     {"points", c.temporal.points}};
    {
        const auto& o = c.invert;
        json v;
        if (o.g2_signal) v["g2_signal"] = *o.g2_signal;
        if (o.g2_idler) v["g2_idler"] = *o.g2_idler;
        if (o.r_n) v["r_n"] = *o.r_n;
        v["residual_tolerance"] = o.residual_tolerance;
        v["measurement_tolerance"] = o.measurement_tolerance;
        v["r_n_tolerance"] = o.r_n_tolerance;
        v["max_iterations"] = o.max_iterations;
        v["grid_points"] = o.grid_points;
        v["grid_steps"] = o.grid_steps;
        v["alpha_axis"] = o.alpha_axis;
        v["r_axis"] = o.r_axis;
        v["isolines"] = o.isolines;
        j["invert"] = std::move(v);
    }
    j["sweep"] = {{"alpha_db_per_cm", c.sweep.alpha_db_per_cm},
                  {"alpha_bar", c.sweep.alpha_bar},
                  {"r", c.sweep.r}};
    j["output"] = {{"dir", c.output.dir}};
    return j;
}

json parse_text(std::string_view text, std::string_view format) {
    if (format == "json") {
        try {
            return json::parse(text);
        } catch (const json::parse_error& e) {
            fail(ErrorKind::config, std::string("JSON syntax error: ") + e.what());
        }
    }
    if (format == "toml") {
        try {
            const toml::table t = toml::parse(text);
            return toml_to_json(t, "");
        } catch (const toml::parse_error& e) {
            std::ostringstream ss;
            ss << "TOML syntax error: " << e.description() << " (line " << e.source().begin.line
               << ")";
            fail(ErrorKind::config, ss.str());
        }
    }
    fail(ErrorKind::config, "unknown config format '" + std::string(format) + "'");
}

}  // namespace

RunConfig parse_config(std::string_view text, std::string_view format) {
    return parse_json_tree(parse_text(text, format));
}

RunConfig load_config(const std::string& path) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const Error& e) {
        fail(ErrorKind::config, e.what());
    }
    const bool is_toml = path.size() >= 5 && path.compare(path.size() - 5, 5, ".toml") == 0;
    return parse_config(text, is_toml ? "toml" : "json");
}

std::string config_to_json(const RunConfig& config) { return config_tree(config).dump(2); }

RunConfig apply_override(const RunConfig& config, std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos || eq == 0) {
        fail(ErrorKind::config, "override must look like section.key=value: " + std::string(assignment));
    }
    const std::string key(assignment.substr(0, eq));
    const std::string value(assignment.substr(eq + 1));
    json parsed;
    try {
        parsed = json::parse(value);
    } catch (const json::parse_error&) {
        parsed = value;
    }

    json tree = config_tree(config);
    json* node = &tree;
    std::string_view rest = key;
    for (;;) {
        const auto dot = rest.find('.');
        const std::string part(rest.substr(0, dot));
        if (part.empty()) fail(ErrorKind::config, "malformed override key '" + key + "'");
        if (dot == std::string_view::npos) {
            if (!node->is_object()) fail(ErrorKind::config, "override key '" + key + "' is not a table entry");
            (*node)[part] = parsed;
            break;
        }
        if (!node->contains(part)) (*node)[part] = json::object();
        node = &(*node)[part];
        if (!node->is_object()) fail(ErrorKind::config, "override key '" + key + "' descends into a value");
        rest = rest.substr(dot + 1);
    }
    // A group index given on the command line replaces the canonical velocity.
    if (key.size() > 12 && key.compare(key.size() - 12, 12, ".group_index") == 0) {
        json* branch = &tree;
        std::string_view path(key.data(), key.size() - 12);
        for (size_t pos = 0; pos <= path.size();) {
            const auto dot = path.find('.', pos);
            branch = &(*branch)[std::string(path.substr(pos, dot - pos))];
            if (dot == std::string_view::npos) break;
            pos = dot + 1;
        }
        branch->erase("group_velocity_over_c");
    }
    return parse_json_tree(tree);
}

std::uint64_t config_hash(const RunConfig& config) {
    json tree = config_tree(config);
    tree.erase("output");
    return fnv1a(tree.dump());
}

PdcSetup build_setup(const RunConfig& c) {
    PdcSetup s;
    s.pump.center_wavelength = c.pump.wavelength_nm * 1e-9;
    s.pump.fwhm_duration = c.pump.fwhm_ps * 1e-12;
    const double wp = s.pump.center_omega();
    auto branch = [](const BranchConfig& b, double default_omega) {
        DispersionBranch d;
        d.n_ref = b.n;
        d.group_velocity = b.group_velocity_over_c * kSpeedOfLight;
        d.omega_ref = b.reference_wavelength_nm
                          ? 2.0 * kPi * kSpeedOfLight / (*b.reference_wavelength_nm * 1e-9)
                          : default_omega;
        return d;
    };
    auto& w = s.waveguide;
    w.length = c.waveguide.length_mm * 1e-3;
    w.pump = branch(c.waveguide.pump, wp);
    w.signal = branch(c.waveguide.signal, 0.5 * wp);
    w.idler = branch(c.waveguide.idler, 0.5 * wp);
    w.alpha_signal = loss_db_per_cm_to_si(c.waveguide.alpha_signal_db_per_cm);
    w.alpha_idler = loss_db_per_cm_to_si(c.waveguide.alpha_idler_db_per_cm);
    w.k_qpm = c.waveguide.k_qpm_per_m ? *c.waveguide.k_qpm_per_m
                                      : qpm_wavevector(w.pump, w.signal, w.idler, wp);
    w.gamma = c.waveguide.gamma_per_m.value_or(0.0);
    s.grid = FrequencyGrid::centered(0.5 * wp, 2.0 * kPi * c.grid.half_span_thz * 1e12, c.grid.points);
    return s;
}

IntegratorConfig build_integrator(const RunConfig& c) {
    IntegratorConfig i;
    i.step_count = c.integrator.steps;
    i.method = c.integrator.method;
    i.tolerance = c.integrator.tolerance;
    i.layout = c.integrator.layout;
    return i;
}

}  // namespace pdcsim
