// SPDX-License-Identifier: Apache-2.0
//
// phaseless: active array imaging from intensity-only measurements
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#include "phaseless/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <initializer_list>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include <json.hpp>

#include "phaseless/error.hpp"
#include "phaseless/io.hpp"
#include "phaseless/random.hpp"

namespace phaseless {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
    throw ConfigError(where + ": " + what);
}

void check_keys(const json& obj, const std::string& where,
                std::initializer_list<std::string_view> allowed) {
    if (!obj.is_object())
        fail(where, "expected an object");
    for (const auto& [key, value] : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            fail(where, "unknown key '" + key + "'");
    }
}

double as_number(const json& v, const std::string& where) {
    if (!v.is_number())
        fail(where, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x))
        fail(where, "expected a finite number");
    return x;
}

std::uint64_t as_unsigned(const json& v, const std::string& where) {
    if (v.is_number_unsigned())
        return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0)
        return static_cast<std::uint64_t>(v.get<std::int64_t>());
    fail(where, "expected a nonnegative integer");
}

long as_integer(const json& v, const std::string& where) {
    if (!v.is_number_integer())
        fail(where, "expected an integer");
    return v.get<long>();
}

bool as_bool(const json& v, const std::string& where) {
    if (!v.is_boolean())
        fail(where, "expected true or false");
    return v.get<bool>();
}

std::string as_string(const json& v, const std::string& where) {
    if (!v.is_string())
        fail(where, "expected a string");
    return v.get<std::string>();
}

std::vector<double> as_number_list(const json& v, const std::string& where) {
    if (v.is_number())
        return {as_number(v, where)};
    if (!v.is_array() || v.empty())
        fail(where, "expected a number or a nonempty list of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i)
        out.push_back(as_number(v[i], where + "[" + std::to_string(i) + "]"));
    return out;
}

Complex as_complex(const json& v, const std::string& where) {
    if (v.is_number())
        return {as_number(v, where), 0.0};
    if (!v.is_array() || v.size() != 2)
        fail(where, "expected a number or [re, im]");
    return {as_number(v[0], where + "[0]"), as_number(v[1], where + "[1]")};
}

ResponseModel parse_model(std::string_view name, const std::string& where) {
    if (name == "born")
        return ResponseModel::Born;
    if (name == "paraxial")
        return ResponseModel::Paraxial;
    fail(where, "expected born or paraxial");
}

std::string_view model_name(ResponseModel m) {
    return m == ResponseModel::Born ? "born" : "paraxial";
}

NoiseMode parse_noise_mode(std::string_view name, const std::string& where) {
    if (name == "replace")
        return NoiseMode::Replace;
    if (name == "additive")
        return NoiseMode::Additive;
    fail(where, "expected replace or additive");
}

std::string_view noise_mode_name(NoiseMode m) {
    return m == NoiseMode::Replace ? "replace" : "additive";
}

ConditioningPolicy parse_policy(std::string_view name, const std::string& where) {
    if (name == "report")
        return ConditioningPolicy::Report;
    if (name == "fallback")
        return ConditioningPolicy::Fallback;
    if (name == "abort")
        return ConditioningPolicy::Abort;
    fail(where, "expected report, fallback or abort");
}

std::string_view policy_name(ConditioningPolicy p) {
    switch (p) {
    case ConditioningPolicy::Report: return "report";
    case ConditioningPolicy::Fallback: return "fallback";
    case ConditioningPolicy::Abort: return "abort";
    }
    return "report";
}

std::size_t planar_side(std::size_t n) {
    auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n))));
    return side * side == n ? side : 0;
}

ArrayGeometry make_geometry(const ExperimentConfig& c) {
    const double kappa = wavenumber_for(c.geometry.wavelength);
    if (c.geometry.layout == Layout::Planar)
        return ArrayGeometry::planar(planar_side(c.geometry.transducers), c.geometry.pitch, kappa);
    return ArrayGeometry::linear(c.geometry.transducers, c.geometry.pitch, kappa);
}

ImagingGrid make_grid(const ExperimentConfig& c, const ArrayGeometry& geom, double range) {
    const std::size_t nx = c.grid.extent ? optimal_grid_count(geom, range, *c.grid.extent)
                                         : c.grid.cross_range_points;
    if (c.geometry.layout == Layout::Planar)
        return ImagingGrid::plane(geom, range, nx, nx);
    return ImagingGrid::window(geom, range, nx, c.grid.range_points);
}

std::string cell_name(std::size_t index, std::size_t count) {
    const int width = std::max<int>(3, static_cast<int>(std::to_string(count - 1).size()));
    char buf[32];
    std::snprintf(buf, sizeof(buf), "cell_%0*zu", width, index);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot open " + path.string() + " for writing");
    out << text;
    out.flush();
    if (!out)
        throw IoError("write failed for " + path.string());
}

json coords_json(const ImagingGrid& grid, std::size_t k) {
    const auto [ix, iy, iz] = grid.coords(k);
    return json{{"index", k}, {"ix", ix}, {"iy", iy}, {"iz", iz}};
}

json cell_report(const CellRecord& cell, const Setup& setup, const ProtocolResult* result,
                 const ImageResult* image, const std::string& error) {
    const FresnelDiagnostics fd = fresnel_diagnostics(setup.geometry, setup.grid);
    json r;
    r["cell"] = cell.index;
    r["range"] = cell.range;
    r["epsilon"] = cell.epsilon;
    r["trial"] = cell.trial;
    r["seed"] = cell.seed;
    r["status"] = cell.status;
    r["fresnel"] = {{"number", fd.fresnel_number},
                    {"paraxial_error_bound", fd.paraxial_error_bound},
                    {"regime", std::string(to_string(fd.regime))}};
    r["warnings"] = setup.response.warnings;
    json truth = json::array();
    for (std::size_t k : setup.scene.support()) {
        json t = coords_json(setup.grid, k);
        const Complex a = setup.scene.reflectivity()[static_cast<Eigen::Index>(k)];
        t["reflectivity"] = {a.real(), a.imag()};
        truth.push_back(t);
    }
    r["truth"] = truth;
    if (!error.empty())
        r["error"] = error;
    if (result) {
        r["illuminations"] = result->illuminations;
        r["operator"] = result->operator_kind;
        r["condition"] = {{"smallest_reference_ratio", result->condition.smallest_reference_ratio},
                          {"flagged", result->condition.flagged}};
    }
    if (image) {
        const auto& sv = image->split.singular_values;
        std::vector<double> leading(sv.data(),
                                    sv.data() + std::min<Eigen::Index>(sv.size(), 16));
        r["rank"] = image->split.rank;
        r["no_signal"] = image->split.no_signal;
        r["singular_values"] = leading;
        json peaks = json::array();
        for (std::size_t k : image->peaks.indices) {
            json p = coords_json(setup.grid, k);
            p["value"] = image->spectrum.values[static_cast<Eigen::Index>(k)];
            peaks.push_back(p);
        }
        r["peaks"] = peaks;
        r["peak_shortfall"] = image->peaks.shortfall;
        r["peak_degenerate"] = image->peaks.degenerate;
        json matched = json::array();
        for (const PeakMatch& m : image->report.matched)
            matched.push_back({{"detected", m.detected},
                               {"truth", m.truth},
                               {"cross_range_error", m.cross_range_error},
                               {"range_error", m.range_error}});
        r["matched"] = matched;
        r["misses"] = image->report.misses;
        r["ghosts"] = image->report.ghosts;
        r["mean_nearest_error"] = image->report.mean_nearest_error;
        r["exact"] = image->report.exact();
    }
    return r;
}

}  // namespace

std::string_view to_string(Protocol protocol) {
    switch (protocol) {
    case Protocol::General: return "general";
    case Protocol::Symmetric: return "symmetric";
    case Protocol::ParaxialSix: return "paraxial-six";
    case Protocol::FullPhaseBaseline: return "full-phase-baseline";
    }
    return "general";
}

Protocol parse_protocol(std::string_view name) {
    for (Protocol p : {Protocol::General, Protocol::Symmetric, Protocol::ParaxialSix,
                       Protocol::FullPhaseBaseline})
        if (to_string(p) == name)
            return p;
    throw ConfigError("protocol: expected general, symmetric, paraxial-six or full-phase-baseline, got '" +
                      std::string(name) + "'");
}

std::size_t illumination_budget(Protocol protocol, std::size_t n) {
    switch (protocol) {
    case Protocol::General:
    case Protocol::Symmetric: return 3 * n - 2;
    case Protocol::ParaxialSix: return 6;
    case Protocol::FullPhaseBaseline: return n;
    }
    return 0;
}

ExperimentConfig parse_config(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    check_keys(doc, "config", {"geometry", "grid", "scene", "protocol", "forward_model", "noise",
                               "recovery", "imaging", "output"});
    ExperimentConfig c;

    if (doc.contains("geometry")) {
        const json& g = doc["geometry"];
        check_keys(g, "geometry", {"transducers", "pitch", "aperture", "wavelength", "layout"});
        if (g.contains("transducers"))
            c.geometry.transducers = as_unsigned(g["transducers"], "geometry.transducers");
        if (g.contains("wavelength"))
            c.geometry.wavelength = as_number(g["wavelength"], "geometry.wavelength");
        if (g.contains("layout")) {
            const std::string layout = as_string(g["layout"], "geometry.layout");
            if (layout == "linear")
                c.geometry.layout = Layout::Linear;
            else if (layout == "planar")
                c.geometry.layout = Layout::Planar;
            else
                fail("geometry.layout", "expected linear or planar");
        }
        const bool has_pitch = g.contains("pitch");
        if (has_pitch)
            c.geometry.pitch = as_number(g["pitch"], "geometry.pitch");
        if (g.contains("aperture")) {
            const double a = as_number(g["aperture"], "geometry.aperture");
            const std::size_t n = c.geometry.transducers;
            const std::size_t span = c.geometry.layout == Layout::Planar ? planar_side(n) : n;
            if (span < 2)
                fail("geometry.aperture", "needs at least two transducers along a side");
            const double per_pitch = (c.geometry.layout == Layout::Planar ? std::sqrt(2.0) : 1.0) *
                                     static_cast<double>(span - 1);
            if (!has_pitch)
                c.geometry.pitch = a / per_pitch;
            else if (std::abs(c.geometry.pitch * per_pitch - a) > 1e-9 * std::abs(a))
                fail("geometry.aperture", "does not match pitch and transducer count");
        }
    }

    if (doc.contains("grid")) {
        const json& g = doc["grid"];
        check_keys(g, "grid", {"ranges", "cross_range_points", "range_points", "extent"});
        if (g.contains("ranges"))
            c.grid.ranges = as_number_list(g["ranges"], "grid.ranges");
        if (g.contains("cross_range_points"))
            c.grid.cross_range_points = as_unsigned(g["cross_range_points"], "grid.cross_range_points");
        if (g.contains("range_points"))
            c.grid.range_points = as_unsigned(g["range_points"], "grid.range_points");
        if (g.contains("extent") && !g["extent"].is_null())
            c.grid.extent = as_number(g["extent"], "grid.extent");
    }

    if (doc.contains("scene")) {
        const json& s = doc["scene"];
        check_keys(s, "scene", {"scatterers", "magnitude", "seed"});
        if (s.contains("magnitude"))
            c.scene.magnitude = as_number(s["magnitude"], "scene.magnitude");
        if (s.contains("seed"))
            c.scene.seed = as_unsigned(s["seed"], "scene.seed");
        if (s.contains("scatterers")) {
            const json& list = s["scatterers"];
            if (!list.is_array())
                fail("scene.scatterers", "expected a list");
            for (std::size_t i = 0; i < list.size(); ++i) {
                const std::string where = "scene.scatterers[" + std::to_string(i) + "]";
                const json& e = list[i];
                check_keys(e, where, {"x", "y", "z", "reflectivity"});
                ScattererSpec sp;
                if (e.contains("x"))
                    sp.dx = as_integer(e["x"], where + ".x");
                if (e.contains("y"))
                    sp.dy = as_integer(e["y"], where + ".y");
                if (e.contains("z"))
                    sp.dz = as_integer(e["z"], where + ".z");
                if (e.contains("reflectivity"))
                    sp.reflectivity = as_complex(e["reflectivity"], where + ".reflectivity");
                c.scene.scatterers.push_back(sp);
            }
        }
    }

    if (doc.contains("protocol"))
        c.protocol = parse_protocol(as_string(doc["protocol"], "protocol"));
    if (doc.contains("forward_model"))
        c.forward_model = parse_model(as_string(doc["forward_model"], "forward_model"), "forward_model");

    if (doc.contains("noise")) {
        const json& n = doc["noise"];
        check_keys(n, "noise", {"epsilon", "seed", "trials", "mode"});
        if (n.contains("epsilon"))
            c.noise.epsilons = as_number_list(n["epsilon"], "noise.epsilon");
        if (n.contains("seed"))
            c.noise.seed = as_unsigned(n["seed"], "noise.seed");
        if (n.contains("trials"))
            c.noise.trials = as_unsigned(n["trials"], "noise.trials");
        if (n.contains("mode"))
            c.noise.mode = parse_noise_mode(as_string(n["mode"], "noise.mode"), "noise.mode");
    }

    if (doc.contains("recovery")) {
        const json& r = doc["recovery"];
        check_keys(r, "recovery", {"reference_floor", "policy"});
        if (r.contains("reference_floor"))
            c.recovery.reference_floor = as_number(r["reference_floor"], "recovery.reference_floor");
        if (r.contains("policy"))
            c.recovery.policy = parse_policy(as_string(r["policy"], "recovery.policy"), "recovery.policy");
    }

    if (doc.contains("imaging")) {
        const json& im = doc["imaging"];
        check_keys(im, "imaging", {"rank", "rank_value", "threshold", "peaks", "peak_count",
                                   "floor_factor", "normalize_steering", "residual_floor"});
        if (im.contains("rank")) {
            const std::string rule = as_string(im["rank"], "imaging.rank");
            if (rule == "known")
                c.imaging.rank = RankRule::known(0);
            else if (rule == "threshold")
                c.imaging.rank = RankRule::relative_threshold();
            else
                fail("imaging.rank", "expected known or threshold");
        }
        if (im.contains("rank_value")) {
            if (c.imaging.rank.kind != RankRule::Kind::Known)
                fail("imaging.rank_value", "only applies to the known rank rule");
            c.imaging.rank.rank = as_unsigned(im["rank_value"], "imaging.rank_value");
        }
        if (im.contains("threshold")) {
            if (c.imaging.rank.kind != RankRule::Kind::Threshold)
                fail("imaging.threshold", "only applies to the threshold rank rule");
            c.imaging.rank.threshold = as_number(im["threshold"], "imaging.threshold");
        }
        if (im.contains("peaks")) {
            const std::string rule = as_string(im["peaks"], "imaging.peaks");
            if (rule == "top-m")
                c.imaging.peaks = PeakRule::top(0);
            else if (rule == "above-floor")
                c.imaging.peaks = PeakRule::above_floor();
            else
                fail("imaging.peaks", "expected top-m or above-floor");
        }
        if (im.contains("peak_count")) {
            if (c.imaging.peaks.kind != PeakRule::Kind::TopM)
                fail("imaging.peak_count", "only applies to the top-m peak rule");
            c.imaging.peaks.count = as_unsigned(im["peak_count"], "imaging.peak_count");
        }
        if (im.contains("floor_factor")) {
            if (c.imaging.peaks.kind != PeakRule::Kind::AboveFloor)
                fail("imaging.floor_factor", "only applies to the above-floor peak rule");
            c.imaging.peaks.floor_factor = as_number(im["floor_factor"], "imaging.floor_factor");
        }
        if (im.contains("normalize_steering"))
            c.imaging.music.normalize_steering =
                as_bool(im["normalize_steering"], "imaging.normalize_steering");
        if (im.contains("residual_floor"))
            c.imaging.music.residual_floor = as_number(im["residual_floor"], "imaging.residual_floor");
    }

    if (doc.contains("output")) {
        const json& o = doc["output"];
        check_keys(o, "output", {"directory", "formats", "matrices"});
        if (o.contains("directory"))
            c.output.directory = as_string(o["directory"], "output.directory");
        if (o.contains("formats")) {
            const json& f = o["formats"];
            if (!f.is_array())
                fail("output.formats", "expected a list");
            c.output.csv = c.output.pgm = false;
            for (std::size_t i = 0; i < f.size(); ++i) {
                const std::string name = as_string(f[i], "output.formats");
                if (name == "csv")
                    c.output.csv = true;
                else if (name == "pgm")
                    c.output.pgm = true;
                else
                    fail("output.formats", "expected csv or pgm, got '" + name + "'");
            }
        }
        if (o.contains("matrices"))
            c.output.matrices = as_bool(o["matrices"], "output.matrices");
    }

    validate(c);
    return c;
}

ExperimentConfig load_config(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open config " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

void validate(const ExperimentConfig& c) {
    const std::size_t n = c.geometry.transducers;
    if (n < 1)
        fail("geometry.transducers", "must be at least 1");
    if (c.geometry.layout == Layout::Planar && planar_side(n) == 0)
        fail("geometry.transducers", "a planar array needs a square number of transducers");
    if (!(c.geometry.pitch > 0.0))
        fail("geometry.pitch", "must be positive");
    if (!(c.geometry.wavelength > 0.0))
        fail("geometry.wavelength", "must be positive");
    if (c.grid.ranges.empty())
        fail("grid.ranges", "needs at least one range");
    for (double r : c.grid.ranges)
        if (!(r > 0.0) || !std::isfinite(r))
            fail("grid.ranges", "ranges must be positive");
    if (c.grid.extent && !(*c.grid.extent > 0.0))
        fail("grid.extent", "must be positive");
    if (!c.grid.extent && c.grid.cross_range_points < 1)
        fail("grid.cross_range_points", "must be at least 1");
    if (c.grid.range_points < 1)
        fail("grid.range_points", "must be at least 1");
    if (c.geometry.layout == Layout::Planar && c.grid.range_points != 1)
        fail("grid.range_points", "planar arrays image a flat patch; use 1");
    if (!(c.scene.magnitude > 0.0))
        fail("scene.magnitude", "must be positive");
    if (c.noise.epsilons.empty())
        fail("noise.epsilon", "needs at least one value");
    for (double e : c.noise.epsilons)
        if (!(e >= 0.0 && e < 1.0))
            fail("noise.epsilon", "values must lie in [0, 1)");
    if (c.noise.trials < 1)
        fail("noise.trials", "must be at least 1");
    if (!(c.recovery.reference_floor >= 0.0))
        fail("recovery.reference_floor", "must be nonnegative");
    if (c.imaging.rank.kind == RankRule::Kind::Threshold &&
        !(c.imaging.rank.threshold > 0.0 && c.imaging.rank.threshold < 1.0))
        fail("imaging.threshold", "must lie in (0, 1)");
    if (c.imaging.rank.kind == RankRule::Kind::Known && c.imaging.rank.rank >= n)
        fail("imaging.rank_value", "must be below the transducer count");
    if (c.imaging.peaks.kind == PeakRule::Kind::AboveFloor && !(c.imaging.peaks.floor_factor > 0.0))
        fail("imaging.floor_factor", "must be positive");
    if (!(c.imaging.music.residual_floor > 0.0))
        fail("imaging.residual_floor", "must be positive");
    if (!c.output.csv && !c.output.pgm)
        fail("output.formats", "needs csv or pgm");

    const std::size_t m = c.scene.scatterers.size();
    if (m == 0)
        fail("scene.scatterers", "needs at least one scatterer");
    if (m >= n)
        fail("scene.scatterers", "needs fewer scatterers than transducers");
    std::set<std::tuple<long, long, long>> seen;
    for (std::size_t i = 0; i < m; ++i) {
        const ScattererSpec& s = c.scene.scatterers[i];
        const std::string where = "scene.scatterers[" + std::to_string(i) + "]";
        if (!seen.insert({s.dx, s.dy, s.dz}).second)
            fail(where, "duplicates another scatterer");
        if (c.geometry.layout == Layout::Linear && s.dy != 0)
            fail(where, "a linear array images the (x, z) plane; y must be 0");
        if (c.geometry.layout == Layout::Planar && s.dz != 0)
            fail(where, "a planar array images a flat patch; z must be 0");
        if (s.reflectivity && *s.reflectivity == Complex(0.0, 0.0))
            fail(where, "reflectivity must be nonzero");
    }

    if (c.protocol == Protocol::ParaxialSix) {
        if (c.geometry.layout != Layout::Linear)
            fail("protocol", "paraxial-six needs a linear array");
        if (n < 2)
            fail("protocol", "paraxial-six needs at least two transducers");
        if (c.grid.range_points != 1)
            fail("protocol", "paraxial-six needs a flat scene (grid.range_points = 1)");
    }
    if (c.forward_model == ResponseModel::Paraxial && c.grid.range_points != 1)
        fail("forward_model", "the paraxial model needs a flat scene (grid.range_points = 1)");

    try {
        const ArrayGeometry geom = make_geometry(c);
        for (double range : c.grid.ranges) {
            const ImagingGrid grid = make_grid(c, geom, range);
            for (std::size_t i = 0; i < m; ++i) {
                const ScattererSpec& s = c.scene.scatterers[i];
                try {
                    (void)grid.index_from_center(s.dx, s.dy, s.dz);
                } catch (const PreconditionError&) {
                    std::ostringstream os;
                    os << "lies outside the " << grid.shape().nx << " x " << grid.shape().ny
                       << " x " << grid.shape().nz << " window at range " << range;
                    fail("scene.scatterers[" + std::to_string(i) + "]", os.str());
                }
            }
        }
    } catch (const PreconditionError& e) {
        throw ConfigError(std::string("grid: ") + e.what());
    } catch (const DomainError& e) {
        throw ConfigError(std::string("geometry: ") + e.what());
    }
}

std::string canonical_json(const ExperimentConfig& c) {
    json doc;
    doc["geometry"] = {{"transducers", c.geometry.transducers},
                       {"pitch", c.geometry.pitch},
                       {"wavelength", c.geometry.wavelength},
                       {"layout", c.geometry.layout == Layout::Linear ? "linear" : "planar"}};
    doc["grid"] = {{"ranges", c.grid.ranges},
                   {"cross_range_points", c.grid.cross_range_points},
                   {"range_points", c.grid.range_points},
                   {"extent", c.grid.extent ? json(*c.grid.extent) : json(nullptr)}};
    json scatterers = json::array();
    for (const ScattererSpec& s : c.scene.scatterers) {
        json e = {{"x", s.dx}, {"y", s.dy}, {"z", s.dz}};
        if (s.reflectivity)
            e["reflectivity"] = {s.reflectivity->real(), s.reflectivity->imag()};
        scatterers.push_back(e);
    }
    doc["scene"] = {{"scatterers", scatterers},
                    {"magnitude", c.scene.magnitude},
                    {"seed", c.scene.seed}};
    doc["protocol"] = std::string(to_string(c.protocol));
    doc["forward_model"] = std::string(model_name(c.forward_model));
    doc["noise"] = {{"epsilon", c.noise.epsilons},
                    {"seed", c.noise.seed},
                    {"trials", c.noise.trials},
                    {"mode", std::string(noise_mode_name(c.noise.mode))}};
    doc["recovery"] = {{"reference_floor", c.recovery.reference_floor},
                       {"policy", std::string(policy_name(c.recovery.policy))}};
    json imaging;
    if (c.imaging.rank.kind == RankRule::Kind::Known) {
        imaging["rank"] = "known";
        imaging["rank_value"] = c.imaging.rank.rank;
    } else {
        imaging["rank"] = "threshold";
        imaging["threshold"] = c.imaging.rank.threshold;
    }
    if (c.imaging.peaks.kind == PeakRule::Kind::TopM) {
        imaging["peaks"] = "top-m";
        imaging["peak_count"] = c.imaging.peaks.count;
    } else {
        imaging["peaks"] = "above-floor";
        imaging["floor_factor"] = c.imaging.peaks.floor_factor;
    }
    imaging["normalize_steering"] = c.imaging.music.normalize_steering;
    imaging["residual_floor"] = c.imaging.music.residual_floor;
    doc["imaging"] = imaging;
    json formats = json::array();
    if (c.output.csv)
        formats.push_back("csv");
    if (c.output.pgm)
        formats.push_back("pgm");
    doc["output"] = {{"formats", formats},
                     {"matrices", c.output.matrices}};
    return doc.dump(2) + "\n";
}

std::string config_hash(const ExperimentConfig& config) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : canonical_json(config)) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

Setup build_setup(const ExperimentConfig& config, double range) {
    ArrayGeometry geom = make_geometry(config);
    ImagingGrid grid = make_grid(config, geom, range);
    std::vector<std::size_t> indices;
    std::vector<Complex> alphas;
    for (std::size_t j = 0; j < config.scene.scatterers.size(); ++j) {
        const ScattererSpec& s = config.scene.scatterers[j];
        indices.push_back(grid.index_from_center(s.dx, s.dy, s.dz));
        if (s.reflectivity) {
            alphas.push_back(*s.reflectivity);
        } else {
            std::mt19937_64 rng(mix_seed(config.scene.seed, j));
            alphas.push_back(std::polar(config.scene.magnitude, kTwoPi * uniform01(rng)));
        }
    }
    Scene scene = Scene::from_support(grid.size(), indices, alphas);
    ResponseMatrix response = config.forward_model == ResponseModel::Born
                                  ? assemble_response_born(geom, grid, scene)
                                  : assemble_response_paraxial(geom, grid, scene);
    return Setup{std::move(geom), std::move(grid), std::move(scene), std::move(response)};
}

IlluminationPlan plan_for(Protocol protocol, const Setup& setup) {
    const std::size_t n = setup.geometry.size();
    switch (protocol) {
    case Protocol::General: return general_plan(n);
    case Protocol::Symmetric: return symmetric_plan(n);
    case Protocol::ParaxialSix:
        return paraxial_six_plan(geometric_factors(setup.geometry, setup.grid.range()));
    case Protocol::FullPhaseBaseline: {
        IlluminationPlan plan = general_plan(n);
        plan.vectors.resize(n);
        return plan;
    }
    }
    return general_plan(n);
}

ProtocolResult run_protocol(Protocol protocol, IntensityOracle& oracle, const Setup& setup,
                            const RecoveryOptions& options) {
    const std::size_t n = setup.geometry.size();
    const std::size_t before = oracle.queries();
    ProtocolResult out;
    switch (protocol) {
    case Protocol::General: {
        RecoveredOperator op = recover_time_reversal(oracle, n, options);
        out.matrix = std::move(op.matrix);
        out.condition = std::move(op.condition);
        out.operator_kind = std::string(to_string(op.kind));
        break;
    }
    case Protocol::Symmetric: {
        RecoveredOperator op = recover_response_symmetric(oracle, n, options);
        out.matrix = std::move(op.matrix);
        out.condition = std::move(op.condition);
        out.operator_kind = std::string(to_string(op.kind));
        break;
    }
    case Protocol::ParaxialSix: {
        ParaxialRecovery rec = recover_paraxial_six(oracle, setup.geometry, setup.grid.range(), options);
        out.matrix = std::move(rec.response.entries);
        out.condition = std::move(rec.hankel.condition);
        out.operator_kind = std::string(to_string(rec.hankel.kind));
        break;
    }
    case Protocol::FullPhaseBaseline:
        out.matrix = setup.response.entries;
        out.operator_kind = "response";
        out.illuminations = n;
        return out;
    }
    out.illuminations = oracle.queries() - before;
    return out;
}

ImageResult image_operator(const CMatrix& op, const ArrayGeometry& geom, const ImagingGrid& grid,
                           const Scene& truth, const ExperimentConfig::Imaging& options) {
    const std::size_t m = truth.scatterer_count();
    RankRule rank = options.rank;
    if (rank.kind == RankRule::Kind::Known && rank.rank == 0)
        rank.rank = m;
    PeakRule peaks = options.peaks;
    if (peaks.kind == PeakRule::Kind::TopM && peaks.count == 0)
        peaks.count = m;
    ImageResult out;
    out.split = subspace_split(op, rank);
    out.spectrum = music_pseudospectrum(out.split, geom, grid, options.music);
    out.peaks = detect_peaks(out.spectrum, peaks);
    out.report = localization_report(out.peaks.indices, truth, grid);
    return out;
}

std::size_t RunManifest::failed_cells() const {
    return static_cast<std::size_t>(std::count_if(
        cells.begin(), cells.end(), [](const CellRecord& c) { return c.status != "ok"; }));
}

std::size_t worker_count(std::size_t jobs) {
    std::size_t cap = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("IMAGER_THREADS"); env && *env) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (*end != '\0' || v < 1)
            throw ConfigError("IMAGER_THREADS must be a positive integer");
        cap = static_cast<std::size_t>(v);
    }
    return std::max<std::size_t>(1, std::min(cap, jobs));
}

RunManifest run_experiment(const ExperimentConfig& config) {
    const auto start = std::chrono::steady_clock::now();
    validate(config);

    std::vector<Setup> setups;
    setups.reserve(config.grid.ranges.size());
    for (double range : config.grid.ranges)
        setups.push_back(build_setup(config, range));

    RunManifest manifest;
    manifest.config_hash = config_hash(config);
    manifest.master_seed = config.noise.seed;
    manifest.scene_seed = config.scene.seed;
    manifest.illumination_budget = illumination_budget(config.protocol, config.geometry.transducers);

    struct Job {
        std::size_t setup;
        CellRecord record;
    };
    std::vector<Job> jobs;
    for (std::size_t r = 0; r < setups.size(); ++r)
        for (double eps : config.noise.epsilons)
            for (std::size_t t = 0; t < config.noise.trials; ++t) {
                CellRecord rec;
                rec.index = jobs.size();
                rec.range = config.grid.ranges[r];
                rec.epsilon = eps;
                rec.trial = t;
                rec.seed = mix_seed(config.noise.seed, rec.index);
                jobs.push_back({r, rec});
            }

    const fs::path root = config.output.directory;
    fs::create_directories(root);
    std::vector<std::vector<std::string>> cell_outputs(jobs.size());
    std::vector<std::exception_ptr> errors(jobs.size());

    auto run_cell = [&](std::size_t i) {
        Job& job = jobs[i];
        const Setup& setup = setups[job.setup];
        CellRecord& rec = job.record;
        const std::string dir = cell_name(rec.index, jobs.size());
        auto& outputs = cell_outputs[i];
        auto emit = [&](const std::string& name) {
            outputs.push_back(dir + "/" + name);
            return root / dir / name;
        };

        SimulatedOracle oracle(setup.response.entries,
                               NoiseSpec{rec.epsilon, rec.seed, config.noise.mode});
        std::optional<ProtocolResult> result;
        std::optional<ImageResult> image;
        std::string error;
        try {
            result = run_protocol(config.protocol, oracle, setup, config.recovery);
            rec.illuminations = result->illuminations;
            if (rec.illuminations > manifest.illumination_budget)
                throw Error("illumination budget exceeded in " + dir);
            image = image_operator(result->matrix, setup.geometry, setup.grid, setup.scene,
                                   config.imaging);
            rec.status = "ok";
            rec.exact = image->report.exact();
        } catch (const ConditioningError& e) {
            rec.status = "conditioning-abort";
            rec.illuminations = oracle.queries();
            error = e.what();
        }

        fs::create_directories(root / dir);
        if (image) {
            if (config.output.csv)
                export_pseudospectrum_csv(image->spectrum, emit("pseudospectrum.csv"));
            if (config.output.pgm)
                export_pseudospectrum_pgm(image->spectrum, emit("pseudospectrum.pgm"));
        }
        if (config.output.matrices) {
            export_matrix(setup.response.entries, emit("response.csv"));
            if (result)
                export_matrix(result->matrix, emit("operator.csv"));
        }
        const json report = cell_report(rec, setup, result ? &*result : nullptr,
                                        image ? &*image : nullptr, error);
        write_text(emit("report.json"), report.dump(2) + "\n");
    };

    const std::size_t workers = worker_count(jobs.size());
    if (workers == 1) {
        for (std::size_t i = 0; i < jobs.size(); ++i) {
            try {
                run_cell(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < jobs.size(); i = next++) {
                    try {
                        run_cell(i);
                    } catch (...) {
                        errors[i] = std::current_exception();
                    }
                }
            });
        for (auto& t : pool)
            t.join();
    }
    for (const auto& e : errors)
        if (e)
            std::rethrow_exception(e);

    std::ostringstream summary;
    summary << "cell,range,epsilon,trial,seed,illuminations,status,exact,mean_nearest_error\n";
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        const CellRecord& rec = jobs[i].record;
        manifest.cells.push_back(rec);
        for (auto& o : cell_outputs[i])
            manifest.outputs.push_back(o);
        std::ifstream report(root / cell_name(rec.index, jobs.size()) / "report.json");
        const json r = json::parse(report);
        summary << rec.index << ',' << format_double(rec.range) << ',' << format_double(rec.epsilon)
                << ',' << rec.trial << ',' << rec.seed << ',' << rec.illuminations << ','
                << rec.status << ',' << (rec.exact ? 1 : 0) << ','
                << (r.contains("mean_nearest_error")
                        ? format_double(r["mean_nearest_error"].get<double>())
                        : std::string("nan"))
                << '\n';
    }
    write_text(root / "summary.csv", summary.str());
    write_text(root / "config.json", canonical_json(config));
    manifest.outputs.push_back("summary.csv");
    manifest.outputs.push_back("config.json");
    manifest.outputs.push_back("manifest.json");
    std::sort(manifest.outputs.begin(), manifest.outputs.end());

    json cells = json::array();
    for (const CellRecord& rec : manifest.cells)
        cells.push_back({{"cell", rec.index},
                         {"range", rec.range},
                         {"epsilon", rec.epsilon},
                         {"trial", rec.trial},
                         {"seed", rec.seed},
                         {"illuminations", rec.illuminations},
                         {"status", rec.status},
                         {"exact", rec.exact}});
    const json doc = {{"config_hash", manifest.config_hash},
                      {"protocol", std::string(to_string(config.protocol))},
                      {"noise_seed", manifest.master_seed},
                      {"scene_seed", manifest.scene_seed},
                      {"illumination_budget", manifest.illumination_budget},
                      {"cells", cells},
                      {"outputs", manifest.outputs}};
    write_text(root / "manifest.json", doc.dump(2) + "\n");

    manifest.wall_time = std::chrono::steady_clock::now() - start;
    return manifest;
}

}  // namespace phaseless
