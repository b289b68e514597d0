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

#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "phaseless/forward.hpp"
#include "phaseless/geometry.hpp"
#include "phaseless/imaging.hpp"
#include "phaseless/phase_recovery.hpp"
#include "phaseless/types.hpp"

namespace phaseless {

enum class Protocol { General, Symmetric, ParaxialSix, FullPhaseBaseline };
enum class Layout { Linear, Planar };

std::string_view to_string(Protocol protocol);
/// Accepts general, symmetric, paraxial-six and full-phase-baseline.
Protocol parse_protocol(std::string_view name);

/// Largest number of illuminations a protocol may use on N transducers.
std::size_t illumination_budget(Protocol protocol, std::size_t n);

/// Scatterer position in cells from the image window center.
struct ScattererSpec {
    long dx = 0;
    long dy = 0;
    long dz = 0;
    std::optional<Complex> reflectivity;
};

/// One experiment, JSON-backed. Lengths share the wavelength's unit.
struct ExperimentConfig {
    struct Geometry {
        std::size_t transducers = 8;  // total count; a square number for planar arrays
        double pitch = 1.0;
        double wavelength = 1.0;
        Layout layout = Layout::Linear;
    } geometry;

    struct Grid {
        std::vector<double> ranges{100.0};
        std::size_t cross_range_points = 16;  // ignored when `extent` is set
        std::size_t range_points = 1;
        std::optional<double> extent;  // window length b; points = round(a b / (lambda L))
    } grid;

    struct SceneBlock {
        std::vector<ScattererSpec> scatterers;
        double magnitude = 1.0;
        std::uint64_t seed = 0;  // random phases for scatterers without a reflectivity
    } scene;

    Protocol protocol = Protocol::General;
    ResponseModel forward_model = ResponseModel::Born;

    struct Noise {
        std::vector<double> epsilons{0.0};
        std::uint64_t seed = 0;
        std::size_t trials = 1;
        NoiseMode mode = NoiseMode::Replace;
    } noise;

    RecoveryOptions recovery;

    struct Imaging {
        RankRule rank = RankRule::known(0);  // known rank 0 means the scatterer count
        PeakRule peaks = PeakRule::top(0);   // top 0 means the scatterer count
        MusicOptions music;
    } imaging;

    struct Output {
        std::filesystem::path directory = "out";
        bool csv = true;
        bool pgm = false;
        bool matrices = false;
    } output;
};

/// Parses and validates a JSON document. Unknown keys are rejected.
/// Throws ConfigError.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Checks every cross-field constraint without running anything.
void validate(const ExperimentConfig& config);

/// Normalized JSON text of a configuration; the basis of the config hash.
/// The output directory is left out so relocated runs hash the same.
std::string canonical_json(const ExperimentConfig& config);

/// 64-bit FNV-1a of `canonical_json(config)`, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

/// Geometry, grid, scene and true response at one range.
struct Setup {
    ArrayGeometry geometry;
    ImagingGrid grid;
    Scene scene;
    ResponseMatrix response;
};

Setup build_setup(const ExperimentConfig& config, double range);

/// Illuminations a protocol sends; the baseline lists e_1, ..., e_N.
IlluminationPlan plan_for(Protocol protocol, const Setup& setup);

/// Operator handed to MUSIC together with how it was obtained.
struct ProtocolResult {
    CMatrix matrix;
    std::size_t illuminations = 0;
    std::string operator_kind;
    ConditionReport condition;
};

/// Runs `protocol` against `oracle`. FullPhaseBaseline returns the setup's
/// response and counts N illuminations without querying.
ProtocolResult run_protocol(Protocol protocol, IntensityOracle& oracle, const Setup& setup,
                            const RecoveryOptions& options);

struct ImageResult {
    SubspaceSplit split;
    Pseudospectrum spectrum;
    PeakList peaks;
    LocalizationReport report;
};

/// Subspace split, pseudospectrum, peaks and localization against `truth`.
ImageResult image_operator(const CMatrix& op, const ArrayGeometry& geom, const ImagingGrid& grid,
                           const Scene& truth, const ExperimentConfig::Imaging& options);

struct CellRecord {
    std::size_t index = 0;
    double range = 0.0;
    double epsilon = 0.0;
    std::size_t trial = 0;
    std::uint64_t seed = 0;
    std::size_t illuminations = 0;
    std::string status;  // "ok" or "conditioning-abort"
    bool exact = false;
};

struct RunManifest {
    std::string config_hash;
    std::uint64_t master_seed = 0;
    std::uint64_t scene_seed = 0;
    std::size_t illumination_budget = 0;
    std::vector<CellRecord> cells;
    std::vector<std::string> outputs;  // relative to the output directory
    std::chrono::duration<double> wall_time{0.0};

    std::size_t failed_cells() const;
};

/// Runs every (range, epsilon, trial) cell, writing per-cell outputs plus
/// summary.csv and manifest.json. Cell i draws noise from
/// mix_seed(noise.seed, i). IMAGER_THREADS caps the worker count.
RunManifest run_experiment(const ExperimentConfig& config);

/// Worker count for `jobs` independent tasks.
std::size_t worker_count(std::size_t jobs);

}  // namespace phaseless
