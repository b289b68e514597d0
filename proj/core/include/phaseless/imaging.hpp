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

#include <cstddef>
#include <span>
#include <vector>

#include "phaseless/geometry.hpp"
#include "phaseless/types.hpp"

namespace phaseless {

/// How many singular vectors span the signal space.
struct RankRule {
    enum class Kind { Known, Threshold };

    Kind kind = Kind::Threshold;
    std::size_t rank = 0;
    double threshold = 1e-3;

    static RankRule known(std::size_t m) { return {Kind::Known, m, 0.0}; }
    static RankRule relative_threshold(double tau = 1e-3) { return {Kind::Threshold, 0, tau}; }
};

struct SubspaceSplit {
    RVector singular_values;  // descending
    CMatrix right_vectors;    // all N right singular vectors, column j <-> sigma_j
    std::size_t rank = 0;     // estimated signal dimension
    bool no_signal = false;   // set for a zero matrix

    /// First `rank` right singular vectors.
    CMatrix signal_basis() const { return right_vectors.leftCols(static_cast<Eigen::Index>(rank)); }
    /// Remaining right singular vectors.
    CMatrix noise_basis() const {
        return right_vectors.rightCols(right_vectors.cols() - static_cast<Eigen::Index>(rank));
    }
};

SubspaceSplit subspace_split(const CMatrix& a, const RankRule& rule);

/// Component of a steering vector outside the signal space,
/// g - sum_j (g^t V_j) conj(V_j). The coefficients use the plain transpose;
/// the right singular vectors of P span conj(g(y)) at scatterer locations,
/// so the reconstruction uses their conjugates.
CVector noise_projection(const SubspaceSplit& split, const CVector& steering);

struct MusicOptions {
    /// Scale every Green's function vector to unit norm before projecting.
    bool normalize_steering = true;
    /// Projection norms below this (relative to the steering norm) are
    /// raised to it; the cap keeps values finite at exact detections.
    double residual_floor = 1e-14;
};

struct Pseudospectrum {
    RVector values;              // one per grid point, max value 1
    double normalization = 0.0;  // min_j ||P g(y_j)||, the numerator
    GridShape shape;
};

/// I(y_s) = min_j ||P g(y_j)|| / ||P g(y_s)||.
Pseudospectrum music_pseudospectrum(const SubspaceSplit& split, const ArrayGeometry& geom,
                                    const ImagingGrid& grid, const MusicOptions& options = {});

/// 1 / sum_{j > M} |g(y_s)^t V_j|^2 over the explicit noise space. Same
/// argmax set as the pseudospectrum; quadratic in N, meant for checks.
RVector noise_space_functional(const SubspaceSplit& split, const ArrayGeometry& geom,
                               const ImagingGrid& grid, const MusicOptions& options = {});

struct PeakRule {
    enum class Kind { TopM, AboveFloor };

    Kind kind = Kind::TopM;
    std::size_t count = 1;
    double floor_factor = 3.0;

    static PeakRule top(std::size_t m) { return {Kind::TopM, m, 0.0}; }
    static PeakRule above_floor(double factor = 3.0) { return {Kind::AboveFloor, 0, factor}; }
};

struct PeakList {
    std::vector<std::size_t> indices;  // ranked by value, ties by lowest index
    bool shortfall = false;            // fewer local maxima than requested
    bool degenerate = false;           // a selected peak ties with a neighbour
    double floor = 0.0;                // threshold used by AboveFloor
};

/// Local maxima (value >= every axis neighbour) of the pseudospectrum.
PeakList detect_peaks(const Pseudospectrum& ps, const PeakRule& rule);

struct PeakMatch {
    std::size_t detected = 0;
    std::size_t truth = 0;
    double cross_range_error = 0.0;  // in cross-range cells
    double range_error = 0.0;        // in range cells
};

struct LocalizationReport {
    std::vector<std::size_t> detected;
    std::vector<PeakMatch> matched;
    std::vector<std::size_t> misses;
    std::vector<std::size_t> ghosts;
    /// Mean over true scatterers of the lattice distance to the closest
    /// detection (the lattice diagonal of the grid when nothing was detected).
    double mean_nearest_error = 0.0;

    /// Every scatterer matched with zero error and no ghosts.
    bool exact() const;
};

/// Greedy nearest matching of detections to scatterers within one grid
/// cell (Chebyshev distance on the lattice).
LocalizationReport localization_report(std::span<const std::size_t> detected, const Scene& scene,
                                       const ImagingGrid& grid);

}  // namespace phaseless
