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

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "phaseless/geometry.hpp"
#include "phaseless/types.hpp"

namespace phaseless {

enum class ResponseModel { Born, Paraxial };

/// Full array response matrix P; entry (r, s) is the signal at receiver r
/// for a unit emission from source s.
struct ResponseMatrix {
    CMatrix entries;
    ResponseModel model = ResponseModel::Born;
    bool symmetric = true;
    std::vector<std::string> warnings;

    Eigen::Index size() const noexcept { return entries.rows(); }
};

/// Paraxial pre/post factors C_t = exp(i k L) exp(i k |x_t|^2 / 2L) / (4 pi L),
/// with x_t the cross-range coordinates of transducer t.
struct GeometricFactors {
    CVector values;

    Eigen::DiagonalMatrix<Complex, Eigen::Dynamic> diagonal() const {
        return values.asDiagonal();
    }
};

GeometricFactors geometric_factors(const ArrayGeometry& geom, double range);

/// Reflectivities with the known-range quadratic phase absorbed:
/// rho~_j = rho_j exp(i k |y_j|^2 / L), y_j the cross-range coordinates of
/// grid point j. The exponent collects |y_j|^2 / 2L from both the outgoing
/// and the return leg.
CVector distorted_reflectivity(const ImagingGrid& grid, const Scene& scene, double wavenumber);

/// Skew-diagonal values of the processed paraxial response of a linear
/// array and a flat line of grid points: H(r, s) = skew[r + s].
struct HankelData {
    CVector skew;         // length 2N - 1
    double lambda = 0.0;  // k a b / (L K) in the (pitch * N, grid pitch * K) frame

    Eigen::Index order() const noexcept { return (skew.size() + 1) / 2; }
    CMatrix matrix() const;
};

/// N x N Hankel matrix H(r, s) = skew[r + s] from 2N - 1 values.
CMatrix hankel_matrix(const CVector& skew);

/// P = G diag(rho) G^t for co-located sources and receivers.
ResponseMatrix assemble_response_born(const ArrayGeometry& geom, const ImagingGrid& grid,
                                      const Scene& scene);

/// P(r, s) = sum_j rho_j G(x_r, y_j) G(y_j, x_s) for distinct receiver and
/// source arrays. `symmetric` is set only when the two layouts coincide.
ResponseMatrix assemble_response_born(const ArrayGeometry& sources,
                                      const ArrayGeometry& receivers,
                                      const ImagingGrid& grid, const Scene& scene);

/// P(r, s) = C_r C_s sum_j rho~_j exp(-i k <x_r + x_s, y_j> / L) on a flat
/// grid. Outside the Fresnel/Fraunhofer regime a warning is attached.
ResponseMatrix assemble_response_paraxial(const ArrayGeometry& geom, const ImagingGrid& grid,
                                          const Scene& scene,
                                          const RegimeThresholds& thresholds = {});

/// Skew-diagonals of C_r^{-1} P_parax(r, s) C_s^{-1} for a uniform linear
/// array on the x axis and a flat line of grid points on the x axis.
HankelData hankel_from_scene(const ArrayGeometry& geom, const ImagingGrid& grid,
                             const Scene& scene);

/// One illumination and the per-receiver intensities it produced.
struct IntensityRecord {
    CVector illumination;
    RVector intensities;
    double noise = 0.0;
};

/// beta_i = |(P f)_i|^2.
IntensityRecord measure_intensities(const CMatrix& response, const CVector& illumination);
IntensityRecord measure_intensities(const ResponseMatrix& response, const CVector& illumination);

enum class NoiseMode {
    /// beta_i is replaced by a draw uniform on [(1 - eps) beta_i, (1 + eps) beta_i].
    Replace,
    /// The draw is added to beta_i.
    Additive,
};

/// Independent uniform perturbation of every intensity; deterministic in
/// (record, eps, seed, mode). Throws PreconditionError unless 0 <= eps < 1.
IntensityRecord apply_noise(const IntensityRecord& record, double eps, std::uint64_t seed,
                            NoiseMode mode = NoiseMode::Replace);

}  // namespace phaseless
