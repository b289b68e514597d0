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

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "phaseless/types.hpp"

namespace phaseless {

/// Transducer layout of an active array lying on the plane z = 0. Sources
/// and receivers share these positions. Lengths are in wavelengths unless a
/// different wavenumber is supplied.
class ArrayGeometry {
public:
    /// Validates that every position has z == 0, that `wavenumber > 0` and
    /// that `aperture` equals the largest pairwise distance (relative 1e-9).
    ArrayGeometry(std::vector<Point3> positions, double wavenumber, double aperture);

    /// Same as above with the aperture computed from the positions.
    static ArrayGeometry from_positions(std::vector<Point3> positions,
                                        double wavenumber = kTwoPi);

    /// `n` transducers on the x axis, `pitch` apart, centered on the origin.
    static ArrayGeometry linear(std::size_t n, double pitch, double wavenumber = kTwoPi);

    /// `n_side` x `n_side` square array in the (x, y) plane, centered.
    static ArrayGeometry planar(std::size_t n_side, double pitch, double wavenumber = kTwoPi);

    std::size_t size() const noexcept { return positions_.size(); }
    const std::vector<Point3>& positions() const noexcept { return positions_; }
    const Point3& position(std::size_t s) const { return positions_.at(s); }
    double wavenumber() const noexcept { return wavenumber_; }
    double wavelength() const noexcept { return kTwoPi / wavenumber_; }
    double aperture() const noexcept { return aperture_; }

    /// Origin and pitch when the transducers sit on the x axis at
    /// x_s = origin + s * pitch (relative tolerance 1e-9); nullopt otherwise.
    struct LinearLayout {
        double origin;
        double pitch;
    };
    std::optional<LinearLayout> uniform_linear_layout() const;

private:
    std::vector<Point3> positions_;
    double wavenumber_;
    double aperture_;
};

/// Lattice dimensions of an imaging grid; used for neighbourhoods when
/// searching for pseudospectrum peaks.
struct GridShape {
    std::size_t nx = 1;
    std::size_t ny = 1;
    std::size_t nz = 1;

    std::size_t size() const noexcept { return nx * ny * nz; }
    bool operator==(const GridShape&) const = default;
};

/// Discretized image window at range L from the array plane. Linear index
/// k = (iz * ny + iy) * nx + ix.
class ImagingGrid {
public:
    ImagingGrid(std::vector<Point3> points, GridShape shape, double range,
                double cross_range_mesh, double range_mesh);

    /// Uniform (x, z) window centered at (0, 0, L) with mesh h_x = lambda L / a
    /// and h_z = lambda L^2 / a^2. `nz == 1` yields a flat segment at range L.
    static ImagingGrid window(const ArrayGeometry& geom, double range, std::size_t nx,
                              std::size_t nz);

    /// Flat segment of `nx` points along x at range L (mesh h_x).
    static ImagingGrid line(const ArrayGeometry& geom, double range, std::size_t nx);

    /// Flat `nx` x `ny` patch in the plane z = L (mesh h_x in both directions).
    static ImagingGrid plane(const ArrayGeometry& geom, double range, std::size_t nx,
                             std::size_t ny);

    std::size_t size() const noexcept { return points_.size(); }
    const std::vector<Point3>& points() const noexcept { return points_; }
    const Point3& point(std::size_t k) const { return points_.at(k); }
    const GridShape& shape() const noexcept { return shape_; }
    double range() const noexcept { return range_; }
    double cross_range_mesh() const noexcept { return hx_; }
    double range_mesh() const noexcept { return hz_; }
    bool flat() const noexcept { return flat_; }

    std::size_t index(std::size_t ix, std::size_t iy, std::size_t iz) const;
    std::array<std::size_t, 3> coords(std::size_t k) const;

    /// Index of the lattice point at the given offsets (in cells) from the
    /// window center; throws PreconditionError when outside the window.
    std::size_t index_from_center(long dx, long dy, long dz) const;

private:
    std::vector<Point3> points_;
    GridShape shape_;
    double range_;
    double hx_;
    double hz_;
    bool flat_;
};

/// Sparse reflectivity over the grid; nonzero entries are scatterers.
class Scene {
public:
    explicit Scene(CVector reflectivity);

    /// Places `alphas[j]` at grid index `indices[j]`. Indices must be
    /// distinct and below `grid_size`.
    static Scene from_support(std::size_t grid_size, std::span<const std::size_t> indices,
                              std::span<const Complex> alphas);

    const CVector& reflectivity() const noexcept { return rho_; }
    std::size_t grid_size() const noexcept { return static_cast<std::size_t>(rho_.size()); }
    std::vector<std::size_t> support() const;
    std::size_t scatterer_count() const;

    /// Throws PreconditionError unless the scene fits `grid` and has fewer
    /// scatterers than the array has transducers.
    void check_against(const ArrayGeometry& geom, const ImagingGrid& grid) const;

private:
    CVector rho_;
};

enum class Regime { Fresnel, Fraunhofer, InvalidParaxial };

std::string_view to_string(Regime regime);

/// Thresholds standing in for the asymptotic conditions F << 1 and
/// F (a/L)^2 / 4 << 1.
struct RegimeThresholds {
    double fraunhofer = 0.1;
    double paraxial_error = 0.01;
};

struct FresnelDiagnostics {
    double fresnel_number = 0.0;
    double paraxial_error_bound = 0.0;
    Regime regime = Regime::InvalidParaxial;
};

/// Homogeneous-medium Green's function exp(i k r) / (4 pi r), r = |x - y|.
/// Throws DomainError when x == y.
Complex green(const Point3& x, const Point3& y, double wavenumber);

/// [G(x_1, y), ..., G(x_N, y)]^t.
CVector green_vector(const ArrayGeometry& geom, const Point3& y);

/// N x K matrix whose column j is green_vector(geom, grid.point(j)).
CMatrix sensing_matrix(const ArrayGeometry& geom, const ImagingGrid& grid);

FresnelDiagnostics fresnel_diagnostics(double aperture, double wavelength, double range,
                                       const RegimeThresholds& thresholds = {});
FresnelDiagnostics fresnel_diagnostics(const ArrayGeometry& geom, const ImagingGrid& grid,
                                       const RegimeThresholds& thresholds = {});

/// round(a b / (lambda L)): the window length over the cross-range
/// resolution limit. Throws PreconditionError for a result below one.
std::size_t optimal_grid_count(const ArrayGeometry& geom, double range, double window_length);

}  // namespace phaseless
