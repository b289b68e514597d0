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

#include "phaseless/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "phaseless/error.hpp"

namespace phaseless {

namespace {

double max_pairwise_distance(const std::vector<Point3>& pts) {
    double best = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j)
            best = std::max(best, (pts[i] - pts[j]).norm());
    return best;
}

bool close(double a, double b, double rel) {
    return std::abs(a - b) <= rel * std::max({1.0, std::abs(a), std::abs(b)});
}

double centered(std::size_t i, std::size_t n, double h) {
    return (static_cast<double>(i) - 0.5 * static_cast<double>(n - 1)) * h;
}

void require_mesh_inputs(const ArrayGeometry& geom, double range) {
    if (!(range > 0.0))
        throw PreconditionError("imaging grid range must be positive");
    if (!(geom.aperture() > 0.0))
        throw PreconditionError("imaging grid mesh needs an array with nonzero aperture");
}

}  // namespace

// ArrayGeometry -------------------------------------------------------------

ArrayGeometry::ArrayGeometry(std::vector<Point3> positions, double wavenumber, double aperture)
    : positions_(std::move(positions)), wavenumber_(wavenumber), aperture_(aperture) {
    if (positions_.empty())
        throw PreconditionError("array geometry needs at least one transducer");
    if (!(wavenumber_ > 0.0) || !std::isfinite(wavenumber_))
        throw PreconditionError("wavenumber must be positive and finite");
    for (std::size_t s = 0; s < positions_.size(); ++s) {
        if (positions_[s].z() != 0.0 || !positions_[s].allFinite()) {
            std::ostringstream os;
            os << "transducer " << s << " is not on the plane z = 0";
            throw PreconditionError(os.str());
        }
    }
    const double extent = max_pairwise_distance(positions_);
    if (!close(extent, aperture_, 1e-9)) {
        std::ostringstream os;
        os << "aperture " << aperture_ << " does not match transducer extent " << extent;
        throw PreconditionError(os.str());
    }
}

ArrayGeometry ArrayGeometry::from_positions(std::vector<Point3> positions, double wavenumber) {
    const double extent = max_pairwise_distance(positions);
    return ArrayGeometry(std::move(positions), wavenumber, extent);
}

ArrayGeometry ArrayGeometry::linear(std::size_t n, double pitch, double wavenumber) {
    if (n == 0 || !(pitch > 0.0))
        throw PreconditionError("linear array needs n >= 1 and a positive pitch");
    std::vector<Point3> pts;
    pts.reserve(n);
    for (std::size_t s = 0; s < n; ++s)
        pts.emplace_back(centered(s, n, pitch), 0.0, 0.0);
    return ArrayGeometry(std::move(pts), wavenumber, static_cast<double>(n - 1) * pitch);
}

ArrayGeometry ArrayGeometry::planar(std::size_t n_side, double pitch, double wavenumber) {
    if (n_side == 0 || !(pitch > 0.0))
        throw PreconditionError("planar array needs n_side >= 1 and a positive pitch");
    std::vector<Point3> pts;
    pts.reserve(n_side * n_side);
    for (std::size_t iy = 0; iy < n_side; ++iy)
        for (std::size_t ix = 0; ix < n_side; ++ix)
            pts.emplace_back(centered(ix, n_side, pitch), centered(iy, n_side, pitch), 0.0);
    return from_positions(std::move(pts), wavenumber);
}

std::optional<ArrayGeometry::LinearLayout> ArrayGeometry::uniform_linear_layout() const {
    if (positions_.size() < 2)
        return std::nullopt;
    const double origin = positions_[0].x();
    const double pitch = positions_[1].x() - origin;
    if (pitch == 0.0)
        return std::nullopt;
    const double scale = std::abs(pitch);
    for (std::size_t s = 0; s < positions_.size(); ++s) {
        const Point3& p = positions_[s];
        const double expected = origin + static_cast<double>(s) * pitch;
        if (p.y() != 0.0 || std::abs(p.x() - expected) > 1e-9 * std::max(scale, std::abs(expected)))
            return std::nullopt;
    }
    return LinearLayout{origin, pitch};
}

// ImagingGrid ---------------------------------------------------------------

ImagingGrid::ImagingGrid(std::vector<Point3> points, GridShape shape, double range,
                         double cross_range_mesh, double range_mesh)
    : points_(std::move(points)),
      shape_(shape),
      range_(range),
      hx_(cross_range_mesh),
      hz_(range_mesh),
      flat_(true) {
    if (points_.empty())
        throw PreconditionError("imaging grid needs at least one point");
    if (shape_.size() != points_.size())
        throw PreconditionError("grid shape does not match the number of points");
    if (!(range_ > 0.0))
        throw PreconditionError("imaging grid range must be positive");
    for (const Point3& p : points_) {
        if (!(p.z() > 0.0))
            throw PreconditionError("grid points must lie in front of the array (z > 0)");
        if (p.z() != range_)
            flat_ = false;
    }
}

ImagingGrid ImagingGrid::window(const ArrayGeometry& geom, double range, std::size_t nx,
                                std::size_t nz) {
    require_mesh_inputs(geom, range);
    if (nx == 0 || nz == 0)
        throw PreconditionError("imaging window needs at least one point per axis");
    const double lambda = geom.wavelength();
    const double a = geom.aperture();
    const double hx = lambda * range / a;
    const double hz = lambda * range * range / (a * a);
    std::vector<Point3> pts;
    pts.reserve(nx * nz);
    for (std::size_t iz = 0; iz < nz; ++iz)
        for (std::size_t ix = 0; ix < nx; ++ix)
            pts.emplace_back(centered(ix, nx, hx), 0.0, nz == 1 ? range : range + centered(iz, nz, hz));
    return ImagingGrid(std::move(pts), GridShape{nx, 1, nz}, range, hx, hz);
}

ImagingGrid ImagingGrid::line(const ArrayGeometry& geom, double range, std::size_t nx) {
    return window(geom, range, nx, 1);
}

ImagingGrid ImagingGrid::plane(const ArrayGeometry& geom, double range, std::size_t nx,
                               std::size_t ny) {
    require_mesh_inputs(geom, range);
    if (nx == 0 || ny == 0)
        throw PreconditionError("imaging plane needs at least one point per axis");
    const double lambda = geom.wavelength();
    const double a = geom.aperture();
    const double hx = lambda * range / a;
    const double hz = lambda * range * range / (a * a);
    std::vector<Point3> pts;
    pts.reserve(nx * ny);
    for (std::size_t iy = 0; iy < ny; ++iy)
        for (std::size_t ix = 0; ix < nx; ++ix)
            pts.emplace_back(centered(ix, nx, hx), centered(iy, ny, hx), range);
    return ImagingGrid(std::move(pts), GridShape{nx, ny, 1}, range, hx, hz);
}

std::size_t ImagingGrid::index(std::size_t ix, std::size_t iy, std::size_t iz) const {
    if (ix >= shape_.nx || iy >= shape_.ny || iz >= shape_.nz)
        throw PreconditionError("grid coordinates out of range");
    return (iz * shape_.ny + iy) * shape_.nx + ix;
}

std::array<std::size_t, 3> ImagingGrid::coords(std::size_t k) const {
    const std::size_t ix = k % shape_.nx;
    const std::size_t iy = (k / shape_.nx) % shape_.ny;
    const std::size_t iz = k / (shape_.nx * shape_.ny);
    return {ix, iy, iz};
}

std::size_t ImagingGrid::index_from_center(long dx, long dy, long dz) const {
    auto axis = [](long d, std::size_t n) -> long {
        return d + static_cast<long>(n - 1) / 2;
    };
    const long ix = axis(dx, shape_.nx);
    const long iy = axis(dy, shape_.ny);
    const long iz = axis(dz, shape_.nz);
    if (ix < 0 || iy < 0 || iz < 0 || ix >= static_cast<long>(shape_.nx) ||
        iy >= static_cast<long>(shape_.ny) || iz >= static_cast<long>(shape_.nz)) {
        std::ostringstream os;
        os << "offset (" << dx << ", " << dy << ", " << dz << ") lies outside the image window";
        throw PreconditionError(os.str());
    }
    return index(static_cast<std::size_t>(ix), static_cast<std::size_t>(iy),
                 static_cast<std::size_t>(iz));
}

// Scene ---------------------------------------------------------------------

Scene::Scene(CVector reflectivity) : rho_(std::move(reflectivity)) {
    if (rho_.size() == 0)
        throw PreconditionError("scene needs a nonempty grid");
    if (!rho_.allFinite())
        throw PreconditionError("reflectivities must be finite");
}

Scene Scene::from_support(std::size_t grid_size, std::span<const std::size_t> indices,
                          std::span<const Complex> alphas) {
    if (indices.size() != alphas.size())
        throw PreconditionError("scatterer indices and reflectivities differ in length");
    CVector rho = CVector::Zero(static_cast<Eigen::Index>(grid_size));
    std::set<std::size_t> seen;
    for (std::size_t j = 0; j < indices.size(); ++j) {
        if (indices[j] >= grid_size)
            throw PreconditionError("scatterer index outside the grid");
        if (!seen.insert(indices[j]).second)
            throw PreconditionError("two scatterers share a grid point");
        rho[static_cast<Eigen::Index>(indices[j])] = alphas[j];
    }
    return Scene(std::move(rho));
}

std::vector<std::size_t> Scene::support() const {
    std::vector<std::size_t> out;
    for (Eigen::Index k = 0; k < rho_.size(); ++k)
        if (rho_[k] != Complex(0.0, 0.0))
            out.push_back(static_cast<std::size_t>(k));
    return out;
}

std::size_t Scene::scatterer_count() const {
    return static_cast<std::size_t>((rho_.array() != Complex(0.0, 0.0)).count());
}

void Scene::check_against(const ArrayGeometry& geom, const ImagingGrid& grid) const {
    if (grid_size() != grid.size())
        throw PreconditionError("scene length does not match the imaging grid");
    if (scatterer_count() >= geom.size())
        throw PreconditionError("subspace imaging needs fewer scatterers than transducers");
}

// Free functions ------------------------------------------------------------

std::string_view to_string(Regime regime) {
    switch (regime) {
    case Regime::Fresnel: return "fresnel";
    case Regime::Fraunhofer: return "fraunhofer";
    case Regime::InvalidParaxial: return "invalid-paraxial";
    }
    return "unknown";
}

Complex green(const Point3& x, const Point3& y, double wavenumber) {
    const double r = (x - y).norm();
    if (r == 0.0)
        throw DomainError("Green's function is singular at coincident points");
    return std::polar(1.0 / (4.0 * kPi * r), wavenumber * r);
}

CVector green_vector(const ArrayGeometry& geom, const Point3& y) {
    const auto n = static_cast<Eigen::Index>(geom.size());
    CVector g(n);
    for (Eigen::Index s = 0; s < n; ++s) {
        try {
            g[s] = green(geom.position(static_cast<std::size_t>(s)), y, geom.wavenumber());
        } catch (const DomainError&) {
            std::ostringstream os;
            os << "point coincides with transducer " << s;
            throw DomainError(os.str());
        }
    }
    return g;
}

CMatrix sensing_matrix(const ArrayGeometry& geom, const ImagingGrid& grid) {
    CMatrix g(static_cast<Eigen::Index>(geom.size()), static_cast<Eigen::Index>(grid.size()));
    for (std::size_t j = 0; j < grid.size(); ++j)
        g.col(static_cast<Eigen::Index>(j)) = green_vector(geom, grid.point(j));
    return g;
}

FresnelDiagnostics fresnel_diagnostics(double aperture, double wavelength, double range,
                                       const RegimeThresholds& thresholds) {
    if (!(range > 0.0))
        throw PreconditionError("Fresnel diagnostics need a positive range");
    FresnelDiagnostics d;
    d.fresnel_number = aperture * aperture / (wavelength * range);
    const double ratio = aperture / range;
    d.paraxial_error_bound = 0.25 * d.fresnel_number * ratio * ratio;
    if (d.fresnel_number < thresholds.fraunhofer)
        d.regime = Regime::Fraunhofer;
    else if (d.fresnel_number >= 1.0 && d.paraxial_error_bound < thresholds.paraxial_error)
        d.regime = Regime::Fresnel;
    else
        d.regime = Regime::InvalidParaxial;
    return d;
}

FresnelDiagnostics fresnel_diagnostics(const ArrayGeometry& geom, const ImagingGrid& grid,
                                       const RegimeThresholds& thresholds) {
    return fresnel_diagnostics(geom.aperture(), geom.wavelength(), grid.range(), thresholds);
}

std::size_t optimal_grid_count(const ArrayGeometry& geom, double range, double window_length) {
    if (!(range > 0.0) || !(window_length > 0.0))
        throw PreconditionError("optimal grid count needs positive range and window length");
    const double k = std::round(geom.aperture() * window_length / (geom.wavelength() * range));
    if (k < 1.0)
        throw PreconditionError("degenerate grid: fewer than one resolution cell in the window");
    return static_cast<std::size_t>(k);
}

}  // namespace phaseless
