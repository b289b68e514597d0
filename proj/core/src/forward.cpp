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

#include "phaseless/forward.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "phaseless/error.hpp"
#include "phaseless/random.hpp"

namespace phaseless {

namespace {

double cross_norm2(const Point3& p) { return p.x() * p.x() + p.y() * p.y(); }

double cross_dot(const Point3& a, const Point3& b) { return a.x() * b.x() + a.y() * b.y(); }

bool same_layout(const ArrayGeometry& a, const ArrayGeometry& b) {
    if (a.size() != b.size())
        return false;
    for (std::size_t s = 0; s < a.size(); ++s)
        if (a.position(s) != b.position(s))
            return false;
    return true;
}

}  // namespace

GeometricFactors geometric_factors(const ArrayGeometry& geom, double range) {
    if (!(range > 0.0))
        throw PreconditionError("geometric factors need a positive range");
    const double k = geom.wavenumber();
    const double amp = 1.0 / (4.0 * kPi * range);
    GeometricFactors f;
    f.values.resize(static_cast<Eigen::Index>(geom.size()));
    for (std::size_t t = 0; t < geom.size(); ++t) {
        const double phase = k * range + k * cross_norm2(geom.position(t)) / (2.0 * range);
        f.values[static_cast<Eigen::Index>(t)] = std::polar(amp, phase);
    }
    return f;
}

CVector distorted_reflectivity(const ImagingGrid& grid, const Scene& scene, double wavenumber) {
    if (scene.grid_size() != grid.size())
        throw PreconditionError("scene length does not match the imaging grid");
    const double range = grid.range();
    CVector out = scene.reflectivity();
    for (Eigen::Index j = 0; j < out.size(); ++j) {
        if (out[j] == Complex(0.0, 0.0))
            continue;
        const double phase = wavenumber * cross_norm2(grid.point(static_cast<std::size_t>(j))) / range;
        out[j] *= std::polar(1.0, phase);
    }
    return out;
}

CMatrix hankel_matrix(const CVector& skew) {
    if (skew.size() % 2 == 0)
        throw PreconditionError("Hankel skew-diagonal vector must have odd length 2N - 1");
    const Eigen::Index n = (skew.size() + 1) / 2;
    CMatrix h(n, n);
    for (Eigen::Index r = 0; r < n; ++r)
        for (Eigen::Index s = 0; s < n; ++s)
            h(r, s) = skew[r + s];
    return h;
}

CMatrix HankelData::matrix() const { return hankel_matrix(skew); }

ResponseMatrix assemble_response_born(const ArrayGeometry& geom, const ImagingGrid& grid,
                                      const Scene& scene) {
    return assemble_response_born(geom, geom, grid, scene);
}

ResponseMatrix assemble_response_born(const ArrayGeometry& sources,
                                      const ArrayGeometry& receivers,
                                      const ImagingGrid& grid, const Scene& scene) {
    if (scene.grid_size() != grid.size())
        throw PreconditionError("scene length does not match the imaging grid");
    const auto nr = static_cast<Eigen::Index>(receivers.size());
    const auto ns = static_cast<Eigen::Index>(sources.size());

    ResponseMatrix out;
    out.model = ResponseModel::Born;
    out.symmetric = same_layout(sources, receivers);
    out.entries = CMatrix::Zero(nr, ns);

    const std::vector<std::size_t> support = scene.support();
    if (support.empty()) {
        out.warnings.emplace_back("empty scene: response matrix is zero");
        return out;
    }
    for (std::size_t j : support) {
        const Point3& y = grid.point(j);
        const Complex alpha = scene.reflectivity()[static_cast<Eigen::Index>(j)];
        const CVector gr = green_vector(receivers, y);
        const CVector gs = out.symmetric ? gr : green_vector(sources, y);
        out.entries.noalias() += alpha * gr * gs.transpose();
    }
    return out;
}

ResponseMatrix assemble_response_paraxial(const ArrayGeometry& geom, const ImagingGrid& grid,
                                          const Scene& scene, const RegimeThresholds& thresholds) {
    if (!grid.flat())
        throw PreconditionError("paraxial response needs a flat grid (all points at range L)");
    const double k = geom.wavenumber();
    const double range = grid.range();
    const auto n = static_cast<Eigen::Index>(geom.size());

    ResponseMatrix out;
    out.model = ResponseModel::Paraxial;
    out.symmetric = true;
    const FresnelDiagnostics diag = fresnel_diagnostics(geom, grid, thresholds);
    if (diag.regime == Regime::InvalidParaxial) {
        std::ostringstream os;
        os << "paraxial model outside its validity regime (F = " << diag.fresnel_number
           << ", error bound = " << diag.paraxial_error_bound << ")";
        out.warnings.push_back(os.str());
    }

    const CVector rho_t = distorted_reflectivity(grid, scene, k);
    const CVector c = geometric_factors(geom, range).values;
    CMatrix kernel = CMatrix::Zero(n, n);
    for (Eigen::Index j = 0; j < rho_t.size(); ++j) {
        if (rho_t[j] == Complex(0.0, 0.0))
            continue;
        const Point3& y = grid.point(static_cast<std::size_t>(j));
        for (Eigen::Index r = 0; r < n; ++r) {
            for (Eigen::Index s = r; s < n; ++s) {
                const Point3 sum = geom.position(static_cast<std::size_t>(r)) +
                                   geom.position(static_cast<std::size_t>(s));
                kernel(r, s) += rho_t[j] * std::polar(1.0, -k * cross_dot(sum, y) / range);
            }
        }
    }
    for (Eigen::Index r = 0; r < n; ++r)
        for (Eigen::Index s = 0; s < r; ++s)
            kernel(r, s) = kernel(s, r);
    out.entries = c.asDiagonal() * kernel * c.asDiagonal();
    return out;
}

HankelData hankel_from_scene(const ArrayGeometry& geom, const ImagingGrid& grid,
                             const Scene& scene) {
    const auto layout = geom.uniform_linear_layout();
    if (!layout)
        throw PreconditionError("Hankel data need a uniform linear array on the x axis");
    if (!grid.flat() || grid.shape().ny != 1 || grid.shape().nz != 1)
        throw PreconditionError("Hankel data need a flat one-dimensional grid");
    for (const Point3& p : grid.points())
        if (p.y() != 0.0)
            throw PreconditionError("Hankel data need grid points on the x axis");

    const double k = geom.wavenumber();
    const double range = grid.range();
    const auto n = static_cast<Eigen::Index>(geom.size());
    const CVector rho_t = distorted_reflectivity(grid, scene, k);

    HankelData out;
    out.skew = CVector::Zero(2 * n - 1);
    for (Eigen::Index j = 0; j < rho_t.size(); ++j) {
        if (rho_t[j] == Complex(0.0, 0.0))
            continue;
        const double y = grid.point(static_cast<std::size_t>(j)).x();
        for (Eigen::Index m = 0; m < out.skew.size(); ++m) {
            const double xsum = 2.0 * layout->origin + static_cast<double>(m) * layout->pitch;
            out.skew[m] += rho_t[j] * std::polar(1.0, -k * xsum * y / range);
        }
    }
    const double grid_pitch = grid.size() >= 2 ? grid.point(1).x() - grid.point(0).x()
                                               : grid.cross_range_mesh();
    out.lambda = k * layout->pitch * static_cast<double>(n) * grid_pitch / range;
    return out;
}

IntensityRecord measure_intensities(const CMatrix& response, const CVector& illumination) {
    if (illumination.size() != response.cols()) {
        std::ostringstream os;
        os << "illumination has " << illumination.size() << " entries, array has "
           << response.cols() << " sources";
        throw PreconditionError(os.str());
    }
    IntensityRecord rec;
    rec.illumination = illumination;
    rec.intensities = (response * illumination).cwiseAbs2();
    return rec;
}

IntensityRecord measure_intensities(const ResponseMatrix& response, const CVector& illumination) {
    return measure_intensities(response.entries, illumination);
}

IntensityRecord apply_noise(const IntensityRecord& record, double eps, std::uint64_t seed,
                            NoiseMode mode) {
    if (!(eps >= 0.0 && eps < 1.0))
        throw PreconditionError("noise level must satisfy 0 <= eps < 1");
    IntensityRecord out = record;
    out.noise = eps;
    if (eps == 0.0)
        return out;
    std::mt19937_64 rng(seed);
    for (Eigen::Index i = 0; i < out.intensities.size(); ++i) {
        const double beta = record.intensities[i];
        const double draw = beta * (1.0 - eps + 2.0 * eps * uniform01(rng));
        out.intensities[i] = mode == NoiseMode::Replace ? draw : beta + draw;
    }
    return out;
}

}  // namespace phaseless
