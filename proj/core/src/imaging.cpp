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

#include "phaseless/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <tuple>

#include <Eigen/SVD>

#include "phaseless/error.hpp"

namespace phaseless {

namespace {

CMatrix steering_matrix(const ArrayGeometry& geom, const ImagingGrid& grid, bool normalize) {
    CMatrix g = sensing_matrix(geom, grid);
    if (normalize)
        g.colwise().normalize();
    return g;
}

std::vector<std::size_t> neighbours(const GridShape& shape, std::size_t k) {
    const std::size_t ix = k % shape.nx;
    const std::size_t iy = (k / shape.nx) % shape.ny;
    const std::size_t iz = k / (shape.nx * shape.ny);
    const std::size_t sx = 1;
    const std::size_t sy = shape.nx;
    const std::size_t sz = shape.nx * shape.ny;
    std::vector<std::size_t> out;
    if (ix > 0) out.push_back(k - sx);
    if (ix + 1 < shape.nx) out.push_back(k + sx);
    if (iy > 0) out.push_back(k - sy);
    if (iy + 1 < shape.ny) out.push_back(k + sy);
    if (iz > 0) out.push_back(k - sz);
    if (iz + 1 < shape.nz) out.push_back(k + sz);
    return out;
}

}  // namespace

SubspaceSplit subspace_split(const CMatrix& a, const RankRule& rule) {
    if (a.rows() == 0 || a.cols() == 0)
        throw PreconditionError("subspace split of an empty matrix");
    if (!a.allFinite())
        throw PreconditionError("subspace split needs a finite matrix");
    const auto n = static_cast<std::size_t>(a.cols());
    if (rule.kind == RankRule::Kind::Known && rule.rank >= n)
        throw PreconditionError("known signal rank must be below the array size");

    Eigen::BDCSVD<CMatrix> svd(a, Eigen::ComputeFullV);
    SubspaceSplit out;
    out.singular_values = svd.singularValues();
    out.right_vectors = svd.matrixV();

    const double top = out.singular_values.size() > 0 ? out.singular_values[0] : 0.0;
    if (top == 0.0) {
        out.no_signal = true;
        out.rank = 0;
        return out;
    }
    if (rule.kind == RankRule::Kind::Known) {
        out.rank = rule.rank;
    } else {
        std::size_t m = 0;
        while (m < static_cast<std::size_t>(out.singular_values.size()) &&
               out.singular_values[static_cast<Eigen::Index>(m)] > rule.threshold * top)
            ++m;
        out.rank = m;
    }
    return out;
}

CVector noise_projection(const SubspaceSplit& split, const CVector& steering) {
    const CMatrix vs = split.signal_basis();
    const CVector coeffs = vs.transpose() * steering;
    return steering - vs.conjugate() * coeffs;
}

Pseudospectrum music_pseudospectrum(const SubspaceSplit& split, const ArrayGeometry& geom,
                                    const ImagingGrid& grid, const MusicOptions& options) {
    if (split.rank == 0)
        throw PreconditionError("MUSIC needs a nonempty signal space");
    if (static_cast<std::size_t>(split.right_vectors.rows()) != geom.size())
        throw PreconditionError("subspace dimension does not match the array");

    const CMatrix g = steering_matrix(geom, grid, options.normalize_steering);
    const CMatrix vs = split.signal_basis();
    const CMatrix residual = g - vs.conjugate() * (vs.transpose() * g);

    const auto k = static_cast<Eigen::Index>(grid.size());
    RVector norms(k);
    for (Eigen::Index j = 0; j < k; ++j) {
        const double floor = options.residual_floor * g.col(j).norm();
        norms[j] = std::max(residual.col(j).norm(), floor);
    }
    Pseudospectrum ps;
    ps.shape = grid.shape();
    ps.normalization = norms.minCoeff();
    ps.values = norms.cwiseInverse() * ps.normalization;
    return ps;
}

RVector noise_space_functional(const SubspaceSplit& split, const ArrayGeometry& geom,
                               const ImagingGrid& grid, const MusicOptions& options) {
    const CMatrix g = steering_matrix(geom, grid, options.normalize_steering);
    const CMatrix vn = split.noise_basis();
    const RVector energy = (vn.transpose() * g).colwise().squaredNorm().transpose();
    RVector out(energy.size());
    for (Eigen::Index j = 0; j < energy.size(); ++j)
        out[j] = energy[j] > 0.0 ? 1.0 / energy[j] : std::numeric_limits<double>::infinity();
    return out;
}

PeakList detect_peaks(const Pseudospectrum& ps, const PeakRule& rule) {
    const auto k = static_cast<std::size_t>(ps.values.size());
    if (k == 0)
        throw PreconditionError("peak detection on an empty pseudospectrum");
    if (ps.shape.size() != k)
        throw PreconditionError("pseudospectrum shape does not match its values");

    const auto v = [&](std::size_t i) { return ps.values[static_cast<Eigen::Index>(i)]; };
    std::vector<std::size_t> maxima;
    std::vector<bool> plateau(k, false);
    for (std::size_t i = 0; i < k; ++i) {
        bool is_max = true;
        for (std::size_t nb : neighbours(ps.shape, i)) {
            if (v(nb) > v(i)) {
                is_max = false;
                break;
            }
            if (v(nb) == v(i))
                plateau[i] = true;
        }
        if (is_max)
            maxima.push_back(i);
    }
    std::stable_sort(maxima.begin(), maxima.end(),
                     [&](std::size_t a, std::size_t b) { return v(a) > v(b); });

    PeakList out;
    if (rule.kind == PeakRule::Kind::TopM) {
        if (maxima.size() < rule.count)
            out.shortfall = true;
        maxima.resize(std::min(maxima.size(), rule.count));
    } else {
        std::vector<double> sorted(ps.values.data(), ps.values.data() + k);
        std::nth_element(sorted.begin(), sorted.begin() + static_cast<long>(k / 2), sorted.end());
        double median = sorted[k / 2];
        if (k % 2 == 0) {
            const double lower = *std::max_element(sorted.begin(), sorted.begin() + static_cast<long>(k / 2));
            median = 0.5 * (median + lower);
        }
        out.floor = rule.floor_factor * median;
        std::erase_if(maxima, [&](std::size_t i) { return !(v(i) > out.floor); });
    }
    for (std::size_t i : maxima)
        if (plateau[i])
            out.degenerate = true;
    out.indices = std::move(maxima);
    return out;
}

bool LocalizationReport::exact() const {
    if (!misses.empty() || !ghosts.empty())
        return false;
    return std::all_of(matched.begin(), matched.end(), [](const PeakMatch& m) {
        return m.cross_range_error == 0.0 && m.range_error == 0.0;
    });
}

LocalizationReport localization_report(std::span<const std::size_t> detected, const Scene& scene,
                                       const ImagingGrid& grid) {
    if (scene.grid_size() != grid.size())
        throw PreconditionError("scene length does not match the imaging grid");
    for (std::size_t d : detected)
        if (d >= grid.size())
            throw PreconditionError("detected index outside the grid");

    const std::vector<std::size_t> truth = scene.support();
    LocalizationReport rep;
    rep.detected.assign(detected.begin(), detected.end());

    struct Offset {
        double dx, dy, dz;
        double cheb() const { return std::max({std::abs(dx), std::abs(dy), std::abs(dz)}); }
        double euclid() const { return std::sqrt(dx * dx + dy * dy + dz * dz); }
    };
    auto offset = [&](std::size_t a, std::size_t b) {
        const auto ca = grid.coords(a);
        const auto cb = grid.coords(b);
        return Offset{static_cast<double>(ca[0]) - static_cast<double>(cb[0]),
                      static_cast<double>(ca[1]) - static_cast<double>(cb[1]),
                      static_cast<double>(ca[2]) - static_cast<double>(cb[2])};
    };

    std::vector<std::tuple<double, std::size_t, std::size_t>> candidates;
    for (std::size_t t = 0; t < truth.size(); ++t)
        for (std::size_t d = 0; d < rep.detected.size(); ++d) {
            const Offset o = offset(rep.detected[d], truth[t]);
            if (o.cheb() <= 1.0)
                candidates.emplace_back(o.euclid(), t, d);
        }
    std::sort(candidates.begin(), candidates.end());

    std::vector<bool> truth_used(truth.size(), false);
    std::vector<bool> det_used(rep.detected.size(), false);
    for (const auto& [dist, t, d] : candidates) {
        if (truth_used[t] || det_used[d])
            continue;
        truth_used[t] = det_used[d] = true;
        const Offset o = offset(rep.detected[d], truth[t]);
        rep.matched.push_back({rep.detected[d], truth[t], std::hypot(o.dx, o.dy), std::abs(o.dz)});
    }
    for (std::size_t t = 0; t < truth.size(); ++t)
        if (!truth_used[t])
            rep.misses.push_back(truth[t]);
    for (std::size_t d = 0; d < rep.detected.size(); ++d)
        if (!det_used[d])
            rep.ghosts.push_back(rep.detected[d]);

    const GridShape& s = grid.shape();
    const auto span = [](std::size_t n) { return static_cast<double>(n - 1); };
    const double diagonal =
        std::max(1.0, std::sqrt(span(s.nx) * span(s.nx) + span(s.ny) * span(s.ny) +
                                span(s.nz) * span(s.nz)));
    double total = 0.0;
    for (std::size_t t : truth) {
        double best = diagonal;
        for (std::size_t d : rep.detected)
            best = std::min(best, offset(d, t).euclid());
        total += best;
    }
    rep.mean_nearest_error = truth.empty() ? 0.0 : total / static_cast<double>(truth.size());
    return rep;
}

}  // namespace phaseless
