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

#include <cmath>
#include <complex>
#include <random>

#include <Eigen/SVD>
#include <gtest/gtest.h>

#include "phaseless/error.hpp"
#include "phaseless/forward.hpp"
#include "phaseless/geometry.hpp"

using namespace phaseless;

namespace {

Complex direct_green(const Point3& x, const Point3& y, double k) {
    const double r = (x - y).norm();
    return std::exp(Complex(0.0, k * r)) / (4.0 * M_PI * r);
}

double rel(const CMatrix& a, const CMatrix& b) { return (a - b).norm() / b.norm(); }

Scene random_scene(std::size_t k, std::size_t m, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> idx;
    while (idx.size() < m) {
        const std::size_t c = rng() % k;
        if (std::find(idx.begin(), idx.end(), c) == idx.end())
            idx.push_back(c);
    }
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<Complex> alpha;
    for (std::size_t j = 0; j < m; ++j)
        alpha.emplace_back(u(rng), u(rng));
    return Scene::from_support(k, idx, alpha);
}

// Flat line of points at range L on the x axis, `pitch` apart, starting at `x0`.
ImagingGrid custom_line(std::size_t k, double x0, double pitch, double range) {
    std::vector<Point3> pts;
    for (std::size_t j = 0; j < k; ++j)
        pts.emplace_back(x0 + static_cast<double>(j) * pitch, 0.0, range);
    return ImagingGrid(std::move(pts), GridShape{k, 1, 1}, range, pitch, pitch);
}

}  // namespace

TEST(BornResponse, SingleScattererIsRankOneOuterProduct) {
    const ArrayGeometry geom = ArrayGeometry::linear(12, 3.0);
    const ImagingGrid grid = ImagingGrid::window(geom, 200.0, 9, 5);
    const std::size_t j = grid.index_from_center(2, 0, -1);
    const std::vector<std::size_t> idx{j};
    const std::vector<Complex> alpha{{1.0, 0.0}};
    const ResponseMatrix p = assemble_response_born(geom, grid, Scene::from_support(grid.size(), idx, alpha));
    const CVector g = green_vector(geom, grid.point(j));
    EXPECT_LT(rel(p.entries, g * g.transpose()), 1e-15);
    Eigen::JacobiSVD<CMatrix> svd(p.entries);
    EXPECT_LT(svd.singularValues()[1], 1e-12 * svd.singularValues()[0]);
}

TEST(BornResponse, EmptySceneIsZeroWithWarning) {
    const ArrayGeometry geom = ArrayGeometry::linear(6, 2.0);
    const ImagingGrid grid = ImagingGrid::line(geom, 100.0, 7);
    const ResponseMatrix p = assemble_response_born(geom, grid, Scene(CVector::Zero(7)));
    EXPECT_EQ(p.entries.norm(), 0.0);
    EXPECT_EQ(p.entries.rows(), 6);
    EXPECT_EQ(p.warnings.size(), 1u);
}

TEST(BornResponse, MatchesBruteForceLoop) {
    const ArrayGeometry geom = ArrayGeometry::linear(8, 4.0);
    const ImagingGrid grid = ImagingGrid::window(geom, 150.0, 8, 4);
    ASSERT_EQ(grid.size(), 32u);
    const Scene scene = random_scene(32, 3, 17);
    const ResponseMatrix p = assemble_response_born(geom, grid, scene);
    for (std::size_t r = 0; r < 8; ++r)
        for (std::size_t s = 0; s < 8; ++s) {
            Complex sum = 0.0;
            for (std::size_t j = 0; j < 32; ++j)
                sum += scene.reflectivity()[static_cast<Eigen::Index>(j)] *
                       direct_green(geom.position(r), grid.point(j), kTwoPi) *
                       direct_green(grid.point(j), geom.position(s), kTwoPi);
            EXPECT_NEAR(std::abs(p.entries(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(s)) - sum),
                        0.0, 1e-13 * std::abs(sum));
        }
    EXPECT_TRUE(p.symmetric);
    EXPECT_LE((p.entries - p.entries.transpose()).norm(), 1e-14 * p.entries.norm());
}

TEST(BornResponse, RankBound) {
    const ArrayGeometry geom = ArrayGeometry::linear(101, 20.0);
    const ImagingGrid grid = ImagingGrid::window(geom, 5000.0, 31, 31);
    const Scene scene = random_scene(grid.size(), 3, 99);
    const ResponseMatrix p = assemble_response_born(geom, grid, scene);
    Eigen::BDCSVD<CMatrix> svd(p.entries);
    const RVector sv = svd.singularValues();
    EXPECT_GT(sv[2], 1e-10 * sv[0]);
    EXPECT_LT(sv[3], 1e-10 * sv[0]);
}

TEST(BornResponse, DistinctArraysAreNotSymmetric) {
    const ArrayGeometry src = ArrayGeometry::linear(5, 2.0);
    const ArrayGeometry rcv = ArrayGeometry::from_positions(
        {Point3(-3, 1, 0), Point3(0, 1, 0), Point3(3, 1, 0), Point3(6, 1, 0), Point3(9, 1, 0)});
    const ImagingGrid grid = ImagingGrid::line(src, 80.0, 9);
    const Scene scene = random_scene(9, 2, 3);
    const ResponseMatrix p = assemble_response_born(src, rcv, grid, scene);
    EXPECT_FALSE(p.symmetric);
    Complex sum = 0.0;
    for (std::size_t j : scene.support())
        sum += scene.reflectivity()[static_cast<Eigen::Index>(j)] *
               direct_green(rcv.position(2), grid.point(j), kTwoPi) *
               direct_green(grid.point(j), src.position(4), kTwoPi);
    EXPECT_NEAR(std::abs(p.entries(2, 4) - sum), 0.0, 1e-13 * std::abs(sum));
}

TEST(BornResponse, ScalingByComplexScalar) {
    const ArrayGeometry geom = ArrayGeometry::linear(10, 3.0);
    const ImagingGrid grid = ImagingGrid::window(geom, 300.0, 9, 3);
    const Scene scene = random_scene(grid.size(), 3, 8);
    const Complex c(0.3, -1.7);
    const Scene scaled(scene.reflectivity() * c);
    const ResponseMatrix p = assemble_response_born(geom, grid, scene);
    const ResponseMatrix q = assemble_response_born(geom, grid, scaled);
    EXPECT_LT(rel(q.entries, c * p.entries), 1e-14);
    const CVector f = CVector::Random(10);
    const RVector bp = measure_intensities(p, f).intensities;
    const RVector bq = measure_intensities(q, f).intensities;
    EXPECT_LT((bq - std::norm(c) * bp).norm(), 1e-13 * bq.norm());
}

TEST(GeometricFactorsTest, Magnitude) {
    const ArrayGeometry geom = ArrayGeometry::linear(21, 5.0);
    const GeometricFactors c = geometric_factors(geom, 1234.0);
    for (Eigen::Index t = 0; t < c.values.size(); ++t)
        EXPECT_NEAR(std::abs(c.values[t]) * 4.0 * M_PI * 1234.0, 1.0, 1e-14);
    EXPECT_THROW(geometric_factors(geom, 0.0), PreconditionError);
}

TEST(DistortedReflectivityTest, PreservesMagnitude) {
    const ArrayGeometry geom = ArrayGeometry::linear(16, 10.0);
    const ImagingGrid grid = ImagingGrid::line(geom, 5e3, 21);
    const Scene scene = random_scene(21, 4, 21);
    const CVector rt = distorted_reflectivity(grid, scene, geom.wavenumber());
    for (Eigen::Index j = 0; j < rt.size(); ++j)
        EXPECT_NEAR(std::abs(rt[j]), std::abs(scene.reflectivity()[j]), 1e-15);
}

TEST(ParaxialResponse, ScattererAtCrossRangeOrigin) {
    const ArrayGeometry geom = ArrayGeometry::linear(9, 10.0);
    const ImagingGrid grid = ImagingGrid::line(geom, 1e4, 11);
    const std::vector<std::size_t> idx{grid.index_from_center(0, 0, 0)};
    const std::vector<Complex> alpha{{0.6, 0.8}};
    const Scene scene = Scene::from_support(grid.size(), idx, alpha);
    const ResponseMatrix p = assemble_response_paraxial(geom, grid, scene);
    const CVector c = geometric_factors(geom, 1e4).values;
    EXPECT_LT(rel(p.entries, c * c.transpose() * alpha[0]), 1e-14);
    EXPECT_EQ(p.model, ResponseModel::Paraxial);
}

TEST(ParaxialResponse, NonFlatGridThrows) {
    const ArrayGeometry geom = ArrayGeometry::linear(9, 10.0);
    const ImagingGrid grid = ImagingGrid::window(geom, 1000.0, 5, 3);
    EXPECT_THROW(assemble_response_paraxial(geom, grid, Scene(CVector::Zero(15))), PreconditionError);
}

TEST(ParaxialResponse, InvalidRegimeWarns) {
    const ArrayGeometry geom = ArrayGeometry::linear(101, 20.0);
    const ImagingGrid grid = ImagingGrid::line(geom, 2000.0, 11);
    const ResponseMatrix p = assemble_response_paraxial(geom, grid, random_scene(11, 2, 4));
    EXPECT_EQ(p.warnings.size(), 1u);
    const ImagingGrid far = ImagingGrid::line(geom, 1e5, 11);
    EXPECT_TRUE(assemble_response_paraxial(geom, far, random_scene(11, 2, 4)).warnings.empty());
}

// Second-order expansion of each leg, |x - y| ~ L + |x_perp - y_perp|^2 / 2L,
// summed directly without collecting terms.
TEST(ParaxialResponse, MatchesUncollectedExpansion) {
    const ArrayGeometry geom = ArrayGeometry::linear(24, 7.0);
    const double range = 3e4;
    const ImagingGrid grid = ImagingGrid::line(geom, range, 41);
    const Scene scene = random_scene(grid.size(), 5, 77);
    const double k = geom.wavenumber();
    auto leg = [&](const Point3& x, const Point3& y) {
        const double dx = x.x() - y.x();
        const double dy = x.y() - y.y();
        return std::exp(Complex(0.0, k * (range + (dx * dx + dy * dy) / (2.0 * range)))) /
               (4.0 * M_PI * range);
    };
    CMatrix expected = CMatrix::Zero(24, 24);
    for (std::size_t j : scene.support())
        for (std::size_t r = 0; r < 24; ++r)
            for (std::size_t s = 0; s < 24; ++s)
                expected(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(s)) +=
                    scene.reflectivity()[static_cast<Eigen::Index>(j)] *
                    leg(geom.position(r), grid.point(j)) * leg(grid.point(j), geom.position(s));
    const ResponseMatrix p = assemble_response_paraxial(geom, grid, scene);
    EXPECT_LT(rel(p.entries, expected), 1e-9);
}

TEST(ParaxialResponse, ProcessedDataHasConstantAntiDiagonals) {
    const ArrayGeometry geom = ArrayGeometry::linear(20, 10.0);
    const ImagingGrid grid = ImagingGrid::line(geom, 5e4, 31);
    const ResponseMatrix p = assemble_response_paraxial(geom, grid, random_scene(31, 4, 12));
    const CVector c = geometric_factors(geom, 5e4).values;
    const CMatrix h = c.cwiseInverse().asDiagonal() * p.entries * c.cwiseInverse().asDiagonal();
    for (Eigen::Index r = 0; r < 20; ++r)
        for (Eigen::Index s = 0; s < 20; ++s)
            if (r + s < 19)
                EXPECT_NEAR(std::abs(h(r, s) - h(0, r + s)), 0.0, 1e-12 * h.norm());
            else
                EXPECT_NEAR(std::abs(h(r, s) - h(r + s - 19, 19)), 0.0, 1e-12 * h.norm());
}

TEST(ParaxialResponse, ErrorDecreasesWithRange) {
    const ArrayGeometry geom = ArrayGeometry::linear(101, 20.0);
    // Fixed physical positions (in wavelengths) at every range.
    const std::vector<double> xs{-40.0, 0.0, 30.0};
    const std::vector<Complex> alpha{{1, 0}, {0, 1}, {-0.5, 0.5}};
    double previous = std::numeric_limits<double>::infinity();
    for (double range : {1e4, 2e4, 5e4, 1e5}) {
        std::vector<Point3> pts;
        for (double x : xs)
            pts.emplace_back(x, 0.0, range);
        const ImagingGrid grid(pts, GridShape{3, 1, 1}, range, 1.0, 1.0);
        const std::vector<std::size_t> idx{0, 1, 2};
        const Scene scene = Scene::from_support(3, idx, alpha);
        const CMatrix born = assemble_response_born(geom, grid, scene).entries;
        const CMatrix parax = assemble_response_paraxial(geom, grid, scene).entries;
        const double err = rel(parax, born);
        EXPECT_LT(err, previous) << "range " << range;
        previous = err;
    }
}

TEST(HankelDataTest, FactorizationMatchesParaxialResponse) {
    const ArrayGeometry geom = ArrayGeometry::linear(16, 12.0);
    const double range = 8e4;
    const ImagingGrid grid = ImagingGrid::line(geom, range, 25);
    const Scene scene = random_scene(25, 5, 41);
    const HankelData hd = hankel_from_scene(geom, grid, scene);
    ASSERT_EQ(hd.skew.size(), 31);
    EXPECT_EQ(hd.order(), 16);
    const CVector c = geometric_factors(geom, range).values;
    const CMatrix p = assemble_response_paraxial(geom, grid, scene).entries;
    EXPECT_LT(rel(c.asDiagonal() * hd.matrix() * c.asDiagonal(), p), 1e-12);
    const CMatrix h = hd.matrix();
    EXPECT_EQ((h - h.transpose()).norm(), 0.0);
}

TEST(HankelDataTest, ScattererAtOriginGivesConstantSkew) {
    const ArrayGeometry geom = ArrayGeometry::linear(10, 5.0);
    const ImagingGrid grid = ImagingGrid::line(geom, 1e4, 9);
    const std::vector<std::size_t> idx{grid.index_from_center(0, 0, 0)};
    const std::vector<Complex> alpha{{0.0, 2.0}};
    const HankelData hd = hankel_from_scene(geom, grid, Scene::from_support(9, idx, alpha));
    for (Eigen::Index m = 0; m < hd.skew.size(); ++m)
        EXPECT_NEAR(std::abs(hd.skew[m] - alpha[0]), 0.0, 1e-15);
}

TEST(HankelDataTest, DiscreteFourierTransformFrame) {
    // Transducers at s a / N (s = 0..N-1), grid at j b / K (j = 1..K), N = K, Lambda = 2 pi.
    const std::size_t n = 16;
    const double pitch = 10.0;
    const double a = pitch * static_cast<double>(n);
    const double range = 1e4;
    const double b = range * static_cast<double>(n) / a;
    std::vector<Point3> pos;
    for (std::size_t s = 0; s < n; ++s)
        pos.emplace_back(static_cast<double>(s) * pitch, 0.0, 0.0);
    const ArrayGeometry geom = ArrayGeometry::from_positions(pos);
    const ImagingGrid grid = custom_line(n, b / static_cast<double>(n), b / static_cast<double>(n), range);
    const Scene scene = random_scene(n, 5, 3);
    const HankelData hd = hankel_from_scene(geom, grid, scene);
    EXPECT_NEAR(hd.lambda, kTwoPi, 1e-12);
    for (std::size_t m = 0; m < 2 * n - 1; ++m) {
        Complex dft = 0.0;
        for (std::size_t j = 1; j <= n; ++j) {
            const double y = static_cast<double>(j) * b / static_cast<double>(n);
            const Complex rt = scene.reflectivity()[static_cast<Eigen::Index>(j - 1)] *
                               std::exp(Complex(0.0, kTwoPi * y * y / range));
            dft += rt * std::exp(Complex(0.0, -kTwoPi * static_cast<double>(m * j) /
                                                  static_cast<double>(n)));
        }
        EXPECT_NEAR(std::abs(hd.skew[static_cast<Eigen::Index>(m)] - dft), 0.0, 1e-9) << m;
    }
}

TEST(HankelDataTest, RejectsNonLinearSetups) {
    const ArrayGeometry planar = ArrayGeometry::planar(3, 2.0);
    const ImagingGrid grid = ImagingGrid::plane(planar, 500.0, 3, 3);
    EXPECT_THROW(hankel_from_scene(planar, grid, Scene(CVector::Zero(9))), PreconditionError);
    const ArrayGeometry lin = ArrayGeometry::linear(5, 2.0);
    const ImagingGrid window = ImagingGrid::window(lin, 50.0, 3, 3);
    EXPECT_THROW(hankel_from_scene(lin, window, Scene(CVector::Zero(9))), PreconditionError);
}

TEST(MeasureIntensities, Basics) {
    const CMatrix p = CMatrix::Random(5, 5);
    EXPECT_EQ(measure_intensities(p, CVector::Zero(5)).intensities.norm(), 0.0);
    const RVector e1 = measure_intensities(CMatrix::Identity(5, 5), CVector::Unit(5, 0)).intensities;
    EXPECT_EQ(e1, RVector::Unit(5, 0));
    const CVector f = CVector::Random(5);
    const RVector beta = measure_intensities(p, f).intensities;
    for (Eigen::Index i = 0; i < 5; ++i) {
        Complex acc = 0.0;
        for (Eigen::Index s = 0; s < 5; ++s)
            acc += p(i, s) * f[s];
        EXPECT_NEAR(beta[i], std::norm(acc), 1e-14);
    }
    EXPECT_THROW(measure_intensities(p, CVector::Zero(4)), PreconditionError);
}

TEST(Noise, ZeroLevelAndZeroIntensity) {
    IntensityRecord rec{CVector::Ones(3), RVector(3), 0.0};
    rec.intensities << 0.0, 2.0, 5.0;
    EXPECT_EQ(apply_noise(rec, 0.0, 7).intensities, rec.intensities);
    EXPECT_EQ(apply_noise(rec, 0.5, 7).intensities[0], 0.0);
    EXPECT_THROW(apply_noise(rec, 1.0, 7), PreconditionError);
    EXPECT_THROW(apply_noise(rec, -0.1, 7), PreconditionError);
}

TEST(Noise, UniformLawMonteCarlo) {
    IntensityRecord rec{CVector::Ones(1000), RVector::Ones(1000), 0.0};
    double sum = 0.0;
    double lo = 2.0;
    double hi = 0.0;
    for (std::uint64_t t = 0; t < 1000; ++t) {
        const RVector b = apply_noise(rec, 0.1, 1000 + t).intensities;
        sum += b.sum();
        lo = std::min(lo, b.minCoeff());
        hi = std::max(hi, b.maxCoeff());
    }
    EXPECT_NEAR(sum / 1e6, 1.0, 1e-3);
    EXPECT_GE(lo, 0.9);
    EXPECT_LE(hi, 1.1);
}

TEST(Noise, IntervalDeterminismAndAdditiveMode) {
    IntensityRecord rec{CVector::Ones(50), RVector::LinSpaced(50, 0.5, 10.0), 0.0};
    const RVector a = apply_noise(rec, 0.2, 42).intensities;
    EXPECT_EQ(a, apply_noise(rec, 0.2, 42).intensities);
    EXPECT_NE(a, apply_noise(rec, 0.2, 43).intensities);
    const RVector add = apply_noise(rec, 0.2, 42, NoiseMode::Additive).intensities;
    for (Eigen::Index i = 0; i < 50; ++i) {
        const double b = rec.intensities[i];
        EXPECT_GE(a[i], 0.8 * b);
        EXPECT_LE(a[i], 1.2 * b);
        EXPECT_NEAR(add[i], b + a[i], 1e-14 * b);
    }
}
