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

#include <benchmark/benchmark.h>

#include "phaseless/forward.hpp"
#include "phaseless/geometry.hpp"
#include "phaseless/imaging.hpp"
#include "phaseless/phase_recovery.hpp"

using namespace phaseless;

namespace {

struct Fixture {
    ArrayGeometry geom;
    ImagingGrid grid;
    Scene scene;
    ResponseMatrix p;
};

Fixture make(std::size_t n, std::size_t nx, std::size_t nz, double range) {
    ArrayGeometry geom = ArrayGeometry::linear(n, 2000.0 / static_cast<double>(n - 1));
    ImagingGrid grid = nz == 1 ? ImagingGrid::line(geom, range, nx)
                               : ImagingGrid::window(geom, range, nx, nz);
    const std::vector<std::size_t> idx{grid.index_from_center(0, 0, 0),
                                       grid.index_from_center(-5, 0, 0),
                                       grid.index_from_center(7, 0, 0)};
    const std::vector<Complex> alpha{{1.0, 0.0}, {0.0, 1.0}, {-0.6, 0.8}};
    Scene scene = Scene::from_support(grid.size(), idx, alpha);
    ResponseMatrix p = assemble_response_born(geom, grid, scene);
    return {std::move(geom), std::move(grid), std::move(scene), std::move(p)};
}

void BM_SensingMatrix(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Fixture f = make(n, 51, 51, 5000.0);
    for (auto _ : state)
        benchmark::DoNotOptimize(sensing_matrix(f.geom, f.grid));
}
BENCHMARK(BM_SensingMatrix)->Arg(32)->Arg(101)->Unit(benchmark::kMillisecond);

void BM_RecoverTimeReversal(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Fixture f = make(n, 51, 1, 5000.0);
    for (auto _ : state) {
        SimulatedOracle oracle(f.p.entries);
        benchmark::DoNotOptimize(recover_time_reversal(oracle, n));
    }
}
BENCHMARK(BM_RecoverTimeReversal)->Arg(32)->Arg(101)->Unit(benchmark::kMillisecond);

void BM_Music(benchmark::State& state) {
    const Fixture f = make(101, 51, 51, 5000.0);
    const SubspaceSplit split = subspace_split(f.p.entries, RankRule::known(3));
    for (auto _ : state)
        benchmark::DoNotOptimize(music_pseudospectrum(split, f.geom, f.grid));
}
BENCHMARK(BM_Music)->Unit(benchmark::kMillisecond);

void BM_ParaxialSix(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Fixture f = make(n, 101, 1, 100000.0);
    const ResponseMatrix px = assemble_response_paraxial(f.geom, f.grid, f.scene);
    for (auto _ : state) {
        SimulatedOracle oracle(px.entries);
        benchmark::DoNotOptimize(recover_paraxial_six(oracle, f.geom, 100000.0));
    }
}
BENCHMARK(BM_ParaxialSix)->Arg(16)->Arg(101)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
