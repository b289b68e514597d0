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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "phaseless/error.hpp"
#include "phaseless/experiment.hpp"

using namespace phaseless;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::path(testing::TempDir()) / "phaseless_experiment" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string read(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

json smoke() {
    return json::parse(R"({
      "geometry": {"transducers": 8, "pitch": 2.0},
      "grid": {"ranges": [60.0], "cross_range_points": 16},
      "scene": {"scatterers": [{"x": 2}], "seed": 1},
      "protocol": "general",
      "noise": {"epsilon": [0.0], "seed": 9}
    })");
}

json sweep() {
    return json::parse(R"({
      "geometry": {"transducers": 16, "pitch": 3.0},
      "grid": {"ranges": [200.0, 400.0], "cross_range_points": 21, "range_points": 9},
      "scene": {"scatterers": [{"x": -4, "z": 1}, {"x": 3, "z": -2}, {"x": 7, "z": 3}], "seed": 3},
      "protocol": "general",
      "noise": {"epsilon": [0.0, 0.1], "seed": 42, "trials": 2},
      "output": {"formats": ["csv", "pgm"], "matrices": true}
    })");
}

ExperimentConfig with_dir(json doc, const fs::path& dir) {
    doc["output"]["directory"] = dir.string();
    return parse_config(doc.dump());
}

void expect_config_error(json doc, const std::string& fragment) {
    try {
        parse_config(doc.dump());
        FAIL() << "expected ConfigError mentioning " << fragment;
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
    }
}

// All output bytes under `dir`, keyed by relative path.
std::map<std::string, std::string> snapshot(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file())
            out[fs::relative(e.path(), dir).generic_string()] = read(e.path());
    return out;
}

class ThreadsEnv {
public:
    explicit ThreadsEnv(const char* value) { setenv("IMAGER_THREADS", value, 1); }
    ~ThreadsEnv() { unsetenv("IMAGER_THREADS"); }
};

}  // namespace

TEST(Config, DefaultsAndParsing) {
    const ExperimentConfig c = parse_config(smoke().dump());
    EXPECT_EQ(c.geometry.transducers, 8u);
    EXPECT_EQ(c.geometry.layout, Layout::Linear);
    EXPECT_EQ(c.grid.range_points, 1u);
    EXPECT_EQ(c.scene.scatterers.size(), 1u);
    EXPECT_EQ(c.scene.scatterers[0].dx, 2);
    EXPECT_EQ(c.protocol, Protocol::General);
    EXPECT_EQ(c.noise.mode, NoiseMode::Replace);
    EXPECT_TRUE(c.output.csv);
    EXPECT_FALSE(c.output.pgm);
}

TEST(Config, ApertureDerivesPitch) {
    json doc = smoke();
    doc["geometry"] = {{"transducers", 101}, {"aperture", 2000.0}};
    doc["grid"]["ranges"] = {5000.0};
    EXPECT_DOUBLE_EQ(parse_config(doc.dump()).geometry.pitch, 20.0);
    doc["geometry"]["pitch"] = 19.0;
    expect_config_error(doc, "geometry.aperture");
}

TEST(Config, RejectsInvalidDocuments) {
    json doc = smoke();
    doc["geometry"]["pitchh"] = 1.0;
    expect_config_error(doc, "unknown key");

    doc = smoke();
    doc["noise"]["epsilon"] = {0.0, 1.0};
    expect_config_error(doc, "noise.epsilon");

    doc = smoke();
    doc["scene"]["scatterers"] = json::array({{{"x", 9}}});
    expect_config_error(doc, "outside");

    doc = smoke();
    doc["scene"]["scatterers"] = json::array();
    for (int i = 0; i < 8; ++i)
        doc["scene"]["scatterers"].push_back({{"x", i - 4}});
    expect_config_error(doc, "fewer scatterers");

    doc = smoke();
    doc["scene"]["scatterers"] = json::array({{{"x", 1}}, {{"x", 1}}});
    expect_config_error(doc, "duplicates");

    doc = smoke();
    doc["protocol"] = "paraxial-six";
    doc["grid"]["range_points"] = 3;
    expect_config_error(doc, "flat");

    doc = smoke();
    doc["geometry"]["layout"] = "planar";
    expect_config_error(doc, "square");

    doc = smoke();
    doc["protocol"] = "twelve";
    expect_config_error(doc, "protocol");

    EXPECT_THROW(parse_config("{ not json"), ConfigError);
}

TEST(Config, HashIsStableAndSensitive) {
    const ExperimentConfig a = with_dir(smoke(), "/tmp/a");
    const ExperimentConfig b = with_dir(smoke(), "/tmp/b");
    EXPECT_EQ(config_hash(a), config_hash(b));
    EXPECT_EQ(config_hash(a).size(), 16u);
    json other = smoke();
    other["noise"]["seed"] = 10;
    EXPECT_NE(config_hash(a), config_hash(parse_config(other.dump())));
    EXPECT_EQ(canonical_json(parse_config(canonical_json(a))), canonical_json(a));
}

TEST(Budget, PerProtocol) {
    EXPECT_EQ(illumination_budget(Protocol::General, 101), 301u);
    EXPECT_EQ(illumination_budget(Protocol::Symmetric, 8), 22u);
    EXPECT_EQ(illumination_budget(Protocol::ParaxialSix, 101), 6u);
    EXPECT_EQ(illumination_budget(Protocol::FullPhaseBaseline, 101), 101u);
    EXPECT_EQ(parse_protocol("full-phase-baseline"), Protocol::FullPhaseBaseline);
}

TEST(RunExperiment, SmokeConfigLocalizesExactly) {
    const fs::path dir = scratch("smoke");
    const RunManifest m = run_experiment(with_dir(smoke(), dir));
    ASSERT_EQ(m.cells.size(), 1u);
    EXPECT_TRUE(m.cells[0].exact);
    EXPECT_EQ(m.cells[0].illuminations, 22u);
    EXPECT_EQ(m.failed_cells(), 0u);
    EXPECT_TRUE(fs::exists(dir / "manifest.json"));
    EXPECT_TRUE(fs::exists(dir / "summary.csv"));
    EXPECT_TRUE(fs::exists(dir / "cell_000" / "pseudospectrum.csv"));
    const json report = json::parse(read(dir / "cell_000" / "report.json"));
    EXPECT_TRUE(report["exact"].get<bool>());
    const json manifest = json::parse(read(dir / "manifest.json"));
    EXPECT_EQ(manifest["config_hash"], m.config_hash);
    for (const auto& o : m.outputs)
        EXPECT_TRUE(fs::exists(dir / o)) << o;
}

TEST(RunExperiment, ByteIdenticalAcrossRunsAndThreadCounts) {
    const fs::path a = scratch("det_a");
    const fs::path b = scratch("det_b");
    {
        ThreadsEnv env("1");
        run_experiment(with_dir(sweep(), a));
    }
    {
        ThreadsEnv env("3");
        run_experiment(with_dir(sweep(), b));
    }
    const auto sa = snapshot(a);
    const auto sb = snapshot(b);
    EXPECT_EQ(sa.size(), 2u * 2u * 2u * 5u + 3u);
    EXPECT_EQ(sa, sb);
}

TEST(RunExperiment, CellsUseDistinctSeedsAndRespectBudget) {
    const fs::path dir = scratch("budget");
    for (const char* protocol : {"general", "symmetric", "full-phase-baseline"}) {
        json doc = sweep();
        doc["protocol"] = protocol;
        const RunManifest m = run_experiment(with_dir(doc, dir));
        std::set<std::uint64_t> seeds;
        for (const CellRecord& c : m.cells) {
            seeds.insert(c.seed);
            EXPECT_LE(c.illuminations, m.illumination_budget);
            EXPECT_EQ(c.illuminations, m.illumination_budget);
        }
        EXPECT_EQ(seeds.size(), m.cells.size());
    }
}

TEST(RunExperiment, BaselineParityAtZeroNoise) {
    json doc = sweep();
    doc["noise"] = {{"epsilon", {0.0}}, {"seed", 1}};
    const fs::path g = scratch("parity_general");
    const fs::path b = scratch("parity_baseline");
    run_experiment(with_dir(doc, g));
    doc["protocol"] = "full-phase-baseline";
    run_experiment(with_dir(doc, b));
    for (const char* cell : {"cell_000", "cell_001"}) {
        const json rg = json::parse(read(g / cell / "report.json"));
        const json rb = json::parse(read(b / cell / "report.json"));
        for (const char* key : {"matched", "misses", "ghosts", "mean_nearest_error", "exact", "truth"})
            EXPECT_EQ(rg[key], rb[key]) << cell << " " << key;
        ASSERT_EQ(rg["peaks"].size(), rb["peaks"].size());
        for (std::size_t i = 0; i < rg["peaks"].size(); ++i)
            EXPECT_EQ(rg["peaks"][i]["index"], rb["peaks"][i]["index"]);
        EXPECT_TRUE(rg["exact"].get<bool>());
    }
}

TEST(RunExperiment, ConditioningAbortIsRecordedPerCell) {
    json doc = smoke();
    doc["recovery"] = {{"reference_floor", 0.999999}, {"policy", "abort"}};
    const fs::path dir = scratch("abort");
    const RunManifest m = run_experiment(with_dir(doc, dir));
    EXPECT_EQ(m.failed_cells(), 1u);
    EXPECT_EQ(m.cells[0].status, "conditioning-abort");
    const json report = json::parse(read(dir / "cell_000" / "report.json"));
    EXPECT_TRUE(report.contains("error"));
    EXPECT_FALSE(fs::exists(dir / "cell_000" / "pseudospectrum.csv"));
}

TEST(RunExperiment, ParaxialSixOnFlatScene) {
    json doc = json::parse(R"({
      "geometry": {"transducers": 41, "aperture": 2000.0},
      "grid": {"ranges": [100000.0], "cross_range_points": 41},
      "scene": {"scatterers": [{"x": -8}, {"x": 1}, {"x": 12}], "seed": 5},
      "protocol": "paraxial-six",
      "noise": {"epsilon": [0.0], "seed": 2}
    })");
    const fs::path dir = scratch("six");
    const RunManifest m = run_experiment(with_dir(doc, dir));
    ASSERT_EQ(m.cells.size(), 1u);
    EXPECT_EQ(m.cells[0].illuminations, 6u);
    EXPECT_TRUE(m.cells[0].exact);
}

TEST(WorkerCount, HonoursEnvironment) {
    {
        ThreadsEnv env("2");
        EXPECT_EQ(worker_count(10), 2u);
        EXPECT_EQ(worker_count(1), 1u);
    }
    {
        ThreadsEnv env("zero");
        EXPECT_THROW(worker_count(4), ConfigError);
    }
}

TEST(ShippedConfigs, LoadAndValidate) {
    for (const char* name : {"smoke.json", "range_window.json", "six_illumination.json"}) {
        const ExperimentConfig cfg = load_config(fs::path(PHASELESS_CONFIG_DIR) / name);
        EXPECT_NO_THROW(validate(cfg)) << name;
        EXPECT_FALSE(cfg.scene.scatterers.empty()) << name;
    }
}
