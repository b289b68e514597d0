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

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

using namespace std::string_literals;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::path(testing::TempDir()) / "phaseless_cli" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write(const fs::path& path, const std::string& text) {
    std::ofstream(path, std::ios::binary) << text;
}

std::string read(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

int run(const std::string& args) {
    const std::string cmd = std::string(IMAGER_PATH) + " " + args + " 2>/dev/null";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const char* kSmoke = R"({
  "geometry": {"transducers": 8, "pitch": 2.0},
  "grid": {"ranges": [60.0], "cross_range_points": 16},
  "scene": {"scatterers": [{"x": 2}], "seed": 1},
  "noise": {"epsilon": [0.0], "seed": 9}
})";

}  // namespace

TEST(Cli, ExperimentSucceeds) {
    const fs::path dir = scratch("ok");
    write(dir / "smoke.json", kSmoke);
    EXPECT_EQ(run("experiment --config " + (dir / "smoke.json").string() + " --out " +
                  (dir / "out").string() + " --format pgm"),
              0);
    EXPECT_TRUE(fs::exists(dir / "out" / "cell_000" / "pseudospectrum.pgm"));
    EXPECT_FALSE(fs::exists(dir / "out" / "cell_000" / "pseudospectrum.csv"));
}

TEST(Cli, ConfigErrorExitsTwo) {
    const fs::path dir = scratch("config");
    write(dir / "bad.json", R"({"noise": {"epsilon": 1.5}})");
    EXPECT_EQ(run("experiment --config " + (dir / "bad.json").string()), 2);
    write(dir / "smoke.json", kSmoke);
    EXPECT_EQ(run("experiment --config " + (dir / "smoke.json").string() + " --epsilon 2"), 2);
    EXPECT_EQ(run("experiment --config " + (dir / "smoke.json").string() + " --protocol nope"), 2);
    EXPECT_EQ(run("frobnicate"), 2);
    EXPECT_EQ(run("experiment"), 2);
}

TEST(Cli, ConditioningAbortExitsThree) {
    const fs::path dir = scratch("abort");
    std::string cfg = kSmoke;
    cfg.insert(cfg.rfind('}'), R"(, "recovery": {"reference_floor": 0.999999, "policy": "abort"})");
    write(dir / "abort.json", cfg);
    EXPECT_EQ(run("experiment --config " + (dir / "abort.json").string() + " --out " +
                  (dir / "out").string()),
              3);
    EXPECT_EQ(run("recover --config " + (dir / "abort.json").string() + " --out " +
                  (dir / "rec").string()),
              3);
}

TEST(Cli, IoErrorExitsFour) {
    const fs::path dir = scratch("io");
    EXPECT_EQ(run("experiment --config " + (dir / "missing.json").string()), 4);
    write(dir / "smoke.json", kSmoke);
    write(dir / "empty.csv", "");
    EXPECT_EQ(run("image --config " + (dir / "smoke.json").string() + " --matrix " +
                  (dir / "empty.csv").string() + " --out " + (dir / "img").string()),
              4);
}

TEST(Cli, SimulateRecoverImageRoundTrip) {
    const fs::path dir = scratch("pipeline");
    write(dir / "smoke.json", kSmoke);
    const std::string cfg = " --config " + (dir / "smoke.json").string();
    ASSERT_EQ(run("simulate" + cfg + " --epsilon 0.05 --out " + (dir / "sim").string()), 0);
    for (const char* f : {"response.csv", "plan.csv", "intensities.csv", "scene.json"})
        EXPECT_TRUE(fs::exists(dir / "sim" / f)) << f;

    ASSERT_EQ(run("recover --plan " + (dir / "sim" / "plan.csv").string() + " --intensities " +
                  (dir / "sim" / "intensities.csv").string() + " --out " + (dir / "replay").string()),
              0);
    ASSERT_EQ(run("recover" + cfg + " --epsilon 0.05 --out " + (dir / "live").string()), 0);
    EXPECT_EQ(read(dir / "replay" / "operator.csv"), read(dir / "live" / "operator.csv"));

    ASSERT_EQ(run("image" + cfg + " --matrix " + (dir / "sim" / "response.csv").string() +
                  " --out " + (dir / "img").string()),
              0);
    EXPECT_NE(read(dir / "img" / "report.json").find("\"exact\": true"), std::string::npos);
}

TEST(Cli, ImageRejectsWrongSize) {
    const fs::path dir = scratch("size");
    write(dir / "smoke.json", kSmoke);
    write(dir / "m.csv", "row,col,re,im\n0,0,1,0\n");
    EXPECT_EQ(run("image --config " + (dir / "smoke.json").string() + " --matrix " +
                  (dir / "m.csv").string() + " --out " + (dir / "img").string()),
              2);
}
