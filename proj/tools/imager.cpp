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

// imager: simulate, recover and image from intensity-only array data.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "phaseless/error.hpp"
#include "phaseless/experiment.hpp"
#include "phaseless/io.hpp"
#include "phaseless/random.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace phaseless;

namespace {

enum Exit { kOk = 0, kFailure = 1, kConfig = 2, kConditioning = 3, kIo = 4 };

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string protocol;
    std::optional<double> epsilon;
    std::string format;
};

void add_common(CLI::App* cmd, Common& c, bool config_required) {
    auto* opt = cmd->add_option("--config", c.config, "experiment configuration (JSON)");
    if (config_required)
        opt->required();
    cmd->add_option("--seed", c.seed, "master noise seed (overrides noise.seed)");
    cmd->add_option("--out", c.out, "output directory");
    cmd->add_option("--protocol", c.protocol,
                    "general, symmetric, paraxial-six or full-phase-baseline");
    cmd->add_option("--epsilon", c.epsilon, "noise level in [0, 1)");
    cmd->add_option("--format", c.format, "pseudospectrum format")
        ->check(CLI::IsMember({"csv", "pgm"}));
}

ExperimentConfig resolve(const Common& c) {
    ExperimentConfig cfg = c.config.empty() ? ExperimentConfig{} : load_config(c.config);
    if (c.seed)
        cfg.noise.seed = *c.seed;
    if (!c.out.empty())
        cfg.output.directory = c.out;
    if (!c.protocol.empty())
        cfg.protocol = parse_protocol(c.protocol);
    if (c.epsilon)
        cfg.noise.epsilons = {*c.epsilon};
    if (!c.format.empty()) {
        cfg.output.csv = c.format == "csv";
        cfg.output.pgm = c.format == "pgm";
    }
    if (!c.config.empty())
        validate(cfg);
    else if (c.epsilon && !(*c.epsilon >= 0.0 && *c.epsilon < 1.0))
        throw ConfigError("noise.epsilon: must lie in [0, 1)");
    return cfg;
}

void write_json(const fs::path& path, const json& doc) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot open " + path.string() + " for writing");
    out << doc.dump(2) << '\n';
}

json scene_json(const Setup& setup) {
    json list = json::array();
    for (std::size_t k : setup.scene.support()) {
        const auto [ix, iy, iz] = setup.grid.coords(k);
        const Complex a = setup.scene.reflectivity()[static_cast<Eigen::Index>(k)];
        list.push_back({{"index", k}, {"ix", ix}, {"iy", iy}, {"iz", iz},
                        {"reflectivity", {a.real(), a.imag()}}});
    }
    return {{"range", setup.grid.range()},
            {"grid", {setup.grid.shape().nx, setup.grid.shape().ny, setup.grid.shape().nz}},
            {"scatterers", list}};
}

NoiseSpec cell_noise(const ExperimentConfig& cfg) {
    return NoiseSpec{cfg.noise.epsilons.front(), mix_seed(cfg.noise.seed, 0), cfg.noise.mode};
}

int cmd_simulate(const Common& c) {
    const ExperimentConfig cfg = resolve(c);
    const Setup setup = build_setup(cfg, cfg.grid.ranges.front());
    const fs::path out = cfg.output.directory;
    export_matrix(setup.response.entries, out / "response.csv");
    const IlluminationPlan plan = plan_for(cfg.protocol, setup);
    SimulatedOracle oracle(setup.response.entries, cell_noise(cfg));
    std::vector<IntensityRecord> records;
    for (const CVector& f : plan.vectors)
        records.push_back(oracle.query(f));
    export_plan(plan, out / "plan.csv");
    export_intensities(records, out / "intensities.csv");
    write_json(out / "scene.json", scene_json(setup));
    std::cerr << "simulate: " << records.size() << " illuminations written to " << out << '\n';
    return kOk;
}

int cmd_recover(const Common& c, const std::string& plan_path, const std::string& data_path) {
    if (plan_path.empty() != data_path.empty())
        throw ConfigError("--plan and --intensities must be given together");
    const bool imported = !plan_path.empty();
    if (!imported && c.config.empty())
        throw ConfigError("recover needs --config, or --plan with --intensities");

    ExperimentConfig cfg = resolve(c);
    if (cfg.protocol == Protocol::FullPhaseBaseline)
        throw ConfigError("protocol: full-phase-baseline does not recover anything");

    std::unique_ptr<FileOracle> file;
    std::optional<SimulatedOracle> live;
    std::optional<Setup> setup;
    if (imported) {
        file.reset(new FileOracle(FileOracle::load(plan_path, data_path)));
        if (c.config.empty())
            cfg.geometry.transducers = file->size();
    }
    if (!c.config.empty() || cfg.protocol == Protocol::ParaxialSix) {
        if (c.config.empty())
            throw ConfigError("paraxial-six recovery needs --config for the geometry and range");
        setup.emplace(build_setup(cfg, cfg.grid.ranges.front()));
    }
    if (!imported)
        live.emplace(setup->response.entries, cell_noise(cfg));
    IntensityOracle& oracle = imported ? static_cast<IntensityOracle&>(*file) : *live;

    ProtocolResult result;
    if (setup) {
        result = run_protocol(cfg.protocol, oracle, *setup, cfg.recovery);
    } else {
        const std::size_t n = oracle.size();
        const RecoveredOperator op = cfg.protocol == Protocol::General
                                         ? recover_time_reversal(oracle, n, cfg.recovery)
                                         : recover_response_symmetric(oracle, n, cfg.recovery);
        result = {op.matrix, op.illuminations, std::string(to_string(op.kind)), op.condition};
    }

    const fs::path out = cfg.output.directory;
    export_matrix(result.matrix, out / "operator.csv");
    write_json(out / "recovery.json",
               {{"protocol", std::string(to_string(cfg.protocol))},
                {"operator", result.operator_kind},
                {"illuminations", result.illuminations},
                {"source", imported ? "file" : "simulated"},
                {"condition",
                 {{"smallest_reference_ratio", result.condition.smallest_reference_ratio},
                  {"flagged", result.condition.flagged}}}});
    std::cerr << "recover: " << result.illuminations << " illuminations, operator written to "
              << out / "operator.csv" << '\n';
    return kOk;
}

int cmd_image(const Common& c, const std::string& matrix_path) {
    const ExperimentConfig cfg = resolve(c);
    const Setup setup = build_setup(cfg, cfg.grid.ranges.front());
    const CMatrix op = import_matrix(matrix_path);
    const auto n = static_cast<Eigen::Index>(setup.geometry.size());
    if (op.rows() != n || op.cols() != n)
        throw PreconditionError("matrix is " + std::to_string(op.rows()) + "x" +
                                std::to_string(op.cols()) + ", the array has " +
                                std::to_string(n) + " transducers");
    const ImageResult image =
        image_operator(op, setup.geometry, setup.grid, setup.scene, cfg.imaging);

    const fs::path out = cfg.output.directory;
    if (cfg.output.csv)
        export_pseudospectrum_csv(image.spectrum, out / "pseudospectrum.csv");
    if (cfg.output.pgm)
        export_pseudospectrum_pgm(image.spectrum, out / "pseudospectrum.pgm");
    json peaks = json::array();
    for (std::size_t k : image.peaks.indices) {
        const auto [ix, iy, iz] = setup.grid.coords(k);
        peaks.push_back({{"index", k}, {"ix", ix}, {"iy", iy}, {"iz", iz},
                         {"value", image.spectrum.values[static_cast<Eigen::Index>(k)]}});
    }
    write_json(out / "report.json",
               {{"rank", image.split.rank},
                {"peaks", peaks},
                {"misses", image.report.misses},
                {"ghosts", image.report.ghosts},
                {"mean_nearest_error", image.report.mean_nearest_error},
                {"exact", image.report.exact()}});
    std::cerr << "image: " << image.peaks.indices.size() << " peaks, "
              << (image.report.exact() ? "exact" : "not exact") << '\n';
    return kOk;
}

int cmd_experiment(const Common& c) {
    const ExperimentConfig cfg = resolve(c);
    const RunManifest m = run_experiment(cfg);
    std::size_t exact = 0;
    for (const CellRecord& cell : m.cells)
        exact += cell.exact ? 1 : 0;
    std::cerr << "experiment " << m.config_hash << ": " << m.cells.size() << " cells, " << exact
              << " exact, " << m.failed_cells() << " aborted, " << m.wall_time.count() << " s\n";
    return m.failed_cells() > 0 ? kConditioning : kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Active array imaging from intensity-only measurements"};
    app.require_subcommand(1);

    Common sim_opts, rec_opts, img_opts, exp_opts;
    std::string plan_path, data_path, matrix_path;

    auto* sim = app.add_subcommand("simulate", "write the response matrix, plan and intensities");
    add_common(sim, sim_opts, true);
    auto* rec = app.add_subcommand("recover", "run a phase-recovery protocol");
    add_common(rec, rec_opts, false);
    rec->add_option("--plan", plan_path, "plan file to replay");
    rec->add_option("--intensities", data_path, "intensity file to replay");
    auto* img = app.add_subcommand("image", "MUSIC pseudospectrum of a stored matrix");
    add_common(img, img_opts, true);
    img->add_option("--matrix", matrix_path, "matrix file (row,col,re,im)")->required();
    auto* exp = app.add_subcommand("experiment", "run a full sweep from a configuration");
    add_common(exp, exp_opts, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }

    try {
        if (*sim)
            return cmd_simulate(sim_opts);
        if (*rec)
            return cmd_recover(rec_opts, plan_path, data_path);
        if (*img)
            return cmd_image(img_opts, matrix_path);
        return cmd_experiment(exp_opts);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const PreconditionError& e) {
        std::cerr << "precondition error: " << e.what() << '\n';
        return kConfig;
    } catch (const DomainError& e) {
        std::cerr << "domain error: " << e.what() << '\n';
        return kConfig;
    } catch (const ConditioningError& e) {
        std::cerr << "conditioning abort: " << e.what() << '\n';
        return kConditioning;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return kIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kFailure;
    }
}
