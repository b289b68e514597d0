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

#include "phaseless/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string_view>

#include "phaseless/error.hpp"

namespace phaseless {

namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& path, bool binary = false) {
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
    if (!out)
        throw IoError("cannot open " + path.string() + " for writing");
    return out;
}

void finish(std::ofstream& out, const fs::path& path) {
    out.flush();
    if (!out)
        throw IoError("write failed for " + path.string());
}

// Numeric rows of a comma-separated table after a fixed header.
class Table {
public:
    Table(const fs::path& path, std::string_view header, std::size_t columns)
        : path_(path.string()) {
        std::ifstream in(path);
        if (!in)
            throw IoError("cannot open " + path_);
        std::string line;
        std::size_t lineno = 0;
        bool saw_header = false;
        while (std::getline(in, line)) {
            ++lineno;
            if (!line.empty() && line.back() == '\r')
                line.pop_back();
            if (!saw_header) {
                if (line != header)
                    throw ParseError(path_, lineno, "expected header '" + std::string(header) + "'");
                saw_header = true;
                continue;
            }
            if (line.empty())
                continue;
            rows_.push_back(parse_row(line, lineno, columns));
            lines_.push_back(lineno);
        }
        if (!saw_header)
            throw ParseError(path_, 1, "empty file");
    }

    std::size_t size() const { return rows_.size(); }
    const std::vector<double>& row(std::size_t i) const { return rows_[i]; }
    std::size_t line(std::size_t i) const { return lines_[i]; }
    const std::string& path() const { return path_; }

    std::size_t index_at(std::size_t i, std::size_t col) const {
        const double v = rows_[i][col];
        if (!(v >= 0.0) || v != std::floor(v) || v > 1e12)
            throw ParseError(path_, lines_[i], "column " + std::to_string(col + 1) +
                                                   " must be a nonnegative integer");
        return static_cast<std::size_t>(v);
    }

private:
    std::vector<double> parse_row(const std::string& line, std::size_t lineno,
                                  std::size_t columns) const {
        std::vector<double> values;
        std::string_view rest(line);
        while (true) {
            const std::size_t comma = rest.find(',');
            std::string_view field = rest.substr(0, comma);
            while (!field.empty() && field.front() == ' ')
                field.remove_prefix(1);
            while (!field.empty() && field.back() == ' ')
                field.remove_suffix(1);
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
            if (field.empty() || ec != std::errc() || ptr != field.data() + field.size())
                throw ParseError(path_, lineno, "malformed number '" + std::string(field) + "'");
            values.push_back(v);
            if (comma == std::string_view::npos)
                break;
            rest.remove_prefix(comma + 1);
        }
        if (values.size() != columns)
            throw ParseError(path_, lineno, "expected " + std::to_string(columns) + " fields, got " +
                                                std::to_string(values.size()));
        return values;
    }

    std::string path_;
    std::vector<std::vector<double>> rows_;
    std::vector<std::size_t> lines_;
};

bool same_vector(const CVector& a, const CVector& b) {
    if (a.size() != b.size())
        return false;
    const double scale = std::max({1.0, a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff()});
    return (a - b).cwiseAbs().maxCoeff() <= 1e-12 * scale;
}

}  // namespace

std::string format_double(double value) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    if (ec != std::errc())
        throw IoError("number formatting failed");
    return std::string(buf, ptr);
}

void export_matrix(const CMatrix& a, const fs::path& path) {
    std::ofstream out = open_out(path);
    out << "row,col,re,im\n";
    for (Eigen::Index r = 0; r < a.rows(); ++r)
        for (Eigen::Index c = 0; c < a.cols(); ++c)
            out << r << ',' << c << ',' << format_double(a(r, c).real()) << ','
                << format_double(a(r, c).imag()) << '\n';
    finish(out, path);
}

CMatrix import_matrix(const fs::path& path) {
    const Table t(path, "row,col,re,im", 4);
    if (t.size() == 0)
        throw ParseError(t.path(), 2, "matrix file has no entries");
    std::size_t rows = 0, cols = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        rows = std::max(rows, t.index_at(i, 0) + 1);
        cols = std::max(cols, t.index_at(i, 1) + 1);
    }
    if (rows * cols != t.size())
        throw ParseError(t.path(), 0, "matrix entries do not fill a " + std::to_string(rows) + "x" +
                                          std::to_string(cols) + " matrix");
    CMatrix a(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    std::vector<bool> seen(rows * cols, false);
    for (std::size_t i = 0; i < t.size(); ++i) {
        const std::size_t r = t.index_at(i, 0);
        const std::size_t c = t.index_at(i, 1);
        if (seen[r * cols + c])
            throw ParseError(t.path(), t.line(i), "duplicate matrix entry");
        seen[r * cols + c] = true;
        a(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = {t.row(i)[2], t.row(i)[3]};
    }
    return a;
}

void export_plan(const IlluminationPlan& plan, const fs::path& path) {
    std::ofstream out = open_out(path);
    out << "illumination_id,transducer,re,im\n";
    for (std::size_t id = 0; id < plan.vectors.size(); ++id) {
        const CVector& f = plan.vectors[id];
        for (Eigen::Index t = 0; t < f.size(); ++t)
            out << id << ',' << t << ',' << format_double(f[t].real()) << ','
                << format_double(f[t].imag()) << '\n';
    }
    finish(out, path);
}

std::vector<CVector> import_plan(const fs::path& path) {
    const Table t(path, "illumination_id,transducer,re,im", 4);
    if (t.size() == 0)
        throw ParseError(t.path(), 2, "plan file has no illuminations");
    std::map<std::size_t, std::map<std::size_t, Complex>> entries;
    for (std::size_t i = 0; i < t.size(); ++i) {
        auto& vec = entries[t.index_at(i, 0)];
        if (!vec.emplace(t.index_at(i, 1), Complex(t.row(i)[2], t.row(i)[3])).second)
            throw ParseError(t.path(), t.line(i), "duplicate plan entry");
    }
    const std::size_t n = entries.begin()->second.size();
    std::vector<CVector> plan;
    std::size_t expected_id = 0;
    for (const auto& [id, vec] : entries) {
        if (id != expected_id++)
            throw ConsistencyError(t.path() + ": illumination ids must run 0, 1, 2, ...");
        if (vec.size() != n || vec.rbegin()->first != n - 1)
            throw ConsistencyError(t.path() + ": illumination " + std::to_string(id) +
                                   " does not list transducers 0.." + std::to_string(n - 1));
        CVector f(static_cast<Eigen::Index>(n));
        for (const auto& [tr, value] : vec)
            f[static_cast<Eigen::Index>(tr)] = value;
        plan.push_back(std::move(f));
    }
    return plan;
}

void export_intensities(const std::vector<IntensityRecord>& records, const fs::path& path) {
    std::ofstream out = open_out(path);
    out << "illumination_id,receiver,beta\n";
    for (std::size_t id = 0; id < records.size(); ++id) {
        const RVector& b = records[id].intensities;
        for (Eigen::Index r = 0; r < b.size(); ++r)
            out << id << ',' << r << ',' << format_double(b[r]) << '\n';
    }
    finish(out, path);
}

void export_pseudospectrum_csv(const Pseudospectrum& ps, const fs::path& path) {
    std::ofstream out = open_out(path);
    const bool planar = ps.shape.ny > 1;
    out << (planar ? "x_index,y_index,value\n" : "x_index,z_index,value\n");
    const std::size_t nx = ps.shape.nx;
    const std::size_t ny = ps.shape.ny;
    for (std::size_t k = 0; k < ps.shape.size(); ++k) {
        const std::size_t ix = k % nx;
        const std::size_t second = planar ? (k / nx) % ny : k / (nx * ny);
        out << ix << ',' << second << ',' << format_double(ps.values[static_cast<Eigen::Index>(k)])
            << '\n';
    }
    finish(out, path);
}

void export_pseudospectrum_pgm(const Pseudospectrum& ps, const fs::path& path) {
    std::ofstream out = open_out(path, true);
    const std::size_t width = ps.shape.nx;
    const std::size_t height = ps.shape.size() / width;
    out << "P5\n" << width << ' ' << height << "\n255\n";
    const double peak = ps.values.size() > 0 ? ps.values.maxCoeff() : 0.0;
    for (Eigen::Index k = 0; k < ps.values.size(); ++k) {
        const double scaled = peak > 0.0 ? ps.values[k] / peak : 0.0;
        out.put(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * std::clamp(scaled, 0.0, 1.0)))));
    }
    finish(out, path);
}

FileOracle::FileOracle(std::vector<CVector> plan, std::vector<RVector> intensities)
    : plan_(std::move(plan)), intensities_(std::move(intensities)), size_(0) {
    if (plan_.empty())
        throw ConsistencyError("file oracle needs a nonempty plan");
    if (plan_.size() != intensities_.size())
        throw ConsistencyError("plan and intensity data list different numbers of illuminations");
    size_ = static_cast<std::size_t>(plan_.front().size());
    for (std::size_t i = 0; i < plan_.size(); ++i) {
        if (static_cast<std::size_t>(plan_[i].size()) != size_ ||
            static_cast<std::size_t>(intensities_[i].size()) != size_)
            throw ConsistencyError("illumination " + std::to_string(i) +
                                   " does not match the array size");
    }
}

FileOracle FileOracle::load(const fs::path& plan_path, const fs::path& data_path) {
    std::vector<CVector> plan = import_plan(plan_path);
    const auto n = static_cast<Eigen::Index>(plan.front().size());

    const Table t(data_path, "illumination_id,receiver,beta", 3);
    if (t.size() == 0)
        throw ParseError(t.path(), 2, "intensity file has no rows");
    std::vector<RVector> data(plan.size(), RVector::Constant(n, std::nan("")));
    for (std::size_t i = 0; i < t.size(); ++i) {
        const std::size_t id = t.index_at(i, 0);
        const std::size_t r = t.index_at(i, 1);
        const double beta = t.row(i)[2];
        if (id >= plan.size())
            throw ConsistencyError(t.path() + ":" + std::to_string(t.line(i)) + ": illumination " +
                                   std::to_string(id) + " is not in the plan");
        if (r >= static_cast<std::size_t>(n))
            throw ConsistencyError(t.path() + ":" + std::to_string(t.line(i)) + ": receiver " +
                                   std::to_string(r) + " exceeds the array size");
        if (!(beta >= 0.0) || !std::isfinite(beta))
            throw ParseError(t.path(), t.line(i), "intensity must be finite and nonnegative");
        auto& slot = data[id][static_cast<Eigen::Index>(r)];
        if (!std::isnan(slot))
            throw ParseError(t.path(), t.line(i), "duplicate intensity entry");
        slot = beta;
    }
    for (std::size_t id = 0; id < data.size(); ++id)
        if (data[id].hasNaN())
            throw ConsistencyError(t.path() + ": illumination " + std::to_string(id) +
                                   " is missing receivers");
    return FileOracle(std::move(plan), std::move(data));
}

IntensityRecord FileOracle::measure(const CVector& illumination, std::size_t) {
    for (std::size_t i = 0; i < plan_.size(); ++i) {
        if (same_vector(plan_[i], illumination))
            return IntensityRecord{illumination, intensities_[i], 0.0};
    }
    throw ConsistencyError("queried illumination is not declared in the plan file");
}

}  // namespace phaseless
