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

#include <filesystem>
#include <string>
#include <vector>

#include "phaseless/forward.hpp"
#include "phaseless/imaging.hpp"
#include "phaseless/phase_recovery.hpp"
#include "phaseless/types.hpp"

namespace phaseless {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

/// Text table with header `row,col,re,im`, one line per entry, row-major.
void export_matrix(const CMatrix& a, const std::filesystem::path& path);
CMatrix import_matrix(const std::filesystem::path& path);

/// Text table with header `illumination_id,transducer,re,im`; every entry of
/// every illumination vector is listed.
void export_plan(const IlluminationPlan& plan, const std::filesystem::path& path);
std::vector<CVector> import_plan(const std::filesystem::path& path);

/// Text table with header `illumination_id,receiver,beta`.
void export_intensities(const std::vector<IntensityRecord>& records,
                        const std::filesystem::path& path);

/// Pseudospectrum as `x_index,z_index,value` (`x_index,y_index,value` for a
/// planar patch).
void export_pseudospectrum_csv(const Pseudospectrum& ps, const std::filesystem::path& path);

/// 8-bit binary PGM, values scaled by the maximum; rows are range (or y).
void export_pseudospectrum_pgm(const Pseudospectrum& ps, const std::filesystem::path& path);

/// Replays recorded intensities. A query must match one of the plan's
/// illumination vectors (relative tolerance 1e-12). Serial only.
class FileOracle final : public IntensityOracle {
public:
    FileOracle(std::vector<CVector> plan, std::vector<RVector> intensities);

    /// Loads a plan file and an intensity file, checking they agree.
    static FileOracle load(const std::filesystem::path& plan_path,
                           const std::filesystem::path& data_path);

    std::size_t size() const override { return size_; }

protected:
    IntensityRecord measure(const CVector& illumination, std::size_t index) override;

private:
    std::vector<CVector> plan_;
    std::vector<RVector> intensities_;
    std::size_t size_;
};

}  // namespace phaseless
