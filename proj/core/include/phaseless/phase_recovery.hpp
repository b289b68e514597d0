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

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "phaseless/forward.hpp"
#include "phaseless/geometry.hpp"
#include "phaseless/types.hpp"

namespace phaseless {

enum class PlanKind { General3N, Symmetric3N, ParaxialSix };

std::string_view to_string(PlanKind kind);

/// Ordered list of illumination vectors for one recovery protocol.
struct IlluminationPlan {
    PlanKind kind = PlanKind::General3N;
    std::vector<CVector> vectors;

    std::size_t size() const noexcept { return vectors.size(); }
};

/// e_1, ..., e_N, then e_1 + e_j and e_1 - i e_j for j = 2..N (3N - 2 vectors).
IlluminationPlan general_plan(std::size_t n);

/// The same 3N - 2 vectors in sweep order: e_1, then e_j, e_1 + e_j,
/// e_1 - i e_j for j = 2..N.
IlluminationPlan symmetric_plan(std::size_t n);

/// e_1, D^-1(e_1 + e_2), D^-1(e_1 + i e_2), e_N, D^-1(e_N + e_{N-1}),
/// D^-1(e_N + i e_{N-1}) with D = diag(C).
IlluminationPlan paraxial_six_plan(const GeometricFactors& factors);

/// Source of intensity-only measurements. Counts every query.
class IntensityOracle {
public:
    virtual ~IntensityOracle() = default;

    /// Number of transducers (length of illumination and intensity vectors).
    virtual std::size_t size() const = 0;

    /// True when `query` may be called from several threads at once.
    virtual bool concurrent_safe() const { return false; }

    IntensityRecord query(const CVector& illumination);

    std::size_t queries() const noexcept { return count_.load(); }

protected:
    /// `index` is the zero-based position of this query in the oracle's
    /// lifetime.
    virtual IntensityRecord measure(const CVector& illumination, std::size_t index) = 0;

private:
    std::atomic<std::size_t> count_{0};
};

struct NoiseSpec {
    double eps = 0.0;
    std::uint64_t seed = 0;
    NoiseMode mode = NoiseMode::Replace;
};

/// Oracle backed by a known response matrix. Query i draws its noise from
/// a stream seeded by mix_seed(seed, i), so a fixed query order gives
/// reproducible data.
class SimulatedOracle final : public IntensityOracle {
public:
    explicit SimulatedOracle(CMatrix response, NoiseSpec noise = {});

    std::size_t size() const override { return static_cast<std::size_t>(response_.cols()); }
    bool concurrent_safe() const override { return true; }
    const CMatrix& response() const noexcept { return response_; }

protected:
    IntensityRecord measure(const CVector& illumination, std::size_t index) override;

private:
    CMatrix response_;
    NoiseSpec noise_;
};

/// Returns z = conj(a) b from I_a = |a|^2, I_b = |b|^2, I_sum = |a + b|^2 and
/// I_mix = |a - i b|^2.
Complex polarization_product(double i_a, double i_b, double i_sum, double i_mix);

/// Scales z down to magnitude sqrt(i_a i_b) when noise pushed it above.
Complex clamp_product(Complex z, double i_a, double i_b);

enum class OperatorKind { TimeReversal, ResponseUpToPhase, Hankel };

std::string_view to_string(OperatorKind kind);

/// What the reference magnitudes looked like during phase chaining.
struct ConditionReport {
    /// min over chains of |reference| / (largest magnitude in that chain).
    double smallest_reference_ratio = 1.0;
    /// Receivers (or skew-diagonal indices) whose reference fell below the floor.
    std::vector<std::size_t> flagged;
};

struct RecoveredOperator {
    CMatrix matrix;
    OperatorKind kind = OperatorKind::TimeReversal;
    std::string phase_convention;
    ConditionReport condition;
    std::size_t illuminations = 0;
};

enum class ConditioningPolicy {
    /// Record flagged references and keep going.
    Report,
    /// General protocol: leave flagged receivers out of M. Symmetric
    /// protocol: rebuild flagged rows from their transposed columns.
    Fallback,
    /// Throw ConditioningError on the first flagged reference.
    Abort,
};

struct RecoveryOptions {
    /// Relative floor on reference magnitudes (per receiver row, or over
    /// the skew-diagonal for the six-illumination protocol).
    double reference_floor = 1e-8;
    ConditioningPolicy policy = ConditioningPolicy::Report;
};

/// Time-reversal matrix M = P^* P from the 3N - 2 general illuminations.
RecoveredOperator recover_time_reversal(IntensityOracle& oracle, std::size_t n,
                                        const RecoveryOptions& options = {});

/// Symmetric P up to a global phase (p_11 made real nonnegative) from the
/// 3N - 2 sweep illuminations.
RecoveredOperator recover_response_symmetric(IntensityOracle& oracle, std::size_t n,
                                             const RecoveryOptions& options = {});

struct ParaxialRecovery {
    RecoveredOperator hankel;  // H^ built from the recovered skew-diagonals
    ResponseMatrix response;   // P^ = D H^ D
    CVector skew;              // recovered skew-diagonals, skew[0] real positive
};

/// Hankel recovery from six illuminations for a uniform linear array and a
/// flat scene at known range. Throws ConditioningError (with the skew index)
/// when a skew-diagonal magnitude falls below the floor.
ParaxialRecovery recover_paraxial_six(IntensityOracle& oracle, const ArrayGeometry& geom,
                                      double range, const RecoveryOptions& options = {});

}  // namespace phaseless
