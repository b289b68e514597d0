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

#include "phaseless/phase_recovery.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "phaseless/error.hpp"
#include "phaseless/random.hpp"

namespace phaseless {

namespace {

using RMatrix = Eigen::MatrixXd;

constexpr Complex kI{0.0, 1.0};

CVector unit(std::size_t n, std::size_t i) {
    CVector e = CVector::Zero(static_cast<Eigen::Index>(n));
    e[static_cast<Eigen::Index>(i)] = 1.0;
    return e;
}

void require_size(const IntensityOracle& oracle, std::size_t n) {
    if (n == 0)
        throw PreconditionError("recovery needs at least one transducer");
    if (oracle.size() != n) {
        std::ostringstream os;
        os << "oracle serves " << oracle.size() << " transducers, protocol expects " << n;
        throw PreconditionError(os.str());
    }
}

// Intensities of the 3N - 2 sweep, indexed (receiver k, column j):
// amp2 = |p_kj|^2, sum = |p_k1 + p_kj|^2, mix = |p_k1 - i p_kj|^2.
struct Sweep {
    RMatrix amp2;
    RMatrix sum;
    RMatrix mix;
};

Sweep run_sweep(IntensityOracle& oracle, const IlluminationPlan& plan, std::size_t n) {
    const auto nn = static_cast<Eigen::Index>(n);
    Sweep sw{RMatrix::Zero(nn, nn), RMatrix::Zero(nn, nn), RMatrix::Zero(nn, nn)};
    auto take = [&](std::size_t idx) { return oracle.query(plan.vectors[idx]).intensities; };
    if (plan.kind == PlanKind::General3N) {
        for (Eigen::Index j = 0; j < nn; ++j)
            sw.amp2.col(j) = take(static_cast<std::size_t>(j));
        for (Eigen::Index j = 1; j < nn; ++j) {
            const std::size_t base = n + 2 * static_cast<std::size_t>(j - 1);
            sw.sum.col(j) = take(base);
            sw.mix.col(j) = take(base + 1);
        }
    } else {
        sw.amp2.col(0) = take(0);
        for (Eigen::Index j = 1; j < nn; ++j) {
            const std::size_t base = 1 + 3 * static_cast<std::size_t>(j - 1);
            sw.amp2.col(j) = take(base);
            sw.sum.col(j) = take(base + 1);
            sw.mix.col(j) = take(base + 2);
        }
    }
    return sw;
}

// Row k of the result is e^{-i arg p_k1} p_k.: magnitudes from the unit
// illuminations, phases relative to column 1 from the polarization products.
CMatrix phase_referenced_rows(const Sweep& sw, const RecoveryOptions& options,
                              ConditionReport& report) {
    const Eigen::Index n = sw.amp2.rows();
    CMatrix q(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const double ref = std::sqrt(sw.amp2(k, 0));
        const double row_max = std::sqrt(sw.amp2.row(k).maxCoeff());
        if (row_max > 0.0) {
            const double ratio = ref / row_max;
            report.smallest_reference_ratio = std::min(report.smallest_reference_ratio, ratio);
            if (ratio < options.reference_floor) {
                report.flagged.push_back(static_cast<std::size_t>(k));
                if (options.policy == ConditioningPolicy::Abort) {
                    std::ostringstream os;
                    os << "receiver " << k << ": reference |p_k1| is " << ratio
                       << " of the row maximum, below the floor " << options.reference_floor;
                    throw ConditioningError(os.str(), k);
                }
            }
        }
        q(k, 0) = Complex(ref, 0.0);
        for (Eigen::Index j = 1; j < n; ++j) {
            const double i_a = sw.amp2(k, 0);
            const double i_b = sw.amp2(k, j);
            const Complex z =
                clamp_product(polarization_product(i_a, i_b, sw.sum(k, j), sw.mix(k, j)), i_a, i_b);
            const double mag = std::sqrt(i_b);
            q(k, j) = std::abs(z) > 0.0 ? mag * (z / std::abs(z)) : Complex(mag, 0.0);
        }
    }
    return q;
}

CMatrix hermitian_gram(const CMatrix& q) {
    CMatrix m = q.adjoint() * q;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        m(i, i) = Complex(m(i, i).real(), 0.0);
        for (Eigen::Index j = i + 1; j < m.cols(); ++j)
            m(j, i) = std::conj(m(i, j));
    }
    return m;
}

}  // namespace

std::string_view to_string(PlanKind kind) {
    switch (kind) {
    case PlanKind::General3N: return "general-3n";
    case PlanKind::Symmetric3N: return "symmetric-3n";
    case PlanKind::ParaxialSix: return "paraxial-six";
    }
    return "unknown";
}

std::string_view to_string(OperatorKind kind) {
    switch (kind) {
    case OperatorKind::TimeReversal: return "time-reversal";
    case OperatorKind::ResponseUpToPhase: return "response-up-to-phase";
    case OperatorKind::Hankel: return "hankel";
    }
    return "unknown";
}

IlluminationPlan general_plan(std::size_t n) {
    if (n == 0)
        throw PreconditionError("illumination plan needs at least one transducer");
    IlluminationPlan plan{PlanKind::General3N, {}};
    plan.vectors.reserve(3 * n - 2);
    for (std::size_t j = 0; j < n; ++j)
        plan.vectors.push_back(unit(n, j));
    for (std::size_t j = 1; j < n; ++j) {
        plan.vectors.push_back(unit(n, 0) + unit(n, j));
        plan.vectors.push_back(unit(n, 0) - kI * unit(n, j));
    }
    return plan;
}

IlluminationPlan symmetric_plan(std::size_t n) {
    if (n == 0)
        throw PreconditionError("illumination plan needs at least one transducer");
    IlluminationPlan plan{PlanKind::Symmetric3N, {}};
    plan.vectors.reserve(3 * n - 2);
    plan.vectors.push_back(unit(n, 0));
    for (std::size_t j = 1; j < n; ++j) {
        plan.vectors.push_back(unit(n, j));
        plan.vectors.push_back(unit(n, 0) + unit(n, j));
        plan.vectors.push_back(unit(n, 0) - kI * unit(n, j));
    }
    return plan;
}

IlluminationPlan paraxial_six_plan(const GeometricFactors& factors) {
    const auto n = static_cast<std::size_t>(factors.values.size());
    if (n < 2)
        throw PreconditionError("six-illumination protocol needs at least two transducers");
    const CVector inv = factors.values.cwiseInverse();
    auto scaled = [&](const CVector& v) -> CVector { return inv.cwiseProduct(v); };
    IlluminationPlan plan{PlanKind::ParaxialSix, {}};
    plan.vectors = {
        unit(n, 0),
        scaled(unit(n, 0) + unit(n, 1)),
        scaled(unit(n, 0) + kI * unit(n, 1)),
        unit(n, n - 1),
        scaled(unit(n, n - 1) + unit(n, n - 2)),
        scaled(unit(n, n - 1) + kI * unit(n, n - 2)),
    };
    return plan;
}

IntensityRecord IntensityOracle::query(const CVector& illumination) {
    if (static_cast<std::size_t>(illumination.size()) != size())
        throw PreconditionError("illumination length does not match the array");
    const std::size_t index = count_.fetch_add(1);
    return measure(illumination, index);
}

SimulatedOracle::SimulatedOracle(CMatrix response, NoiseSpec noise)
    : response_(std::move(response)), noise_(noise) {
    if (!(noise_.eps >= 0.0 && noise_.eps < 1.0))
        throw PreconditionError("noise level must satisfy 0 <= eps < 1");
}

IntensityRecord SimulatedOracle::measure(const CVector& illumination, std::size_t index) {
    IntensityRecord rec = measure_intensities(response_, illumination);
    if (noise_.eps > 0.0)
        rec = apply_noise(rec, noise_.eps, mix_seed(noise_.seed, index), noise_.mode);
    return rec;
}

Complex polarization_product(double i_a, double i_b, double i_sum, double i_mix) {
    return {0.5 * (i_sum - i_a - i_b), 0.5 * (i_mix - i_a - i_b)};
}

Complex clamp_product(Complex z, double i_a, double i_b) {
    const double bound = std::sqrt(std::max(i_a, 0.0) * std::max(i_b, 0.0));
    const double mag = std::abs(z);
    if (mag > bound && mag > 0.0)
        return z * (bound / mag);
    return z;
}

RecoveredOperator recover_time_reversal(IntensityOracle& oracle, std::size_t n,
                                        const RecoveryOptions& options) {
    require_size(oracle, n);
    RecoveredOperator out;
    out.kind = OperatorKind::TimeReversal;
    out.phase_convention = "none: M = P^* P is invariant under row phases of P";

    const std::size_t before = oracle.queries();
    const Sweep sw = run_sweep(oracle, general_plan(n), n);
    CMatrix q = phase_referenced_rows(sw, options, out.condition);
    if (options.policy == ConditioningPolicy::Fallback)
        for (std::size_t k : out.condition.flagged)
            q.row(static_cast<Eigen::Index>(k)).setZero();
    out.matrix = hermitian_gram(q);
    out.illuminations = oracle.queries() - before;
    return out;
}

RecoveredOperator recover_response_symmetric(IntensityOracle& oracle, std::size_t n,
                                             const RecoveryOptions& options) {
    require_size(oracle, n);
    RecoveredOperator out;
    out.kind = OperatorKind::ResponseUpToPhase;
    out.phase_convention = "p_11 real nonnegative";

    const std::size_t before = oracle.queries();
    const Sweep sw = run_sweep(oracle, symmetric_plan(n), n);
    const CMatrix q = phase_referenced_rows(sw, options, out.condition);

    // With phi_k = arg p_k1 and p_1k = p_k1, row 1 of q carries phi_k - phi_1.
    const auto nn = static_cast<Eigen::Index>(n);
    CMatrix p(nn, nn);
    for (Eigen::Index k = 0; k < nn; ++k) {
        const Complex r = q(0, k);
        const Complex rotation = (k == 0 || std::abs(r) == 0.0) ? Complex(1.0, 0.0) : r / std::abs(r);
        p.row(k) = rotation * q.row(k);
    }
    if (options.policy == ConditioningPolicy::Fallback && !out.condition.flagged.empty()) {
        std::vector<bool> bad(n, false);
        for (std::size_t k : out.condition.flagged)
            bad[k] = true;
        for (std::size_t k : out.condition.flagged)
            for (Eigen::Index j = 0; j < nn; ++j)
                if (!bad[static_cast<std::size_t>(j)])
                    p(static_cast<Eigen::Index>(k), j) = p(j, static_cast<Eigen::Index>(k));
    }
    p(0, 0) = Complex(p(0, 0).real(), 0.0);
    out.matrix = std::move(p);
    out.illuminations = oracle.queries() - before;
    return out;
}

ParaxialRecovery recover_paraxial_six(IntensityOracle& oracle, const ArrayGeometry& geom,
                                      double range, const RecoveryOptions& options) {
    const std::size_t n = geom.size();
    require_size(oracle, n);
    if (!geom.uniform_linear_layout())
        throw PreconditionError("six-illumination protocol needs a uniform linear array");

    const GeometricFactors factors = geometric_factors(geom, range);
    const IlluminationPlan plan = paraxial_six_plan(factors);
    const std::size_t before = oracle.queries();
    std::vector<RVector> beta;
    beta.reserve(plan.size());
    for (const CVector& f : plan.vectors)
        beta.push_back(oracle.query(f).intensities);

    const auto nn = static_cast<Eigen::Index>(n);
    const RVector c2 = factors.values.cwiseAbs2();
    const Eigen::Index len = 2 * nn - 1;

    // |Xi_m|^2: top-edge unit illumination gives m = 0..N-1, bottom edge the rest.
    RVector mag2(len);
    for (Eigen::Index k = 0; k < nn; ++k)
        mag2[k] = beta[0][k] / (c2[k] * c2[0]);
    for (Eigen::Index k = 1; k < nn; ++k)
        mag2[k + nn - 1] = beta[3][k] / (c2[k] * c2[nn - 1]);

    RVector mag = mag2.cwiseMax(0.0).cwiseSqrt();
    const double peak = mag.maxCoeff();
    ParaxialRecovery out;
    out.hankel.kind = OperatorKind::Hankel;
    out.hankel.phase_convention = "Xi_1 real positive";
    for (Eigen::Index m = 0; m < len; ++m) {
        const double ratio = peak > 0.0 ? mag[m] / peak : 0.0;
        out.hankel.condition.smallest_reference_ratio =
            std::min(out.hankel.condition.smallest_reference_ratio, ratio);
        if (ratio < options.reference_floor) {
            out.hankel.condition.flagged.push_back(static_cast<std::size_t>(m));
            std::ostringstream os;
            os << "broken phase chain: |Xi_" << m + 1 << "| is " << ratio
               << " of the largest skew-diagonal magnitude (floor " << options.reference_floor << ")";
            throw ConditioningError(os.str(), m);
        }
    }

    // |a + i b|^2 = |a|^2 + |b|^2 - 2 Im(conj(a) b), the mirror of |a - i b|^2.
    auto product = [&](double i_a, double i_b, double i_sum, double i_plus) {
        const double i_mix = 2.0 * (i_a + i_b) - i_plus;
        return clamp_product(polarization_product(i_a, i_b, i_sum, i_mix), i_a, i_b);
    };

    RVector phase = RVector::Zero(len);
    // Top edge, left to right: receiver k pairs (Xi_k, Xi_{k+1}).
    for (Eigen::Index m = 1; m < nn; ++m) {
        const Eigen::Index k = m - 1;
        const Complex z = product(mag2[m - 1], mag2[m], beta[1][k] / c2[k], beta[2][k] / c2[k]);
        phase[m] = phase[m - 1] + std::arg(z);
    }
    // Bottom edge, continuing from Xi_N: receiver k pairs (Xi_{k+N-1}, Xi_{k+N-2}).
    for (Eigen::Index m = nn; m < len; ++m) {
        const Eigen::Index k = m - nn + 1;
        const Complex z = product(mag2[m], mag2[m - 1], beta[4][k] / c2[k], beta[5][k] / c2[k]);
        phase[m] = phase[m - 1] - std::arg(z);
    }

    out.skew.resize(len);
    out.skew[0] = Complex(mag[0], 0.0);
    for (Eigen::Index m = 1; m < len; ++m)
        out.skew[m] = std::polar(mag[m], phase[m]);

    out.hankel.matrix = hankel_matrix(out.skew);
    out.hankel.illuminations = oracle.queries() - before;
    out.response.model = ResponseModel::Paraxial;
    out.response.symmetric = true;
    out.response.entries = factors.diagonal() * out.hankel.matrix * factors.diagonal();
    return out;
}

}  // namespace phaseless
