// Copyright 2026 The gipeps Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Vertex-by-vertex preparation by forward measurements of {P_t+1, 1-P_t+1}
// with rewinding through {P_t, 1-P_t}, plus the closed-form analysis of one
// step: starting from psi = Sum_k c_k r_k in range(P_t), the probability that
// the first forward measurement and all m following (rewind, forward) rounds
// fail is
//
//     p_fail(m) = Sum_k |c_k|^2 (1 - d_k) (1 - 2 d_k (1 - d_k))^m
//              <= 1 / (2 d_min m).

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "gipeps/error.hpp"
#include "gipeps/lattice.hpp"
#include "gipeps/rng.hpp"
#include "gipeps/spectral.hpp"
#include "gipeps/tensors.hpp"

namespace gipeps {

/// Per-step repetition cap m = ceil(N kappa^2 / (2 eps)).
inline std::int64_t estimate_repetitions(int n_vertices, double kappa_g, double epsilon) {
    if (!(epsilon > 0.0 && epsilon < 1.0))
        throw Error(ErrorCode::InvalidEpsilon, "epsilon must lie in (0, 1), got " + std::to_string(epsilon));
    if (n_vertices < 1) throw Error(ErrorCode::InvalidConfig, "need at least one vertex");
    if (!(kappa_g >= 1.0)) throw Error(ErrorCode::InvalidKappa, "kappa must be >= 1");
    return static_cast<std::int64_t>(std::ceil(n_vertices * kappa_g * kappa_g / (2.0 * epsilon)));
}

inline double analytic_pfail(const std::vector<double> &weights, const std::vector<double> &overlaps, std::int64_t m,
                             double tol = 1e-10) {
    if (weights.size() != overlaps.size()) throw Error(ErrorCode::DimensionMismatch, "one weight per block");
    double total = 0.0;
    for (double w : weights) total += w;
    if (std::abs(total - 1.0) > tol)
        throw Error(ErrorCode::UnnormalizedWeights, "weights sum to " + std::to_string(total));
    double p = 0.0;
    for (size_t k = 0; k < weights.size(); ++k) {
        const double d = overlaps[k];
        if (d < -tol || d > 1.0 + tol) throw Error(ErrorCode::InvalidConfig, "overlap outside [0, 1]");
        p += weights[k] * (1.0 - d) * std::pow(1.0 - 2.0 * d * (1.0 - d), static_cast<double>(m));
    }
    return p;
}

inline double failure_bound(double d_min, std::int64_t m) { return 1.0 / (2.0 * d_min * static_cast<double>(m)); }

struct FailureCurve {
    std::vector<double> overlaps;  // d_k of the occupied blocks
    std::vector<double> weights;   // |c_k|^2, summing to 1
    double d_min = 0.0;            // over occupied blocks
    int dark_blocks = 0;           // occupied blocks with d_k <= 1e-12
    std::vector<double> values;    // p_fail(m), m = 1..M
    std::vector<double> bound;     // 1 / (2 d_min m)
};

/// Block weights |<r_k|psi>|^2 of a state in range(P_t), with the overlap of each block.
inline void block_weights(const JordanSpectrum &js, const Vector &psi, std::vector<double> &weights,
                          std::vector<double> &overlaps, double occupied_tol = 1e-14) {
    const Vector c = js.r_vectors.adjoint() * psi;
    weights.clear();
    overlaps.clear();
    for (Eigen::Index k = 0; k < c.size(); ++k) {
        const double w = std::norm(c(k));
        if (w <= occupied_tol) continue;
        weights.push_back(w);
        overlaps.push_back(js.overlap(static_cast<int>(k)));
    }
}

inline FailureCurve failure_curve(const GroundProjector &pt, const GroundProjector &pnext, const Vector &psi,
                                  int max_m) {
    const double in_weight = pt.weight(psi) / psi.squaredNorm();
    if (in_weight < 1.0 - 1e-10)
        throw Error(ErrorCode::StateOutsideProjector, "|P_t psi|^2 = " + std::to_string(in_weight));
    const JordanSpectrum js = jordan_decompose(pt, pnext);
    FailureCurve fc;
    block_weights(js, psi / psi.norm(), fc.weights, fc.overlaps);
    double total = 0.0;
    for (double w : fc.weights) total += w;
    for (double &w : fc.weights) w /= total;

    bool any = false;
    for (double d : fc.overlaps) {
        if (d <= 1e-12) {
            ++fc.dark_blocks;
            continue;
        }
        fc.d_min = any ? std::min(fc.d_min, d) : d;
        any = true;
    }
    for (int m = 1; m <= max_m; ++m) {
        fc.values.push_back(analytic_pfail(fc.weights, fc.overlaps, m));
        fc.bound.push_back(fc.d_min > 0.0 ? failure_bound(fc.d_min, m) : INFINITY);
    }
    return fc;
}

/// Builds P_t and P_t+1 from the lattice data, then evaluates the curve.
inline FailureCurve failure_curve(const TorusLattice &lat, const SiteTensor &tensor,
                                  const std::vector<Deformation> &deformations, int t, const Vector &psi, int max_m) {
    const auto pt = ground_projector(lat, tensor, deformations, t);
    const auto pn = ground_projector(lat, tensor, deformations, t + 1);
    return failure_curve(pt, pn, psi, max_m);
}

/// Exact single-step channel on block coherences: the unnormalized
/// post-success state (within the step's m-round cap) is
///   Sum_{jk} T_jk rho_jk |q_j><q_k|,
///   T_jk = c_j c_k + 2 s_j^2 c_j s_k^2 c_k Sum_{i<m} f_jk^i,
///   f_jk = (1-d_j)(1-d_k) + d_j d_k,  c = sqrt(d), s = sqrt(1-d),
/// where rho_jk are the coefficients of the pre-step state in the r basis.
/// rho is given and returned in the coordinates of the respective projector bases.
inline Matrix step_success_channel(const JordanSpectrum &js, const Matrix &basis_t, const Matrix &basis_next,
                                   const Matrix &rho_t, std::int64_t m) {
    const Matrix u = basis_t.adjoint() * js.r_vectors;      // p x p, unitary
    const Matrix v = basis_next.adjoint() * js.q_vectors;   // q x q, unitary
    const Matrix rho_r = u.adjoint() * rho_t * u;
    const int k = js.blocks();
    Matrix rho_q = Matrix::Zero(v.rows(), v.rows());
    for (int a = 0; a < k; ++a) {
        for (int b = 0; b < k; ++b) {
            const double da = js.overlaps[a], db = js.overlaps[b];
            const double ca = std::sqrt(da), sa = std::sqrt(1.0 - da);
            const double cb = std::sqrt(db), sb = std::sqrt(1.0 - db);
            const double f = (1.0 - da) * (1.0 - db) + da * db;
            double geo;
            if (std::abs(1.0 - f) < 1e-15) {
                geo = static_cast<double>(m);
            } else {
                geo = (1.0 - std::pow(f, static_cast<double>(m))) / (1.0 - f);
            }
            const double tr = ca * cb + 2.0 * sa * sa * ca * sb * sb * cb * geo;
            rho_q(a, b) = tr * rho_r(a, b);
        }
    }
    return v * rho_q * v.adjoint();
}

struct ProtocolConfig {
    TorusLattice lattice;
    SiteTensor tensor;
    std::vector<Deformation> deformations;  // one per vertex, in growth order
    double epsilon = 0.1;
    std::optional<std::int64_t> m;          // nullopt: estimate_repetitions
    std::uint64_t seed = 0;
    bool check_rewind_structure = true;
    double rank_tol = 1e-10;                // ground-space rank cut, relative to sigma_max
};

struct StepRecord {
    int step = 0;               // target projector index t+1
    std::vector<int> outcomes;  // forward, backward, forward, ... ; 1 = inside
    int forward_measurements = 0;
    bool success = false;

    bool operator==(const StepRecord &) const = default;
};

struct ProtocolTrace {
    std::uint64_t seed = 0;
    std::uint64_t trial = 0;
    std::int64_t m = 0;
    std::vector<StepRecord> steps;
    int total_measurements = 0;
    bool success = false;
    std::string error;  // "StepExhausted" with failed_step set, or empty
    int failed_step = -1;
    double final_fidelity = 0.0;
    std::vector<double> final_weights;  // |<b_k|psi>|^2 over the orthonormal basis of P_N
    int rewind_checks = 0;
    double rewind_max_deviation = 0.0;

    bool operator==(const ProtocolTrace &) const = default;
};

/// Prepared protocol: projectors P_0..P_N, initial state, per-step spectra.
class Protocol {
   public:
    explicit Protocol(ProtocolConfig cfg) : cfg_(std::move(cfg)) {
        const int n = cfg_.lattice.vertices();
        if (static_cast<int>(cfg_.deformations.size()) != n)
            throw Error(ErrorCode::InvalidConfig, "need one deformation per vertex");
        if (!(cfg_.epsilon > 0.0 && cfg_.epsilon < 1.0))
            throw Error(ErrorCode::InvalidEpsilon, "epsilon must lie in (0, 1)");
        kappa_g_ = 1.0;
        for (const auto &d : cfg_.deformations) {
            kappas_.push_back(condition_number_on_symmetric(d, cfg_.tensor));
            kappa_g_ = std::max(kappa_g_, kappas_.back());
        }
        m_ = cfg_.m ? *cfg_.m : estimate_repetitions(n, kappa_g_, cfg_.epsilon);
        if (m_ < 0) throw Error(ErrorCode::InvalidConfig, "m must be non-negative");

        projectors_ = ground_projector_sequence(cfg_.lattice, cfg_.tensor, cfg_.deformations, cfg_.rank_tol);
        for (int t = 0; t < n; ++t) spectra_.push_back(jordan_decompose(projectors_[t], projectors_[t + 1]));
        initial_ = contract_isometric_state(cfg_.lattice, cfg_.tensor).amplitudes;
    }

    const ProtocolConfig &config() const { return cfg_; }
    std::int64_t m() const { return m_; }
    double kappa_g() const { return kappa_g_; }
    const std::vector<double> &kappas() const { return kappas_; }
    const std::vector<GroundProjector> &projectors() const { return projectors_; }
    const std::vector<JordanSpectrum> &spectra() const { return spectra_; }
    const Vector &initial_state() const { return initial_; }
    int steps() const { return cfg_.lattice.vertices(); }

    /// One trial on stream CounterRng(seed).split(trial).
    ProtocolTrace run_trial(std::uint64_t trial) const {
        CounterRng rng = CounterRng(cfg_.seed).split(trial);
        ProtocolTrace tr;
        tr.seed = cfg_.seed;
        tr.trial = trial;
        tr.m = m_;
        Vector psi = initial_;
        for (int t = 0; t < steps(); ++t) {
            StepRecord rec;
            rec.step = t + 1;
            const auto &pt = projectors_[t];
            const auto &pn = projectors_[t + 1];
            auto fwd = born_measure(psi, pn, rng);
            rec.outcomes.push_back(fwd.inside);
            ++rec.forward_measurements;
            psi = std::move(fwd.state);
            for (std::int64_t round = 0; round < m_ && !fwd.inside; ++round) {
                auto back = born_measure(psi, pt, rng);
                rec.outcomes.push_back(back.inside);
                psi = std::move(back.state);
                if (!back.inside && cfg_.check_rewind_structure) check_rewind(t, psi, tr);
                fwd = born_measure(psi, pn, rng);
                rec.outcomes.push_back(fwd.inside);
                ++rec.forward_measurements;
                psi = std::move(fwd.state);
            }
            rec.success = fwd.inside;
            tr.total_measurements += static_cast<int>(rec.outcomes.size());
            tr.steps.push_back(std::move(rec));
            if (!tr.steps.back().success) {
                tr.error = "StepExhausted";
                tr.failed_step = t + 1;
                break;
            }
        }
        tr.success = tr.error.empty();
        const auto &pfinal = projectors_.back();
        const Vector coeff = pfinal.basis.adjoint() * psi;
        tr.final_fidelity = coeff.squaredNorm();
        if (tr.success)
            for (Eigen::Index k = 0; k < coeff.size(); ++k) tr.final_weights.push_back(std::norm(coeff(k)));
        return tr;
    }

    /// Trials [0, count) on up to `threads` workers; output order is by trial.
    std::vector<ProtocolTrace> run_trials(std::uint64_t count, int threads = 1) const {
        std::vector<ProtocolTrace> out(count);
        std::atomic<std::uint64_t> next{0};
        auto worker = [&] {
            for (std::uint64_t i = next++; i < count; i = next++) out[i] = run_trial(i);
        };
        const int nt = std::max(1, std::min<int>(threads, static_cast<int>(std::max<std::uint64_t>(count, 1))));
        std::vector<std::thread> pool;
        for (int i = 1; i < nt; ++i) pool.emplace_back(worker);
        worker();
        for (auto &th : pool) th.join();
        return out;
    }

    /// Exact success probabilities from the block channel: entry t is the
    /// probability that steps 1..t all succeed (entry 0 is 1).
    std::vector<double> exact_success_profile(std::int64_t m) const {
        const Matrix &b0 = projectors_[0].basis;
        const Vector c = b0.adjoint() * initial_;
        Matrix rho = c * c.adjoint();
        std::vector<double> out{rho.trace().real()};
        for (int t = 0; t < steps(); ++t) {
            rho = step_success_channel(spectra_[t], projectors_[t].basis, projectors_[t + 1].basis, rho, m);
            out.push_back(rho.trace().real());
        }
        return out;
    }

    /// Conditional per-step failure probability 1 - P(success t+1 | success t).
    std::vector<double> exact_step_failure(std::int64_t m) const {
        const auto prof = exact_success_profile(m);
        std::vector<double> out;
        for (size_t t = 0; t + 1 < prof.size(); ++t) out.push_back(prof[t] > 0 ? 1.0 - prof[t + 1] / prof[t] : 1.0);
        return out;
    }

   private:
    // After a failed forward measurement and a rewind landing in 1-P_t, the
    // state must lie in span{r_k^perp} and its forward success probability
    // must be Sum_k |<r_k^perp|psi>|^2 (1 - d_k).
    void check_rewind(int t, const Vector &psi, ProtocolTrace &tr) const {
        const auto &js = spectra_[t];
        Vector recon = Vector::Zero(psi.size());
        double predicted = 0.0;
        for (int k = 0; k < js.blocks(); ++k) {
            const double d = js.overlap(k);
            if (1.0 - d <= 1e-12) continue;
            const Vector rp = excited_r_vector(js, k);
            const cplx a = rp.dot(psi);
            recon += a * rp;
            predicted += std::norm(a) * (1.0 - d);
        }
        const double actual = projectors_[t + 1].weight(psi);
        const double dev = std::max((psi - recon).norm(), std::abs(actual - predicted));
        ++tr.rewind_checks;
        tr.rewind_max_deviation = std::max(tr.rewind_max_deviation, dev);
    }

    ProtocolConfig cfg_;
    std::int64_t m_ = 0;
    double kappa_g_ = 1.0;
    std::vector<double> kappas_;
    std::vector<GroundProjector> projectors_;
    std::vector<JordanSpectrum> spectra_;
    Vector initial_;
};

inline ProtocolTrace run_protocol(const ProtocolConfig &cfg, std::uint64_t trial = 0) {
    return Protocol(cfg).run_trial(trial);
}

/// Random deformations on every vertex in row-major order.
inline std::vector<Deformation> random_deformations(const TorusLattice &lat, const SiteTensor &tensor, double kappa,
                                                    std::uint64_t seed) {
    std::vector<Deformation> defs;
    for (int v = 0; v < lat.vertices(); ++v) defs.push_back(random_deformation(v, tensor, kappa, seed));
    return defs;
}

inline std::vector<Deformation> identity_deformations(const TorusLattice &lat, const SiteTensor &tensor) {
    std::vector<Deformation> defs;
    for (int v = 0; v < lat.vertices(); ++v) defs.push_back(identity_deformation(v, tensor));
    return defs;
}

/// Monte Carlo of one step from a fixed start state: entry m-1 is the fraction
/// of `trials` runs whose first forward measurement and the following m rounds
/// all failed, for m = 1..max_m. Uses full state-vector measurements only.
inline std::vector<double> simulate_step_failures(const GroundProjector &pt, const GroundProjector &pnext,
                                                  const Vector &psi, int max_m, int trials, std::uint64_t seed) {
    std::vector<int> fail_count(static_cast<size_t>(max_m), 0);
    for (int trial = 0; trial < trials; ++trial) {
        CounterRng rng = CounterRng(seed).split(static_cast<std::uint64_t>(trial));
        auto out = born_measure(psi, pnext, rng);
        Vector cur = std::move(out.state);
        int rounds_failed = 0;  // completed rounds, all failed
        while (!out.inside && rounds_failed < max_m) {
            auto back = born_measure(cur, pt, rng);
            out = born_measure(back.state, pnext, rng);
            cur = std::move(out.state);
            if (!out.inside) ++rounds_failed;
        }
        // Failing with cap m means the first forward and rounds 1..m all failed.
        for (int m = 1; m <= rounds_failed; ++m) ++fail_count[m - 1];
    }
    std::vector<double> freq;
    for (int c : fail_count) freq.push_back(static_cast<double>(c) / trials);
    return freq;
}

}  // namespace gipeps
