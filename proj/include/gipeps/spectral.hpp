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

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "gipeps/error.hpp"
#include "gipeps/lattice.hpp"
#include "gipeps/rng.hpp"

namespace gipeps {

/// Simultaneous block structure of two projectors P (rank p) and Q (rank q).
///
/// With B_P^dagger B_Q = U diag(sigma) V^dagger, the principal vectors are
/// r_k = B_P u_k and q_k = B_Q v_k, <r_k|q_k> = sigma_k >= 0, and the overlaps
/// are d_k = sigma_k^2 for k < min(p, q), sorted descending. Columns of
/// r_vectors beyond min(p, q) are directions of P orthogonal to Q.
struct JordanSpectrum {
    std::vector<double> overlaps;
    double d_min = 0.0;     // min over d_k > zero_tol; 0 if there is none
    int zero_overlaps = 0;  // directions of P with overlap <= zero_tol, incl. unpaired ones
    Matrix r_vectors;       // n x p
    Matrix q_vectors;       // n x q
    double zero_tol = 1e-12;

    int blocks() const { return static_cast<int>(overlaps.size()); }

    /// Overlap of r-direction k; 0 for unpaired directions.
    double overlap(int k) const { return k < blocks() ? overlaps[k] : 0.0; }
};

inline JordanSpectrum jordan_decompose(const GroundProjector &p, const GroundProjector &q, double zero_tol = 1e-12) {
    if (p.basis.rows() != q.basis.rows())
        throw Error(ErrorCode::DimensionMismatch, "projectors act on spaces of dimension " +
                                                      std::to_string(p.basis.rows()) + " and " +
                                                      std::to_string(q.basis.rows()));
    const Matrix overlap = p.basis.adjoint() * q.basis;
    Eigen::JacobiSVD<Matrix> svd(overlap, Eigen::ComputeFullU | Eigen::ComputeFullV);
    JordanSpectrum js;
    js.zero_tol = zero_tol;
    const auto &sv = svd.singularValues();
    js.overlaps.resize(static_cast<size_t>(sv.size()));
    for (Eigen::Index k = 0; k < sv.size(); ++k) js.overlaps[k] = std::clamp(sv(k) * sv(k), 0.0, 1.0);
    js.r_vectors = p.basis * svd.matrixU();
    js.q_vectors = q.basis * svd.matrixV();

    js.zero_overlaps = static_cast<int>(p.basis.cols()) - static_cast<int>(js.overlaps.size());
    js.d_min = 0.0;
    bool any = false;
    for (double d : js.overlaps) {
        if (d > zero_tol) {
            js.d_min = any ? std::min(js.d_min, d) : d;
            any = true;
        } else {
            ++js.zero_overlaps;
        }
    }
    return js;
}

/// Excited partner r_k^perp of block k: r_k = sqrt(d) q_k + sqrt(1-d) q_k^perp,
/// r_k^perp = -sqrt(1-d) q_k + sqrt(d) q_k^perp, equivalently
/// r_k^perp = (sqrt(d) r_k - q_k) / sqrt(1-d). Requires 0 < 1-d.
inline Vector excited_r_vector(const JordanSpectrum &js, int k) {
    const double d = js.overlap(k);
    const double c = std::sqrt(d), s = std::sqrt(1.0 - d);
    return (c * js.r_vectors.col(k) - js.q_vectors.col(k)) / s;
}

struct OverlapReport {
    double d_min = 0.0;
    double kappa = 1.0;
    double bound = 1.0;   // kappa^-2
    double margin = 0.0;  // d_min - bound
    int zero_overlaps = 0;
    bool ok = false;
};

/// Checks d_min >= kappa^-2 - tol. A violation (or an orthogonal sector)
/// means the implementation is wrong, so it throws BoundViolation.
inline OverlapReport verify_overlap_bound(const JordanSpectrum &js, double kappa_sym, double tol = 1e-9) {
    OverlapReport rep;
    rep.d_min = js.d_min;
    rep.kappa = kappa_sym;
    rep.bound = 1.0 / (kappa_sym * kappa_sym);
    rep.margin = js.d_min - rep.bound;
    rep.zero_overlaps = js.zero_overlaps;
    rep.ok = js.zero_overlaps == 0 && rep.margin >= -tol;
    if (js.zero_overlaps > 0)
        throw Error(ErrorCode::BoundViolation, std::to_string(js.zero_overlaps) + " direction(s) with zero overlap");
    if (!rep.ok)
        throw Error(ErrorCode::BoundViolation, "d_min = " + std::to_string(js.d_min) + " < kappa^-2 = " +
                                                   std::to_string(rep.bound));
    return rep;
}

struct MeasurementOutcome {
    bool inside = false;
    Vector state;                     // normalized post-measurement state
    double probability = 0.0;         // probability of the realized outcome
    double inside_probability = 0.0;  // |P psi|^2
};

/// Projective measurement {P, 1-P}. Consumes exactly one uniform draw.
/// Probabilities within 1e-14 of 0 or 1 are treated as exact.
inline MeasurementOutcome born_measure(const Vector &psi, const GroundProjector &p, CounterRng &rng,
                                       double certain_tol = 1e-14) {
    const Vector coeff = p.basis.adjoint() * psi;
    const double total = psi.squaredNorm();
    double pin = std::clamp(coeff.squaredNorm() / total, 0.0, 1.0);
    if (pin <= certain_tol) pin = 0.0;
    if (pin >= 1.0 - certain_tol) pin = 1.0;
    const double u = rng.uniform();

    MeasurementOutcome out;
    out.inside_probability = pin;
    out.inside = u < pin;
    out.probability = out.inside ? pin : 1.0 - pin;
    if (out.inside) {
        out.state = p.basis * coeff;
    } else {
        out.state = psi - p.basis * coeff;
    }
    const double nrm = out.state.norm();
    if (nrm <= 0.0) throw Error(ErrorCode::ZeroState, "post-measurement state vanished");
    out.state /= nrm;
    return out;
}

inline MeasurementOutcome born_measure(const StateVector &psi, const GroundProjector &p, CounterRng &rng) {
    return born_measure(psi.amplitudes, p, rng);
}

}  // namespace gipeps
