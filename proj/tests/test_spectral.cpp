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

#include <gtest/gtest.h>

#include <cmath>

#include "gipeps/protocol.hpp"
#include "gipeps/spectral.hpp"
#include "oracles.hpp"

namespace gipeps {
namespace {

template <class F>
ErrorCode code_of(F &&f) {
    try {
        f();
    } catch (const Error &e) {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorCode::InvalidConfig;
}

GroundProjector from_columns(const Matrix &cols) {
    GroundProjector p;
    p.basis = orthonormal_span(cols);
    p.rank = static_cast<int>(p.basis.cols());
    return p;
}

// P = span{e0}, Q = span{cos(a) e0 + sin(a) e1} in C^n.
std::pair<GroundProjector, GroundProjector> line_pair(double angle, int n = 3) {
    Matrix p = Matrix::Zero(n, 1), q = Matrix::Zero(n, 1);
    p(0, 0) = 1.0;
    q(0, 0) = std::cos(angle);
    q(1, 0) = std::sin(angle);
    return {from_columns(p), from_columns(q)};
}

TEST(Jordan, SingleBlockOverlap) {
    const auto [p, q] = line_pair(0.3);
    const auto js = jordan_decompose(p, q);
    ASSERT_EQ(js.blocks(), 1);
    EXPECT_NEAR(js.overlaps[0], std::pow(std::cos(0.3), 2), 1e-15);
    EXPECT_NEAR(js.d_min, js.overlaps[0], 0.0);
    EXPECT_EQ(js.zero_overlaps, 0);
    // r_perp lies in P^perp, is a unit vector, and has forward weight 1 - d.
    const Vector rp = excited_r_vector(js, 0);
    EXPECT_NEAR(rp.norm(), 1.0, 1e-14);
    EXPECT_NEAR(p.weight(rp), 0.0, 1e-14);
    EXPECT_NEAR(q.weight(rp), 1.0 - js.overlaps[0], 1e-14);
}

TEST(Jordan, IdenticalProjectorsHaveUnitOverlaps) {
    CounterRng rng(1);
    Matrix cols(10, 4);
    for (int j = 0; j < 4; ++j)
        for (int i = 0; i < 10; ++i) cols(i, j) = rng.complex_normal();
    const auto p = from_columns(cols);
    const auto js = jordan_decompose(p, p);
    for (double d : js.overlaps) EXPECT_NEAR(d, 1.0, 1e-13);
    const auto rep = verify_overlap_bound(js, 1.0);
    EXPECT_NEAR(rep.margin, 0.0, 1e-13);
}

TEST(Jordan, RandomSubspacesMatchVariationalOracle) {
    CounterRng rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        Matrix a(12, 4), b(12, 5);
        for (auto &x : a.reshaped()) x = rng.complex_normal();
        for (auto &x : b.reshaped()) x = rng.complex_normal();
        const auto p = from_columns(a), q = from_columns(b);
        const auto js = jordan_decompose(p, q);
        EXPECT_NEAR(js.d_min, oracle::variational_d_min(p.basis, q.basis), 1e-12);
        // r_k and q_k pair up: <r_j|q_k> = sqrt(d_k) delta_jk.
        const Matrix cross = js.r_vectors.adjoint() * js.q_vectors;
        for (int j = 0; j < js.blocks(); ++j)
            for (int k = 0; k < js.blocks(); ++k)
                EXPECT_NEAR(std::abs(cross(j, k)), j == k ? std::sqrt(js.overlaps[k]) : 0.0, 1e-12);
    }
}

TEST(Jordan, UnpairedDirectionsCountAsZero) {
    Matrix a = Matrix::Zero(4, 2), b = Matrix::Zero(4, 1);
    a(0, 0) = a(1, 1) = 1.0;
    b(0, 0) = 1.0;
    const auto js = jordan_decompose(from_columns(a), from_columns(b));
    EXPECT_EQ(js.zero_overlaps, 1);
    EXPECT_NEAR(js.d_min, 1.0, 1e-15);
    EXPECT_EQ(code_of([&] { verify_overlap_bound(js, 1.0); }), ErrorCode::BoundViolation);
}

TEST(Jordan, DimensionMismatch) {
    const auto [p, q3] = line_pair(0.1, 3);
    const auto [p4, q4] = line_pair(0.1, 4);
    EXPECT_EQ(code_of([&] { jordan_decompose(p, q4); }), ErrorCode::DimensionMismatch);
}

TEST(OverlapBound, ViolationThrows) {
    const auto [p, q] = line_pair(std::acos(std::sqrt(0.1)));
    const auto js = jordan_decompose(p, q);
    EXPECT_NEAR(js.d_min, 0.1, 1e-14);
    EXPECT_EQ(code_of([&] { verify_overlap_bound(js, 2.0); }), ErrorCode::BoundViolation);
    EXPECT_NO_THROW(verify_overlap_bound(js, 4.0));
}

TEST(OverlapBound, IdentityDeformationOnLattice) {
    const TorusLattice lat(2, 2);
    const auto tensor = build_site_tensor(regular_rep(build_group("Z2")));
    const auto defs = identity_deformations(lat, tensor);
    const auto js = jordan_decompose(ground_projector(lat, tensor, defs, 0), ground_projector(lat, tensor, defs, 1));
    const auto rep = verify_overlap_bound(js, 1.0);
    EXPECT_NEAR(rep.d_min, 1.0, 1e-12);
    EXPECT_NEAR(rep.margin, 0.0, 1e-12);
}

TEST(OverlapBound, Z2SingleSiteKappaTwo) {
    const TorusLattice lat(2, 2);
    const auto tensor = build_site_tensor(regular_rep(build_group("Z2")));
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        auto defs = identity_deformations(lat, tensor);
        defs[0] = random_deformation(0, tensor, 2.0, seed);
        const auto p0 = ground_projector(lat, tensor, defs, 0);
        const auto p1 = ground_projector(lat, tensor, defs, 1);
        const auto js = jordan_decompose(p0, p1);
        EXPECT_GE(js.d_min, 0.25 - 1e-9);
        EXPECT_NEAR(js.d_min, oracle::variational_d_min(p0.basis, p1.basis), 1e-10);
        EXPECT_NO_THROW(verify_overlap_bound(js, defs[0].kappa_sym));
    }
}

TEST(Born, ConsumesOneDrawAndHandlesCertainty) {
    const auto [p, q] = line_pair(0.0);
    Vector e0 = Vector::Zero(3);
    e0(0) = 1.0;
    Vector e2 = Vector::Zero(3);
    e2(2) = 1.0;
    CounterRng rng(4);
    for (int i = 0; i < 50; ++i) {
        const auto before = rng.counter();
        const auto in = born_measure(e0, p, rng);
        EXPECT_EQ(rng.counter(), before + 1);
        EXPECT_TRUE(in.inside);
        EXPECT_DOUBLE_EQ(in.probability, 1.0);
        const auto out = born_measure(e2, p, rng);
        EXPECT_FALSE(out.inside);
        EXPECT_LE((out.state - e2).norm(), 1e-15);
    }
}

TEST(Born, FrequencyMatchesBornRule) {
    const auto [p, q] = line_pair(0.7);
    const Vector psi = q.basis.col(0);
    const double pin = std::pow(std::cos(0.7), 2);
    CounterRng rng(5);
    const int n = 20000;
    int hits = 0;
    for (int i = 0; i < n; ++i) hits += born_measure(psi, p, rng).inside;
    EXPECT_TRUE(oracle::within_three_sigma(static_cast<double>(hits) / n, pin, n));
}

// The rewind leaves the state in span{r_k^perp}, from which the forward success
// probability is Sum_k |<r_k^perp|psi>|^2 (1 - d_k). For a single block with
// d = 0.9 that is 0.1, which is below d_min: the recovered state does not keep
// the d_min lower bound, but the repeated round still succeeds with 2d(1-d).
TEST(Rewind, ForwardProbabilityAfterRewindIsOneMinusOverlap) {
    const double d = 0.9;
    const auto [p, q] = line_pair(std::acos(std::sqrt(d)));
    const auto js = jordan_decompose(p, q);
    const Vector r = js.r_vectors.col(0);
    // Fail forward: (1-Q) r. Then fail backward: (1-P)(1-Q) r.
    Vector v = r - q.apply(r);
    v = v - p.apply(v);
    v.normalize();
    const Vector rp = excited_r_vector(js, 0);
    EXPECT_NEAR(std::abs(rp.dot(v)), 1.0, 1e-13);
    EXPECT_NEAR(q.weight(v), 1.0 - d, 1e-13);
    EXPECT_LT(q.weight(v), js.d_min);
    // Round success from the failed-forward state: back then forward.
    Vector f = r - q.apply(r);
    f.normalize();
    const double round = (1.0 - p.weight(f)) * q.weight(v) + p.weight(f) * d;
    EXPECT_NEAR(round, 2.0 * d * (1.0 - d) / (1.0), 1e-13);
}

}  // namespace
}  // namespace gipeps
