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

// Independent reference computations used by the unit and acceptance tests.
// Nothing here calls into the code paths it is used to check.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "gipeps/group.hpp"
#include "gipeps/lattice.hpp"
#include "gipeps/rng.hpp"

namespace gipeps::oracle {

/// S_3 as permutations of {0,1,2} in lexicographic order; mult(a, b) = a o b.
inline std::vector<int> symmetric_group_table() {
    std::vector<std::array<int, 3>> perms;
    std::array<int, 3> p{0, 1, 2};
    do perms.push_back(p);
    while (std::next_permutation(p.begin(), p.end()));
    const int n = static_cast<int>(perms.size());
    std::vector<int> mult(n * n);
    for (int a = 0; a < n; ++a) {
        for (int b = 0; b < n; ++b) {
            std::array<int, 3> c{};
            for (int i = 0; i < 3; ++i) c[i] = perms[a][perms[b][i]];
            mult[a * n + b] = static_cast<int>(std::find(perms.begin(), perms.end(), c) - perms.begin());
        }
    }
    return mult;
}

/// Brute force over all bijections fixing the identity.
inline bool isomorphic(const std::vector<int> &ta, const std::vector<int> &tb, int n) {
    std::vector<int> phi(n);
    std::iota(phi.begin(), phi.end(), 0);
    do {
        if (phi[0] != 0) continue;
        bool ok = true;
        for (int a = 0; a < n && ok; ++a)
            for (int b = 0; b < n && ok; ++b) ok = phi[ta[a * n + b]] == tb[phi[a] * n + phi[b]];
        if (ok) return true;
    } while (std::next_permutation(phi.begin(), phi.end()));
    return false;
}

/// Toric code with qubits on the 2N edges of a W x H torus,
/// H = -Sum_v A_v - Sum_p B_p. Returns the ground-state degeneracy by dense
/// diagonalization (use only for 2 x 2).
inline int toric_code_degeneracy(int w, int h) {
    const int n = w * h;
    const int q = 2 * n;
    const std::int64_t dim = std::int64_t{1} << q;
    auto hedge = [&](int x, int y) { return ((y + h) % h) * w + (x + w) % w; };
    auto vedge = [&](int x, int y) { return n + ((y + h) % h) * w + (x + w) % w; };
    Eigen::MatrixXd ham = Eigen::MatrixXd::Zero(dim, dim);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            // Star: X on the four edges touching vertex (x, y).
            std::uint64_t star = (1ULL << hedge(x, y)) | (1ULL << hedge(x - 1, y)) | (1ULL << vedge(x, y)) |
                                 (1ULL << vedge(x, y - 1));
            // Plaquette below-right of (x, y): Z on its four edges.
            std::uint64_t plaq = (1ULL << hedge(x, y)) | (1ULL << hedge(x, y + 1)) | (1ULL << vedge(x, y)) |
                                 (1ULL << vedge(x + 1, y));
            for (std::int64_t i = 0; i < dim; ++i) {
                ham(i ^ star, i) -= 1.0;
                ham(i, i) -= (std::popcount(static_cast<std::uint64_t>(i) & plaq) % 2) ? -1.0 : 1.0;
            }
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(ham, Eigen::EigenvaluesOnly);
    const double e0 = es.eigenvalues()(0);
    int deg = 0;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) deg += es.eigenvalues()(i) < e0 + 1e-8;
    return deg;
}

/// Stabilizer code of the Z2 isometric PEPS written in its ambient space:
/// one qubit per (vertex, leg), leg order l, t, r, b, site 0 most significant.
/// Generators: Z Z on both ends of every bond, Z^4 at every vertex, and X on
/// all eight qubits of every plaquette. Returns an orthonormal code-space basis
/// obtained by projecting random vectors.
inline Matrix z2_peps_code_space(const TorusLattice &lat, int samples = 12) {
    const int n = lat.vertices();
    const int q = 4 * n;
    const std::int64_t dim = std::int64_t{1} << q;
    auto bit = [q](int v, int leg) { return std::uint64_t{1} << (q - 1 - (4 * v + leg)); };
    auto end_bit = [&](std::pair<int, int> e) { return bit(e.first, e.second); };

    std::vector<std::uint64_t> z_masks, x_masks;
    for (int e = 0; e < lat.edges(); ++e) {
        auto [a, b] = lat.edge_ends(e);
        z_masks.push_back(end_bit(a) | end_bit(b));
    }
    for (int v = 0; v < n; ++v) z_masks.push_back(bit(v, 0) | bit(v, 1) | bit(v, 2) | bit(v, 3));
    for (int y = 0; y < lat.height; ++y) {
        for (int x = 0; x < lat.width; ++x) {
            const int v00 = lat.vertex(x, y), v10 = lat.vertex(x + 1, y);
            const int v01 = lat.vertex(x, y + 1), v11 = lat.vertex(x + 1, y + 1);
            x_masks.push_back(bit(v00, kRight) | bit(v10, kLeft) | bit(v01, kRight) | bit(v11, kLeft) |
                              bit(v00, kBottom) | bit(v01, kTop) | bit(v10, kBottom) | bit(v11, kTop));
        }
    }

    CounterRng rng(12345);
    Matrix cols(dim, samples);
    for (int s = 0; s < samples; ++s) {
        Vector v(dim);
        for (std::int64_t i = 0; i < dim; ++i) v(i) = rng.complex_normal();
        for (auto zm : z_masks)
            for (std::int64_t i = 0; i < dim; ++i)
                if (std::popcount(static_cast<std::uint64_t>(i) & zm) % 2) v(i) = 0.0;
        for (auto xm : x_masks) {
            Vector w(dim);
            for (std::int64_t i = 0; i < dim; ++i) w(i) = 0.5 * (v(i) + v(static_cast<std::int64_t>(i ^ xm)));
            v = w;
        }
        cols.col(s) = v;
    }
    Eigen::JacobiSVD<Matrix> svd(cols, Eigen::ComputeThinU);
    const auto &sv = svd.singularValues();
    Eigen::Index rank = 0;
    while (rank < sv.size() && sv(rank) > 1e-8 * sv(0)) ++rank;
    return svd.matrixU().leftCols(rank);
}

/// d_min = min over unit psi in range(P) of <psi|Q|psi>, as the smallest
/// eigenvalue of the compressed operator B_P^dag Q B_P.
inline double variational_d_min(const Matrix &bp, const Matrix &bq) {
    Matrix qbp(bp.rows(), bp.cols());
    for (Eigen::Index k = 0; k < bp.cols(); ++k) {
        const Vector c = bq.adjoint() * bp.col(k);
        qbp.col(k) = bq * c;
    }
    const Matrix m = bp.adjoint() * qbp;
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.adjoint()), Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

/// max_g |tr(Delta^4 U_g) - |G| delta_{g,e}| with Delta^4 built here from the
/// block layout alone: weight d_a / r_a on the d_a * r_a block of irrep a.
inline double delta_trace_error(const SemiRegularRep &rep) {
    double worst = 0.0;
    for (int g = 0; g < rep.group.order; ++g) {
        cplx tr = 0.0;
        Eigen::Index off = 0;
        for (size_t a = 0; a < rep.irreps.size(); ++a) {
            const Eigen::Index block = static_cast<Eigen::Index>(rep.irreps[a].dim) * rep.multiplicities[a];
            const double w = static_cast<double>(rep.irreps[a].dim) / rep.multiplicities[a];
            for (Eigen::Index i = off; i < off + block; ++i) tr += w * rep.matrices[g](i, i);
            off += block;
        }
        worst = std::max(worst, std::abs(tr - (g == rep.group.identity ? cplx(rep.group.order) : cplx(0.0))));
    }
    return worst;
}

/// Plaquette regrouping check from first principles. With the bond vectors
/// f(x) = vec(Delta^2 U_x), the unnormalized Gram entry between
/// configurations g' and g is |G|^-4 Prod_r <f(x'_r)|f(x_r)>; it must be 1
/// when g' = g h for some h and 0 otherwise. Returns the max deviation.
inline double regroup_pattern_error(const SemiRegularRep &rep) {
    const GroupTable &t = rep.group;
    const int n = t.order;
    Eigen::VectorXd w4(rep.dim);
    Eigen::Index off = 0;
    for (size_t a = 0; a < rep.irreps.size(); ++a) {
        const Eigen::Index block = static_cast<Eigen::Index>(rep.irreps[a].dim) * rep.multiplicities[a];
        w4.segment(off, block).setConstant(std::sqrt(static_cast<double>(rep.irreps[a].dim) / rep.multiplicities[a]));
        off += block;
    }
    // Delta^2 = diag(sqrt(d_a / r_a)).
    Matrix inner(n, n);
    for (int x = 0; x < n; ++x)
        for (int y = 0; y < n; ++y) {
            const Matrix fx = w4.cast<cplx>().asDiagonal() * rep.matrices[x];
            const Matrix fy = w4.cast<cplx>().asDiagonal() * rep.matrices[y];
            inner(x, y) = (fx.adjoint() * fy).trace();
        }
    auto inv = [&](int a) {
        for (int b = 0; b < n; ++b)
            if (t.mult[static_cast<size_t>(a * n + b)] == t.identity) return b;
        return -1;
    };
    auto mul = [&](int a, int b) { return t.mult[static_cast<size_t>(a * n + b)]; };
    auto bonds = [&](const std::array<int, 4> &g) {
        return std::array<int, 4>{mul(g[0], inv(g[1])), mul(g[1], inv(g[2])), mul(g[3], inv(g[2])),
                                  mul(g[0], inv(g[3]))};
    };
    std::vector<std::array<int, 4>> cfg;
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            for (int c = 0; c < n; ++c)
                for (int d = 0; d < n; ++d) cfg.push_back({a, b, c, d});
    const double pref = std::pow(static_cast<double>(n), -4);
    double worst = 0.0;
    for (const auto &gp : cfg) {
        const auto xp = bonds(gp);
        for (const auto &g : cfg) {
            const auto x = bonds(g);
            cplx e = pref;
            for (int r = 0; r < 4; ++r) e *= inner(xp[r], x[r]);
            bool related = false;
            for (int h = 0; h < n && !related; ++h)
                related = mul(g[0], h) == gp[0] && mul(g[1], h) == gp[1] && mul(g[2], h) == gp[2] && mul(g[3], h) == gp[3];
            worst = std::max(worst, std::abs(e - (related ? 1.0 : 0.0)));
        }
    }
    return worst;
}

/// Failure probability of the forward / rewind sequence by propagating the
/// mixed state through the measurement branches, in the span of both
/// ground spaces. Entry m-1 is the probability that the first forward
/// measurement and m further (backward, forward) rounds all fail.
inline std::vector<double> pfail_mixture(const Matrix &bp, const Matrix &bq, const Vector &psi, int max_m) {
    Matrix both(bp.rows(), bp.cols() + bq.cols());
    both << bp, bq;
    Eigen::JacobiSVD<Matrix> svd(both, Eigen::ComputeThinU);
    Eigen::Index k = 0;
    while (k < svd.singularValues().size() && svd.singularValues()(k) > 1e-10) ++k;
    const Matrix w = svd.matrixU().leftCols(k);
    const Matrix p = (w.adjoint() * bp) * (w.adjoint() * bp).adjoint();
    const Matrix q = (w.adjoint() * bq) * (w.adjoint() * bq).adjoint();
    const Matrix id = Matrix::Identity(k, k);
    const Matrix qf = id - q, pf = id - p;
    const Vector s = w.adjoint() * psi / psi.norm();
    Matrix rho = qf * (s * s.adjoint()) * qf;
    std::vector<double> out;
    for (int m = 1; m <= max_m; ++m) {
        rho = qf * (p * rho * p + pf * rho * pf) * qf;
        out.push_back(rho.trace().real());
    }
    return out;
}

/// Binomial 3-sigma window with a half-count continuity allowance.
inline bool within_three_sigma(double observed, double p, int trials) {
    const double sigma = std::sqrt(std::max(p * (1.0 - p), 0.0) / trials);
    return std::abs(observed - p) <= 3.0 * sigma + 0.5 / trials;
}

}  // namespace gipeps::oracle
