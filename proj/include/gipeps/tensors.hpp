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
#include <unsupported/Eigen/KroneckerProduct>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "gipeps/error.hpp"
#include "gipeps/group.hpp"
#include "gipeps/rng.hpp"

namespace gipeps {

/// Virtual leg order of a site tensor. Legs l and t carry the conjugate
/// representation, r and b the plain one.
enum Leg : int { kLeft = 0, kTop = 1, kRight = 2, kBottom = 3 };

inline Matrix kron4(const Matrix &a, const Matrix &b, const Matrix &c, const Matrix &d) {
    return Eigen::kroneckerProduct(Matrix(Eigen::kroneckerProduct(a, b)), Matrix(Eigen::kroneckerProduct(c, d)));
}

/// The virtual-space symmetrizer |G|^-1 Sum_g conj(U_g)^(x2) (x) U_g^(x2).
inline Matrix group_symmetrizer(const SemiRegularRep &rep) {
    const Eigen::Index n = static_cast<Eigen::Index>(rep.dim) * rep.dim * rep.dim * rep.dim;
    Matrix p = Matrix::Zero(n, n);
    for (const auto &u : rep.matrices) {
        const Matrix ub = u.conjugate();
        p += kron4(ub, ub, u, u);
    }
    return p / static_cast<double>(rep.group.order);
}

/// Orthonormal basis of the range of an orthogonal projector by pivoted
/// Cholesky. Columns are picked greedily by largest residual diagonal (first
/// index on ties), so a diagonal projector yields unit vectors in index order.
/// Stops when the explicit residual column norm drops below rank_tol.
inline Matrix projector_range_basis(const Matrix &proj, double rank_tol = 1e-10) {
    const Eigen::Index n = proj.rows();
    Eigen::VectorXd diag = proj.diagonal().real();
    std::vector<Vector> cols;
    for (Eigen::Index k = 0; k < n; ++k) {
        Eigen::Index piv = 0;
        double best = -1.0;
        for (Eigen::Index i = 0; i < n; ++i)
            if (diag(i) > best) {
                best = diag(i);
                piv = i;
            }
        Vector r = proj.col(piv);
        for (int pass = 0; pass < 2; ++pass)
            for (const auto &q : cols) r -= q * q.dot(r);
        const double nrm = r.norm();
        if (nrm <= rank_tol) break;
        r /= nrm;
        for (Eigen::Index i = 0; i < n; ++i) diag(i) -= std::norm(r(i));
        diag(piv) = -1.0;
        cols.push_back(std::move(r));
    }
    Matrix basis(n, static_cast<Eigen::Index>(cols.size()));
    for (size_t k = 0; k < cols.size(); ++k) basis.col(static_cast<Eigen::Index>(k)) = cols[k];
    return basis;
}

/// Site tensor in projector form, plus its compressed physical map.
struct SiteTensor {
    SemiRegularRep rep;
    DeltaMap delta;
    Matrix matrix;                 // D^4 x D^4, legs (l, t, r, b), l most significant
    Matrix sym_basis;              // D^4 x d, orthonormal, spans range(matrix)
    Eigen::VectorXd sym_values;    // matrix * sym_basis = sym_basis * diag(sym_values)
    int sym_dim = 0;

    int bond_dim() const { return rep.dim; }

    /// The map from the virtual legs onto the compressed physical space C^d:
    /// sym_basis^dagger * matrix = diag(sym_values) * sym_basis^dagger.
    Matrix physical_map() const { return sym_values.cast<cplx>().asDiagonal() * sym_basis.adjoint(); }
};

inline SiteTensor build_site_tensor(const SemiRegularRep &rep, double rank_tol = 1e-10) {
    require_within_cap(static_cast<std::uint64_t>(rep.dim), 8, "site tensor");
    SiteTensor t;
    t.rep = rep;
    t.delta = delta_map(rep);

    const Matrix sym = group_symmetrizer(rep);
    const Eigen::VectorXd w = t.delta.weights;
    const Eigen::Index d = rep.dim;
    Eigen::VectorXd w4(sym.rows());
    for (Eigen::Index i = 0; i < sym.rows(); ++i)
        w4(i) = w(i / (d * d * d)) * w((i / (d * d)) % d) * w((i / d) % d) * w(i % d);
    // Delta^(x4) commutes with the symmetrizer, so the product is Hermitian.
    t.matrix = w4.cast<cplx>().asDiagonal() * sym;

    Matrix basis = projector_range_basis(sym, rank_tol);
    // Each basis column sits inside one eigenspace of Delta^(x4); order the
    // columns by their leading coordinate for a canonical physical basis.
    std::vector<Eigen::Index> lead(basis.cols());
    for (Eigen::Index k = 0; k < basis.cols(); ++k) {
        Eigen::Index i = 0;
        while (i < basis.rows() && std::abs(basis(i, k)) <= 1e-12) ++i;
        lead[k] = i;
    }
    std::vector<Eigen::Index> order(basis.cols());
    for (Eigen::Index k = 0; k < basis.cols(); ++k) order[k] = k;
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return lead[a] < lead[b]; });

    t.sym_dim = static_cast<int>(basis.cols());
    t.sym_basis.resize(basis.rows(), basis.cols());
    t.sym_values.resize(basis.cols());
    for (Eigen::Index k = 0; k < basis.cols(); ++k) {
        const auto col = basis.col(order[k]);
        t.sym_basis.col(k) = col;
        t.sym_values(k) = (col.adjoint() * w4.cast<cplx>().asDiagonal() * col).value().real();
    }
    return t;
}

/// Positive-definite operator on the compressed physical space of one site
/// (which is the symmetric subspace itself).
struct Deformation {
    int site = 0;
    Matrix matrix;
    double kappa_target = 1.0;
    std::uint64_t seed = 0;
    double kappa_sym = 1.0;
};

inline Eigen::VectorXd singular_values(const Matrix &m) {
    return Eigen::JacobiSVD<Matrix>(m).singularValues();
}

/// sigma_max / sigma_min of the deformation on the symmetric subspace.
inline double condition_number_on_symmetric(const Deformation &def, const SiteTensor &tensor) {
    if (def.matrix.rows() != tensor.sym_dim || def.matrix.cols() != tensor.sym_dim)
        throw Error(ErrorCode::DimensionMismatch, "deformation is " + std::to_string(def.matrix.rows()) +
                                                      "-dimensional, symmetric subspace has dimension " +
                                                      std::to_string(tensor.sym_dim));
    const Eigen::VectorXd s = singular_values(def.matrix);
    const double smax = s.maxCoeff();
    const double smin = s.minCoeff();
    if (smin <= 1e-12) throw Error(ErrorCode::SingularOnSymmetric, "sigma_min = " + std::to_string(smin));
    return smax / smin;
}

inline Deformation identity_deformation(int site, const SiteTensor &tensor) {
    Deformation def;
    def.site = site;
    def.matrix = Matrix::Identity(tensor.sym_dim, tensor.sym_dim);
    return def;
}

/// Wraps a user matrix after checking it is Hermitian positive definite.
inline Deformation deformation_from_matrix(int site, Matrix m, const SiteTensor &tensor, double tol = 1e-12) {
    if (m.rows() != tensor.sym_dim || m.cols() != tensor.sym_dim)
        throw Error(ErrorCode::DimensionMismatch, "deformation matrix has wrong size");
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if ((m - m.adjoint()).cwiseAbs().maxCoeff() > tol * scale)
        throw Error(ErrorCode::InvalidConfig, "deformation is not Hermitian");
    Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -tol * scale)
        throw Error(ErrorCode::InvalidConfig, "deformation is not positive semidefinite");
    Deformation def;
    def.site = site;
    def.matrix = std::move(m);
    def.kappa_sym = condition_number_on_symmetric(def, tensor);
    def.kappa_target = def.kappa_sym;
    return def;
}

/// Random positive-definite deformation V diag(lambda) V^dagger with V from
/// the QR of a complex Gaussian matrix and lambda log-uniform on
/// [1/kappa, 1]; the endpoints 1 and 1/kappa are always included.
/// Randomness comes from CounterRng(seed).split(site).
inline Deformation random_deformation(int site, const SiteTensor &tensor, double kappa_target, std::uint64_t seed) {
    if (!(kappa_target >= 1.0) || !std::isfinite(kappa_target))
        throw Error(ErrorCode::InvalidKappa, "kappa_target must be >= 1, got " + std::to_string(kappa_target));
    const int d = tensor.sym_dim;
    Deformation def;
    def.site = site;
    def.kappa_target = kappa_target;
    def.seed = seed;
    if (kappa_target == 1.0) {
        def.matrix = Matrix::Identity(d, d);
        def.kappa_sym = 1.0;
        return def;
    }
    if (d < 2) throw Error(ErrorCode::InvalidKappa, "a one-dimensional symmetric subspace only admits kappa = 1");

    CounterRng rng = CounterRng(seed).split(static_cast<std::uint64_t>(site));
    Matrix g(d, d);
    for (int j = 0; j < d; ++j)
        for (int i = 0; i < d; ++i) g(i, j) = rng.complex_normal();
    const Matrix v = Eigen::HouseholderQR<Matrix>(g).householderQ() * Matrix::Identity(d, d);

    Eigen::VectorXd lambda(d);
    const double log_k = std::log(kappa_target);
    lambda(0) = 1.0;
    lambda(1) = 1.0 / kappa_target;
    for (int i = 2; i < d; ++i) lambda(i) = std::exp(-rng.uniform() * log_k);

    def.matrix = v * lambda.cast<cplx>().asDiagonal() * v.adjoint();
    def.matrix = 0.5 * (def.matrix + def.matrix.adjoint()).eval();
    def.kappa_sym = condition_number_on_symmetric(def, tensor);
    return def;
}

struct RegroupReport {
    std::string group;
    bool regular = false;
    int bond_dim = 0;
    double gram_deviation = 0.0;           // |C^dag C - |G|^-1 Sum_g R_g^(x4)|_inf, C normalized
    bool entry_check = false;              // unnormalized Gram entries are exactly 0 or 1
    double max_entry_error = 0.0;          // max distance of those entries from {0, 1} pattern
    double decomposition_deviation = 0.0;  // |B - Sum_g A_conj(g) (x) A_plain(g)|_inf, -1 if skipped
    double scale = 1.0;                    // |G|: C_unnormalized^dag C_unnormalized = scale * C^dag C
    std::string route;                     // "explicit" or "factorized"
};

/// Splits the site tensor B into two-leg tensors A(g) = |G|^-1/2 Delta U_g (x) Delta U_g (x) |g>,
/// regroups four of them around a plaquette into
///   C_u |g1 g2 g3 g4> = |G|^-2 (x)_r vec(Delta^2 U_{x_r}),
///   x = (g1 g2^-1, g2 g3^-1, g4 g3^-1, g1 g4^-1),
/// and compares the Gram matrix against the regular-representation symmetrizer
/// |G|^-1 Sum_g R_g^(x4), R_g|h> = |hg>. The comparison uses C = |G|^-1/2 C_u;
/// the 0/1 pattern is checked on C_u^dag C_u.
inline RegroupReport verify_regroup_equivalence(const SemiRegularRep &rep, double tol = 1e-10) {
    const GroupTable &grp = rep.group;
    const int n = grp.order;
    const int dim = rep.dim;
    require_within_cap(static_cast<std::uint64_t>(n), 8, "regroup Gram matrix");

    RegroupReport rpt;
    rpt.group = grp.name;
    rpt.regular = rep.is_regular();
    rpt.bond_dim = dim;
    rpt.scale = n;

    const DeltaMap delta = delta_map(rep);
    const Matrix dm = delta.matrix();

    // Split of B into a conjugate pair and a plain pair.
    rpt.decomposition_deviation = -1.0;
    const std::uint64_t cap = amplitude_cap();
    const std::uint64_t d4 = static_cast<std::uint64_t>(dim) * dim * dim * dim;
    if (d4 * d4 <= cap / 3) {
        Matrix b = Matrix::Zero(static_cast<Eigen::Index>(d4), static_cast<Eigen::Index>(d4));
        Matrix split = b;
        const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(n));
        for (int g = 0; g < n; ++g) {
            const Matrix du = dm * rep.matrices[g];
            const Matrix dub = dm * rep.matrices[g].conjugate();
            b += kron4(dub, dub, du, du) / static_cast<double>(n);
            const Matrix a_conj = inv_sqrt * Matrix(Eigen::kroneckerProduct(dub, dub));
            const Matrix a_plain = inv_sqrt * Matrix(Eigen::kroneckerProduct(du, du));
            split += Eigen::kroneckerProduct(a_conj, a_plain);
        }
        rpt.decomposition_deviation = (b - split).cwiseAbs().maxCoeff();
    }

    // Bond vectors f(x) = vec(Delta^2 U_x) and their Gram matrix.
    std::vector<Vector> f(n);
    for (int x = 0; x < n; ++x) {
        const Matrix m = dm * dm * rep.matrices[x];
        f[x] = Eigen::Map<const Vector>(m.data(), m.size());
    }

    auto config = [n](std::int64_t idx, int out[4]) {
        for (int i = 3; i >= 0; --i) {
            out[i] = static_cast<int>(idx % n);
            idx /= n;
        }
    };
    auto bonds = [&grp](const int g[4], int x[4]) {
        x[0] = grp(g[0], grp.inverse[g[1]]);
        x[1] = grp(g[1], grp.inverse[g[2]]);
        x[2] = grp(g[3], grp.inverse[g[2]]);
        x[3] = grp(g[0], grp.inverse[g[3]]);
    };
    // Number of g with g_i g = g'_i for all i; reference from the table alone.
    auto orbit_count = [&grp, n](const int gp[4], const int g[4]) {
        int count = 0;
        for (int h = 0; h < n; ++h) {
            bool ok = true;
            for (int i = 0; i < 4 && ok; ++i) ok = grp(g[i], h) == gp[i];
            count += ok;
        }
        return count;
    };

    const std::int64_t n4 = static_cast<std::int64_t>(n) * n * n * n;
    const double pref = 1.0 / std::pow(static_cast<double>(n), 4);
    double dev = 0.0, entry_err = 0.0;
    auto accumulate = [&](std::int64_t row, std::int64_t col, cplx gram_u) {
        int gp[4], g[4];
        config(row, gp);
        config(col, g);
        const int cnt = orbit_count(gp, g);
        dev = std::max(dev, std::abs(gram_u / static_cast<double>(n) - static_cast<double>(cnt) / n));
        entry_err = std::max(entry_err, std::abs(gram_u - (cnt > 0 ? 1.0 : 0.0)));
    };

    const std::uint64_t explicit_size = static_cast<std::uint64_t>(dim) * dim * dim * dim *
                                        static_cast<std::uint64_t>(dim) * dim * dim * dim * n4;
    if (explicit_size <= cap / 4) {
        // Materialize C_u column by column and form C_u^dag C_u by GEMM.
        rpt.route = "explicit";
        const Eigen::Index rows = static_cast<Eigen::Index>(f[0].size() * f[0].size() * f[0].size() * f[0].size());
        Matrix c(rows, static_cast<Eigen::Index>(n4));
        for (std::int64_t col = 0; col < n4; ++col) {
            int g[4], x[4];
            config(col, g);
            bonds(g, x);
            Vector v = Eigen::kroneckerProduct(Vector(Eigen::kroneckerProduct(f[x[0]], f[x[1]])),
                                               Vector(Eigen::kroneckerProduct(f[x[2]], f[x[3]])));
            c.col(static_cast<Eigen::Index>(col)) = v / static_cast<double>(n * n);
        }
        const Matrix gram = c.adjoint() * c;
        for (std::int64_t r = 0; r < n4; ++r)
            for (std::int64_t col = 0; col < n4; ++col) accumulate(r, col, gram(r, col));
    } else {
        // Inner products of tensor products factorize bond by bond.
        rpt.route = "factorized";
        Matrix fg(n, n);
        for (int a = 0; a < n; ++a)
            for (int b2 = 0; b2 < n; ++b2) fg(a, b2) = f[a].dot(f[b2]);
        std::vector<std::array<int, 4>> xs(static_cast<size_t>(n4));
        for (std::int64_t i = 0; i < n4; ++i) {
            int g[4], x[4];
            config(i, g);
            bonds(g, x);
            xs[static_cast<size_t>(i)] = {x[0], x[1], x[2], x[3]};
        }
        for (std::int64_t r = 0; r < n4; ++r) {
            const auto &xr = xs[static_cast<size_t>(r)];
            for (std::int64_t col = 0; col < n4; ++col) {
                const auto &xc = xs[static_cast<size_t>(col)];
                const cplx gu = pref * fg(xr[0], xc[0]) * fg(xr[1], xc[1]) * fg(xr[2], xc[2]) * fg(xr[3], xc[3]);
                accumulate(r, col, gu);
            }
        }
    }
    rpt.gram_deviation = dev;
    rpt.max_entry_error = entry_err;
    rpt.entry_check = entry_err <= tol;
    return rpt;
}

}  // namespace gipeps
