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

// Finite groups as multiplication tables, their irreducible representations,
// semi-regular representations U_g = (+)_a V^a_g (x) 1_{r_a}, and the diagonal
// re-weighting map with block weights (d_a / r_a)^{1/4}.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "gipeps/error.hpp"

namespace gipeps {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

enum class GroupKind { Cyclic, Dihedral, User };

/// A finite group on elements 0..order-1 with 0 the identity.
struct GroupTable {
    int order = 0;
    std::vector<int> mult;  // row-major order x order
    int identity = 0;
    std::vector<int> inverse;
    std::string name;
    GroupKind kind = GroupKind::User;
    int kind_param = 0;  // n for Z_n and D_n

    int operator()(int a, int b) const { return mult[static_cast<size_t>(a) * order + b]; }
    bool commute(int a, int b) const { return (*this)(a, b) == (*this)(b, a); }

    bool is_abelian() const {
        for (int a = 0; a < order; ++a)
            for (int b = a + 1; b < order; ++b)
                if (!commute(a, b)) return false;
        return true;
    }

    /// All ordered pairs (g, h) with gh = hg, lexicographic.
    std::vector<std::pair<int, int>> commuting_pairs() const {
        std::vector<std::pair<int, int>> out;
        for (int g = 0; g < order; ++g)
            for (int h = 0; h < order; ++h)
                if (commute(g, h)) out.emplace_back(g, h);
        return out;
    }
};

/// Validates closure, identity (element 0), inverses and associativity, and
/// fills in the inverse table.
inline GroupTable make_group_table(std::string name, int order, std::vector<int> mult) {
    if (order < 1) throw Error(ErrorCode::InvalidTable, "group order must be positive");
    if (mult.size() != static_cast<size_t>(order) * order)
        throw Error(ErrorCode::InvalidTable, "multiplication table must be order x order");
    for (int v : mult)
        if (v < 0 || v >= order)
            throw Error(ErrorCode::InvalidTable, "table entry " + std::to_string(v) + " is not an element");

    GroupTable t;
    t.order = order;
    t.mult = std::move(mult);
    t.name = std::move(name);
    t.identity = 0;
    for (int a = 0; a < order; ++a)
        if (t(0, a) != a || t(a, 0) != a)
            throw Error(ErrorCode::MissingIdentity, "element 0 is not a two-sided identity");

    t.inverse.assign(order, -1);
    for (int a = 0; a < order; ++a) {
        for (int b = 0; b < order; ++b) {
            if (t(a, b) == 0 && t(b, a) == 0) {
                t.inverse[a] = b;
                break;
            }
        }
        if (t.inverse[a] < 0)
            throw Error(ErrorCode::MissingInverse, "element " + std::to_string(a) + " has no inverse");
    }

    for (int a = 0; a < order; ++a)
        for (int b = 0; b < order; ++b)
            for (int c = 0; c < order; ++c)
                if (t(t(a, b), c) != t(a, t(b, c)))
                    throw Error(ErrorCode::NonAssociative,
                                "(" + std::to_string(a) + "*" + std::to_string(b) + ")*" + std::to_string(c));
    return t;
}

inline GroupTable cyclic_group(int n) {
    if (n < 1) throw Error(ErrorCode::InvalidConfig, "Z_n needs n >= 1");
    std::vector<int> mult(static_cast<size_t>(n) * n);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) mult[static_cast<size_t>(a) * n + b] = (a + b) % n;
    auto t = make_group_table(n == 1 ? "trivial" : "Z" + std::to_string(n), n, std::move(mult));
    t.kind = GroupKind::Cyclic;
    t.kind_param = n;
    return t;
}

/// D_n of order 2n. Element k + n*f stands for r^k s^f, with s r s = r^-1.
inline GroupTable dihedral_group(int n, std::string name = {}) {
    if (n < 3) throw Error(ErrorCode::InvalidConfig, "D_n needs n >= 3");
    const int order = 2 * n;
    std::vector<int> mult(static_cast<size_t>(order) * order);
    for (int x = 0; x < order; ++x) {
        for (int y = 0; y < order; ++y) {
            const int a = x % n, f = x / n, b = y % n, g = y / n;
            const int k = ((a + (f ? -b : b)) % n + n) % n;
            mult[static_cast<size_t>(x) * order + y] = k + n * (f ^ g);
        }
    }
    auto t = make_group_table(name.empty() ? "D" + std::to_string(n) : std::move(name), order, std::move(mult));
    t.kind = GroupKind::Dihedral;
    t.kind_param = n;
    return t;
}

/// Built-in groups: "trivial", "Z<n>", "S3", "D<n>".
inline GroupTable build_group(const std::string &spec) {
    if (spec == "trivial") return cyclic_group(1);
    if (spec == "S3") return dihedral_group(3, "S3");
    auto parse_n = [&](const std::string &s) {
        try {
            size_t pos = 0;
            const int n = std::stoi(s, &pos);
            if (pos == s.size()) return n;
        } catch (const std::exception &) {
        }
        throw Error(ErrorCode::InvalidConfig, "unknown group '" + spec + "'");
    };
    if (spec.size() > 1 && spec[0] == 'Z') return cyclic_group(parse_n(spec.substr(1)));
    if (spec.size() > 1 && spec[0] == 'D') return dihedral_group(parse_n(spec.substr(1)));
    throw Error(ErrorCode::InvalidConfig, "unknown group '" + spec + "'");
}

struct Irrep {
    std::string label;
    int dim = 0;
    std::vector<Matrix> matrices;  // one per group element
};

/// max_{g,h} |V(g)V(h) - V(gh)|_inf
inline double homomorphism_deviation(const GroupTable &t, const std::vector<Matrix> &mats) {
    double dev = 0.0;
    for (int g = 0; g < t.order; ++g)
        for (int h = 0; h < t.order; ++h)
            dev = std::max(dev, (mats[g] * mats[h] - mats[t(g, h)]).cwiseAbs().maxCoeff());
    return dev;
}

inline double unitarity_deviation(const std::vector<Matrix> &mats) {
    double dev = 0.0;
    for (const auto &m : mats)
        dev = std::max(dev, (m.adjoint() * m - Matrix::Identity(m.rows(), m.cols())).cwiseAbs().maxCoeff());
    return dev;
}

/// Sum_g |tr V(g)|^2 / |G|; equals 1 exactly for an irreducible representation.
inline double character_norm(const std::vector<Matrix> &mats) {
    double s = 0.0;
    for (const auto &m : mats) s += std::norm(m.trace());
    return s / static_cast<double>(mats.size());
}

inline cplx character_overlap(const Irrep &a, const Irrep &b) {
    cplx s = 0.0;
    for (size_t g = 0; g < a.matrices.size(); ++g) s += std::conj(a.matrices[g].trace()) * b.matrices[g].trace();
    return s / static_cast<double>(a.matrices.size());
}

/// Checks each irrep (homomorphism, unitarity, irreducibility), pairwise
/// inequivalence and completeness, then sorts by (dim, original position).
inline std::vector<Irrep> validate_irreps(const GroupTable &t, std::vector<Irrep> irreps, double tol = 1e-12) {
    int sum_sq = 0;
    for (const auto &irr : irreps) {
        if (irr.dim < 1 || irr.matrices.size() != static_cast<size_t>(t.order))
            throw Error(ErrorCode::InvalidIrrep, "irrep '" + irr.label + "' needs one matrix per element");
        for (const auto &m : irr.matrices)
            if (m.rows() != irr.dim || m.cols() != irr.dim)
                throw Error(ErrorCode::InvalidIrrep, "irrep '" + irr.label + "' has a matrix of wrong size");
        if (homomorphism_deviation(t, irr.matrices) > tol)
            throw Error(ErrorCode::InvalidIrrep, "irrep '" + irr.label + "' is not a homomorphism");
        if (unitarity_deviation(irr.matrices) > tol)
            throw Error(ErrorCode::InvalidIrrep, "irrep '" + irr.label + "' is not unitary");
        if (std::abs(character_norm(irr.matrices) - 1.0) > 1e-9)
            throw Error(ErrorCode::InvalidIrrep, "irrep '" + irr.label + "' is reducible");
        sum_sq += irr.dim * irr.dim;
    }
    for (size_t i = 0; i < irreps.size(); ++i)
        for (size_t j = i + 1; j < irreps.size(); ++j)
            if (std::abs(character_overlap(irreps[i], irreps[j])) > 1e-9)
                throw Error(ErrorCode::IncompleteIrrepSet,
                            "irreps '" + irreps[i].label + "' and '" + irreps[j].label + "' are equivalent");
    if (sum_sq != t.order)
        throw Error(ErrorCode::IncompleteIrrepSet,
                    "sum of squared dimensions is " + std::to_string(sum_sq) + ", group order " + std::to_string(t.order));
    std::stable_sort(irreps.begin(), irreps.end(), [](const Irrep &a, const Irrep &b) { return a.dim < b.dim; });
    return irreps;
}

namespace detail {

inline Matrix scalar_matrix(cplx v) {
    Matrix m(1, 1);
    m(0, 0) = v;
    return m;
}

inline std::vector<Irrep> cyclic_irreps(const GroupTable &t) {
    const int n = t.kind_param;
    std::vector<Irrep> out;
    for (int k = 0; k < n; ++k) {
        Irrep irr;
        irr.label = k == 0 ? "trivial" : (n == 2 ? "sign" : "chi" + std::to_string(k));
        irr.dim = 1;
        for (int g = 0; g < n; ++g)
            irr.matrices.push_back(scalar_matrix(std::polar(1.0, 2.0 * std::numbers::pi * k * g / n)));
        out.push_back(std::move(irr));
    }
    return out;
}

inline std::vector<Irrep> dihedral_irreps(const GroupTable &t) {
    const int n = t.kind_param;
    std::vector<Irrep> out;
    auto one_dim = [&](std::string label, int r_sign, int s_sign) {
        Irrep irr{std::move(label), 1, {}};
        for (int x = 0; x < t.order; ++x) {
            const int k = x % n, f = x / n;
            const int v = ((k % 2 == 1 && r_sign < 0) ? -1 : 1) * ((f == 1 && s_sign < 0) ? -1 : 1);
            irr.matrices.push_back(scalar_matrix(static_cast<double>(v)));
        }
        out.push_back(std::move(irr));
    };
    one_dim("trivial", 1, 1);
    one_dim("sign", 1, -1);
    if (n % 2 == 0) {
        one_dim("alt", -1, 1);
        one_dim("alt_sign", -1, -1);
    }
    for (int j = 1; 2 * j < n; ++j) {
        Irrep irr{n == 3 ? "standard" : "rho" + std::to_string(j), 2, {}};
        for (int x = 0; x < t.order; ++x) {
            const int k = x % n, f = x / n;
            const double th = 2.0 * std::numbers::pi * j * k / n;
            Matrix m(2, 2);
            m << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
            if (f == 1) m.col(1) *= -1.0;  // R^k S with S = diag(1, -1)
            irr.matrices.push_back(m);
        }
        out.push_back(std::move(irr));
    }
    return out;
}

}  // namespace detail

/// Complete irrep list of a built-in group, sorted by (dim, label order).
inline std::vector<Irrep> irreps(const GroupTable &t) {
    switch (t.kind) {
        case GroupKind::Cyclic: return validate_irreps(t, detail::cyclic_irreps(t));
        case GroupKind::Dihedral: return validate_irreps(t, detail::dihedral_irreps(t));
        case GroupKind::User: break;
    }
    throw Error(ErrorCode::InvalidConfig, "group '" + t.name + "' is user-defined; supply its irreps explicitly");
}

/// U_g = (+)_a V^a_g (x) 1_{r_a}; blocks follow the irrep order, copies of one
/// irrep are contiguous (index = offset + i * r_a + copy).
struct SemiRegularRep {
    GroupTable group;
    std::vector<Irrep> irreps;
    std::vector<int> multiplicities;
    int dim = 0;
    std::vector<Matrix> matrices;

    bool is_regular() const {
        for (size_t a = 0; a < irreps.size(); ++a)
            if (multiplicities[a] != irreps[a].dim) return false;
        return true;
    }

    const Matrix &operator()(int g) const { return matrices[g]; }
};

inline SemiRegularRep semi_regular_rep(const GroupTable &t, std::vector<Irrep> irrs, std::vector<int> multiplicities) {
    if (multiplicities.size() != irrs.size())
        throw Error(ErrorCode::InvalidConfig, "need one multiplicity per irrep");
    for (size_t a = 0; a < irrs.size(); ++a)
        if (multiplicities[a] < 1)
            throw Error(ErrorCode::ZeroMultiplicity, "irrep '" + irrs[a].label + "' has multiplicity " +
                                                         std::to_string(multiplicities[a]));
    SemiRegularRep rep;
    rep.group = t;
    rep.irreps = std::move(irrs);
    rep.multiplicities = std::move(multiplicities);
    for (size_t a = 0; a < rep.irreps.size(); ++a) rep.dim += rep.irreps[a].dim * rep.multiplicities[a];

    for (int g = 0; g < t.order; ++g) {
        Matrix u = Matrix::Zero(rep.dim, rep.dim);
        int off = 0;
        for (size_t a = 0; a < rep.irreps.size(); ++a) {
            const auto &v = rep.irreps[a].matrices[g];
            const int r = rep.multiplicities[a];
            for (int i = 0; i < v.rows(); ++i)
                for (int j = 0; j < v.cols(); ++j)
                    for (int c = 0; c < r; ++c) u(off + i * r + c, off + j * r + c) = v(i, j);
            off += static_cast<int>(v.rows()) * r;
        }
        rep.matrices.push_back(std::move(u));
    }
    return rep;
}

inline SemiRegularRep semi_regular_rep(const GroupTable &t, std::vector<int> multiplicities) {
    return semi_regular_rep(t, irreps(t), std::move(multiplicities));
}

/// Multiplicities keyed by irrep label; every irrep must be named.
inline SemiRegularRep semi_regular_rep(const GroupTable &t, std::vector<Irrep> irrs,
                                       const std::map<std::string, int> &by_label) {
    std::vector<int> mult;
    for (const auto &irr : irrs) {
        auto it = by_label.find(irr.label);
        mult.push_back(it == by_label.end() ? 0 : it->second);
    }
    for (const auto &[label, r] : by_label) {
        if (std::none_of(irrs.begin(), irrs.end(), [&](const Irrep &i) { return i.label == label; }))
            throw Error(ErrorCode::InvalidConfig, "group '" + t.name + "' has no irrep '" + label + "'");
    }
    return semi_regular_rep(t, std::move(irrs), std::move(mult));
}

inline SemiRegularRep regular_rep(const GroupTable &t, std::vector<Irrep> irrs) {
    std::vector<int> mult;
    for (const auto &irr : irrs) mult.push_back(irr.dim);
    return semi_regular_rep(t, std::move(irrs), std::move(mult));
}

inline SemiRegularRep regular_rep(const GroupTable &t) { return regular_rep(t, irreps(t)); }

struct DeltaMap {
    Eigen::VectorXd weights;

    Matrix matrix() const { return weights.cast<cplx>().asDiagonal(); }
};

inline DeltaMap delta_map(const SemiRegularRep &rep) {
    DeltaMap delta;
    delta.weights.resize(rep.dim);
    int off = 0;
    for (size_t a = 0; a < rep.irreps.size(); ++a) {
        const int block = rep.irreps[a].dim * rep.multiplicities[a];
        const double w = std::pow(static_cast<double>(rep.irreps[a].dim) / rep.multiplicities[a], 0.25);
        delta.weights.segment(off, block).setConstant(w);
        off += block;
    }
    return delta;
}

/// max_g |tr(Delta^4 U_g) - |G| delta_{g,e}|
inline double delta_trace_deviation(const SemiRegularRep &rep, const DeltaMap &delta) {
    const Eigen::VectorXcd d4 = delta.weights.array().pow(4.0).cast<cplx>();
    double dev = 0.0;
    for (int g = 0; g < rep.group.order; ++g) {
        const cplx tr = (d4.asDiagonal() * rep.matrices[g]).trace();
        const double expected = g == rep.group.identity ? rep.group.order : 0.0;
        dev = std::max(dev, std::abs(tr - expected));
    }
    return dev;
}

/// max_g |Delta U_g - U_g Delta|_inf
inline double delta_commutator_deviation(const SemiRegularRep &rep, const DeltaMap &delta) {
    const Matrix d = delta.matrix();
    double dev = 0.0;
    for (const auto &u : rep.matrices) dev = std::max(dev, (d * u - u * d).cwiseAbs().maxCoeff());
    return dev;
}

}  // namespace gipeps
