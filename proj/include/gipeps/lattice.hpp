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

// Square torus lattices, exact contraction of (partial) PEPS into dense state
// vectors, boundary twists and ground-space bases.
//
// Conventions:
//   vertex (x, y) has index y * W + x (row-major from the top-left);
//   horizontal edge v joins the r leg of v to the l leg of its right neighbour,
//   vertical edge N + v joins the b leg of v to the t leg of the vertex below;
//   a twist (g, h) puts U_g on the r side of every horizontal edge in column
//   column_cut and U_h on the b side of every vertical edge in row row_cut;
//   state amplitudes are indexed with site 0 as the most significant digit.

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gipeps/detail/dense_tensor.hpp"
#include "gipeps/error.hpp"
#include "gipeps/group.hpp"
#include "gipeps/tensors.hpp"

namespace gipeps {

struct TorusLattice {
    int width = 0;
    int height = 0;

    TorusLattice() = default;
    TorusLattice(int w, int h) : width(w), height(h) {
        if (w < 2 || h < 2) throw Error(ErrorCode::InvalidLattice, "torus needs width, height >= 2");
    }

    int vertices() const { return width * height; }
    int edges() const { return 2 * vertices(); }
    int vertex(int x, int y) const { return ((y % height + height) % height) * width + ((x % width + width) % width); }
    int x_of(int v) const { return v % width; }
    int y_of(int v) const { return v / width; }

    /// Edge attached to leg `leg` of vertex v.
    int edge(int v, int leg) const {
        const int x = x_of(v), y = y_of(v);
        switch (leg) {
            case kLeft: return vertex(x - 1, y);
            case kRight: return v;
            case kTop: return vertices() + vertex(x, y - 1);
            case kBottom: return vertices() + v;
        }
        throw Error(ErrorCode::InvalidLattice, "bad leg");
    }

    /// (vertex, leg) pairs at the two ends of edge e: plain side first.
    std::pair<std::pair<int, int>, std::pair<int, int>> edge_ends(int e) const {
        if (e < vertices()) {
            const int v = e;
            return {{v, kRight}, {vertex(x_of(v) + 1, y_of(v)), kLeft}};
        }
        const int v = e - vertices();
        return {{v, kBottom}, {vertex(x_of(v), y_of(v) + 1), kTop}};
    }
};

struct BoundaryTwist {
    int g = 0;
    int h = 0;
    int column_cut = -1;  // -1: last column
    int row_cut = -1;     // -1: last row
};

inline BoundaryTwist make_twist(const GroupTable &grp, int g, int h, int column_cut = -1, int row_cut = -1) {
    if (g < 0 || g >= grp.order || h < 0 || h >= grp.order)
        throw Error(ErrorCode::InvalidConfig, "twist element out of range");
    if (!grp.commute(g, h))
        throw Error(ErrorCode::NonCommutingTwist, "elements " + std::to_string(g) + " and " + std::to_string(h) +
                                                      " do not commute");
    return {g, h, column_cut, row_cut};
}

struct StateVector {
    TorusLattice lattice;
    int site_dim = 0;
    Vector amplitudes;

    double norm() const { return amplitudes.norm(); }
    int sites() const { return lattice.vertices(); }
};

inline void require_state_fits(const TorusLattice &lat, int site_dim) {
    require_within_cap(static_cast<std::uint64_t>(site_dim), static_cast<unsigned>(lat.vertices()), "state vector");
}

inline void normalize_or_throw(StateVector &s, double zero_tol = 1e-14) {
    const double nrm = s.norm();
    if (nrm <= zero_tol) throw Error(ErrorCode::ZeroState, "state norm " + std::to_string(nrm));
    s.amplitudes /= nrm;
}

/// Unnormalized G-isometric PEPS with twist, by absorbing vertices in index order.
inline StateVector contract_unnormalized(const TorusLattice &lat, const SiteTensor &tensor,
                                         const BoundaryTwist &twist) {
    const GroupTable &grp = tensor.rep.group;
    if (!grp.commute(twist.g, twist.h))
        throw Error(ErrorCode::NonCommutingTwist, "twist elements do not commute");
    require_state_fits(lat, tensor.sym_dim);

    const int n = lat.vertices();
    const int dim = tensor.bond_dim();
    const int col_cut = twist.column_cut < 0 ? lat.width - 1 : twist.column_cut % lat.width;
    const int row_cut = twist.row_cut < 0 ? lat.height - 1 : twist.row_cut % lat.height;
    const Matrix id = Matrix::Identity(dim, dim);
    const Matrix phys = tensor.physical_map();
    const int phys_label_base = lat.edges();

    detail::DenseTensor acc;
    for (int v = 0; v < n; ++v) {
        Matrix m = phys;
        if (lat.x_of(v) == col_cut && twist.g != grp.identity) m = m * kron4(id, id, tensor.rep(twist.g), id);
        if (lat.y_of(v) == row_cut && twist.h != grp.identity) m = m * kron4(id, id, id, tensor.rep(twist.h));

        detail::DenseTensor site;
        site.labels = {phys_label_base + v, lat.edge(v, kLeft), lat.edge(v, kTop), lat.edge(v, kRight),
                       lat.edge(v, kBottom)};
        site.dims = {m.rows(), dim, dim, dim, dim};
        site.data.resize(static_cast<size_t>(m.size()));
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) site.data[static_cast<size_t>(i * m.cols() + j)] = m(i, j);
        acc = v == 0 ? std::move(site) : detail::contract(acc, site);
    }
    std::vector<int> out_labels(n);
    for (int v = 0; v < n; ++v) out_labels[v] = phys_label_base + v;
    acc = detail::permute(acc, out_labels);

    StateVector s;
    s.lattice = lat;
    s.site_dim = tensor.sym_dim;
    s.amplitudes = Eigen::Map<const Vector>(acc.data.data(), static_cast<Eigen::Index>(acc.data.size()));
    return s;
}

inline StateVector contract_isometric_state(const TorusLattice &lat, const SiteTensor &tensor,
                                            const BoundaryTwist &twist = {}) {
    StateVector s = contract_unnormalized(lat, tensor, twist);
    normalize_or_throw(s);
    return s;
}

inline StateVector contract_isometric_state(const TorusLattice &lat, const SemiRegularRep &rep,
                                            const BoundaryTwist &twist = {}) {
    return contract_isometric_state(lat, build_site_tensor(rep), twist);
}

/// In place: op acting on site `site`, identity elsewhere.
inline void apply_site_operator(Vector &amps, int sites, int site_dim, int site, const Matrix &op) {
    if (op.rows() != site_dim || op.cols() != site_dim)
        throw Error(ErrorCode::DimensionMismatch, "site operator has wrong size");
    std::int64_t inner = 1;
    for (int k = site + 1; k < sites; ++k) inner *= site_dim;
    const std::int64_t outer = amps.size() / (inner * site_dim);
    Matrix block(site_dim, inner);
    for (std::int64_t o = 0; o < outer; ++o) {
        // Row-major (site_dim x inner) slab viewed as a column-major (inner x site_dim) matrix.
        Eigen::Map<Matrix> slab(amps.data() + o * site_dim * inner, inner, site_dim);
        block = op * slab.transpose();
        slab = block.transpose();
    }
}

inline void apply_deformation(StateVector &s, const Deformation &def) {
    apply_site_operator(s.amplitudes, s.sites(), s.site_dim, def.site, def.matrix);
}

inline void check_deformation_sites(const TorusLattice &lat, const std::vector<Deformation> &defs) {
    std::vector<bool> seen(lat.vertices(), false);
    for (const auto &d : defs) {
        if (d.site < 0 || d.site >= lat.vertices())
            throw Error(ErrorCode::InvalidConfig, "deformation site " + std::to_string(d.site) + " out of range");
        if (seen[d.site]) throw Error(ErrorCode::InvalidConfig, "two deformations on site " + std::to_string(d.site));
        seen[d.site] = true;
    }
}

/// (A^1 (x) ... (x) A^t (x) 1)|iso; K>, normalized. The deformation list
/// fixes the growth order; entry k acts on vertex deformations[k].site.
inline StateVector partial_peps_state(const TorusLattice &lat, const SiteTensor &tensor,
                                      const std::vector<Deformation> &deformations, int t,
                                      const BoundaryTwist &twist = {}) {
    if (t < 0 || t > static_cast<int>(deformations.size()))
        throw Error(ErrorCode::InvalidConfig, "step t out of range");
    check_deformation_sites(lat, deformations);
    StateVector s = contract_unnormalized(lat, tensor, twist);
    normalize_or_throw(s);
    for (int k = 0; k < t; ++k) apply_deformation(s, deformations[k]);
    normalize_or_throw(s);
    return s;
}

struct GroundProjector {
    int step = 0;
    Matrix basis;  // orthonormal columns
    int rank = 0;
    double rank_tol = 1e-10;

    Vector apply(const Vector &v) const { return basis * (basis.adjoint() * v); }
    double weight(const Vector &v) const { return (basis.adjoint() * v).squaredNorm(); }
};

/// Orthonormal basis of the span of the given columns; singular values below
/// rank_tol * sigma_max are dropped.
inline Matrix orthonormal_span(const Matrix &cols, double rank_tol = 1e-10) {
    const Eigen::Index k = cols.cols();
    Eigen::HouseholderQR<Matrix> qr(cols);
    const Matrix q = qr.householderQ() * Matrix::Identity(cols.rows(), k);
    const Matrix r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    Eigen::JacobiSVD<Matrix> svd(r, Eigen::ComputeFullU);
    const auto &sv = svd.singularValues();
    Eigen::Index rank = 0;
    while (rank < sv.size() && sv(rank) > rank_tol * sv(0)) ++rank;
    return q * svd.matrixU().leftCols(rank);
}

/// Normalized twisted isometric states for every commuting pair (g, h).
struct TwistedFamily {
    std::vector<BoundaryTwist> twists;
    std::vector<StateVector> states;
};

inline TwistedFamily isometric_twisted_states(const TorusLattice &lat, const SiteTensor &tensor) {
    TwistedFamily fam;
    for (auto [g, h] : tensor.rep.group.commuting_pairs()) {
        fam.twists.push_back({g, h, -1, -1});
        fam.states.push_back(contract_isometric_state(lat, tensor, fam.twists.back()));
    }
    return fam;
}

inline GroundProjector projector_from_states(int step, const std::vector<StateVector> &states,
                                             double rank_tol = 1e-10) {
    if (states.empty()) throw Error(ErrorCode::InvalidConfig, "no states to span");
    Matrix cols(states[0].amplitudes.size(), static_cast<Eigen::Index>(states.size()));
    for (size_t i = 0; i < states.size(); ++i) cols.col(static_cast<Eigen::Index>(i)) = states[i].amplitudes;
    GroundProjector p;
    p.step = step;
    p.rank_tol = rank_tol;
    p.basis = orthonormal_span(cols, rank_tol);
    p.rank = static_cast<int>(p.basis.cols());
    return p;
}

/// Applies deformations [from, to) to every state of the family, renormalizing.
inline void advance_family(TwistedFamily &fam, const std::vector<Deformation> &defs, int from, int to) {
    for (auto &s : fam.states) {
        for (int k = from; k < to; ++k) apply_deformation(s, defs[k]);
        normalize_or_throw(s);
    }
}

/// P_t: span of |A^1 ... A^t; K> over all commuting twists K.
inline GroundProjector ground_projector(const TorusLattice &lat, const SiteTensor &tensor,
                                        const std::vector<Deformation> &deformations, int t,
                                        double rank_tol = 1e-10) {
    if (t < 0 || t > static_cast<int>(deformations.size()))
        throw Error(ErrorCode::InvalidConfig, "step t out of range");
    check_deformation_sites(lat, deformations);
    TwistedFamily fam = isometric_twisted_states(lat, tensor);
    advance_family(fam, deformations, 0, t);
    return projector_from_states(t, fam.states, rank_tol);
}

/// All projectors P_0 .. P_T for the first T deformations, sharing one family.
inline std::vector<GroundProjector> ground_projector_sequence(const TorusLattice &lat, const SiteTensor &tensor,
                                                              const std::vector<Deformation> &deformations,
                                                              double rank_tol = 1e-10) {
    check_deformation_sites(lat, deformations);
    TwistedFamily fam = isometric_twisted_states(lat, tensor);
    std::vector<GroundProjector> out;
    out.push_back(projector_from_states(0, fam.states, rank_tol));
    for (int t = 0; t < static_cast<int>(deformations.size()); ++t) {
        advance_family(fam, deformations, t, t + 1);
        out.push_back(projector_from_states(t + 1, fam.states, rank_tol));
    }
    return out;
}

/// Lifts a compressed state into the ambient virtual space (C^D)^(x4N) via sym_basis.
inline Vector embed_ambient(const StateVector &s, const SiteTensor &tensor) {
    const int n = s.sites();
    const Eigen::Index big = tensor.sym_basis.rows();
    require_within_cap(static_cast<std::uint64_t>(big), static_cast<unsigned>(n), "ambient state");
    Vector cur = s.amplitudes;
    std::int64_t done_dim = 1;  // product of already-lifted leading site dims
    std::int64_t rest = cur.size();
    for (int v = 0; v < n; ++v) {
        rest /= s.site_dim;
        Vector next(static_cast<Eigen::Index>(done_dim * big * rest));
        for (std::int64_t o = 0; o < done_dim; ++o) {
            Eigen::Map<const Matrix> in(cur.data() + o * s.site_dim * rest, rest, s.site_dim);
            Eigen::Map<Matrix> out(next.data() + o * big * rest, rest, big);
            out = in * tensor.sym_basis.transpose();
        }
        cur = std::move(next);
        done_dim *= big;
    }
    return cur;
}

}  // namespace gipeps
