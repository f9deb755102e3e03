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

// JSON, CSV and binary serialization of groups, deformations, states,
// spectra and protocol traces.

#pragma once

#include <nlohmann/json.hpp>

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "gipeps/error.hpp"
#include "gipeps/group.hpp"
#include "gipeps/lattice.hpp"
#include "gipeps/protocol.hpp"
#include "gipeps/spectral.hpp"
#include "gipeps/tensors.hpp"

namespace gipeps {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Matrices: {"re": [[...], ...], "im": [[...], ...]}, row-major; "im" optional.

inline json matrix_to_json(const Matrix &m) {
    json re = json::array(), im = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json rr = json::array(), ri = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            rr.push_back(m(i, j).real());
            ri.push_back(m(i, j).imag());
        }
        re.push_back(std::move(rr));
        im.push_back(std::move(ri));
    }
    return json{{"re", std::move(re)}, {"im", std::move(im)}};
}

inline Matrix matrix_from_json(const json &j, const std::string &what) {
    auto bad = [&](const std::string &why) { return Error(ErrorCode::InvalidConfig, what + ": " + why); };
    if (!j.is_object() || !j.contains("re")) throw bad("expected {re, im}");
    const json &re = j.at("re");
    if (!re.is_array() || re.empty() || !re[0].is_array()) throw bad("'re' must be a nested array");
    const auto rows = static_cast<Eigen::Index>(re.size());
    const auto cols = static_cast<Eigen::Index>(re[0].size());
    const bool has_im = j.contains("im") && !j.at("im").is_null();
    if (has_im && (!j.at("im").is_array() || j.at("im").size() != re.size())) throw bad("'im' shape differs");
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        if (!re[i].is_array() || static_cast<Eigen::Index>(re[i].size()) != cols) throw bad("ragged rows");
        if (has_im && j.at("im")[i].size() != re[i].size()) throw bad("'im' shape differs");
        for (Eigen::Index j2 = 0; j2 < cols; ++j2) {
            if (!re[i][j2].is_number()) throw bad("non-numeric entry");
            const double r = re[i][j2].get<double>();
            double c = 0.0;
            if (has_im) {
                if (!j.at("im")[i][j2].is_number()) throw bad("non-numeric entry");
                c = j.at("im")[i][j2].get<double>();
            }
            m(i, j2) = cplx(r, c);
        }
    }
    return m;
}

// ---------------------------------------------------------------------------
// Groups.

struct GroupData {
    GroupTable table;
    std::vector<Irrep> irreps;
};

/// {order, mult_table, irreps: [{dim, label?, matrices: [{re, im}, ...]}]}.
/// mult_table may be flat (order^2) or nested (order rows).
inline GroupData group_from_json(const json &j) {
    if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "group document must be an object");
    for (const char *key : {"order", "mult_table"})
        if (!j.contains(key)) throw Error(ErrorCode::InvalidConfig, std::string("group document lacks '") + key + "'");
    if (!j.at("order").is_number_integer()) throw Error(ErrorCode::InvalidConfig, "'order' must be an integer");
    const int order = j.at("order").get<int>();
    std::vector<int> mult;
    for (const auto &row : j.at("mult_table")) {
        if (row.is_array()) {
            for (const auto &v : row) mult.push_back(v.get<int>());
        } else {
            mult.push_back(row.get<int>());
        }
    }
    GroupData out;
    out.table = make_group_table(j.value("name", std::string("user")), order, std::move(mult));
    if (!j.contains("irreps")) throw Error(ErrorCode::InvalidConfig, "group document lacks 'irreps'");

    int idx = 0;
    for (const auto &ji : j.at("irreps")) {
        Irrep irr;
        irr.dim = ji.at("dim").get<int>();
        irr.label = ji.value("label", "irrep" + std::to_string(idx));
        for (const auto &jm : ji.at("matrices")) irr.matrices.push_back(matrix_from_json(jm, "irrep " + irr.label));
        out.irreps.push_back(std::move(irr));
        ++idx;
    }
    out.irreps = validate_irreps(out.table, std::move(out.irreps));
    return out;
}

inline json group_to_json(const GroupTable &t, const std::vector<Irrep> &irrs) {
    json irreps = json::array();
    for (const auto &irr : irrs) {
        json mats = json::array();
        for (const auto &m : irr.matrices) mats.push_back(matrix_to_json(m));
        irreps.push_back({{"label", irr.label}, {"dim", irr.dim}, {"matrices", std::move(mats)}});
    }
    return {{"name", t.name}, {"order", t.order}, {"mult_table", t.mult}, {"irreps", std::move(irreps)}};
}

/// A built-in name or an inline user document.
inline GroupData resolve_group(const json &spec) {
    if (spec.is_string()) {
        GroupData g;
        g.table = build_group(spec.get<std::string>());
        g.irreps = irreps(g.table);
        return g;
    }
    return group_from_json(spec);
}

// ---------------------------------------------------------------------------
// Deformations.

inline json deformation_to_json(const Deformation &d) {
    return {{"site", d.site},
            {"seed", d.seed},
            {"kappa_target", d.kappa_target},
            {"kappa_sym", d.kappa_sym},
            {"matrix", matrix_to_json(d.matrix)}};
}

inline Deformation deformation_from_json(const json &j, const SiteTensor &tensor) {
    if (!j.is_object() || !j.contains("site") || !j.contains("matrix"))
        throw Error(ErrorCode::InvalidConfig, "deformation needs 'site' and 'matrix'");
    Deformation d = deformation_from_matrix(j.at("site").get<int>(), matrix_from_json(j.at("matrix"), "deformation"),
                                            tensor);
    d.seed = j.value("seed", std::uint64_t{0});
    d.kappa_target = j.value("kappa_target", d.kappa_sym);
    return d;
}

inline json deformations_to_json(const std::vector<Deformation> &defs) {
    json arr = json::array();
    for (const auto &d : defs) arr.push_back(deformation_to_json(d));
    return arr;
}

inline std::vector<Deformation> deformations_from_json(const json &j, const SiteTensor &tensor) {
    const json &arr = j.is_object() && j.contains("deformations") ? j.at("deformations") : j;
    if (!arr.is_array()) throw Error(ErrorCode::InvalidConfig, "expected an array of deformations");
    std::vector<Deformation> out;
    for (const auto &jd : arr) out.push_back(deformation_from_json(jd, tensor));
    return out;
}

/// FNV-1a over (site, rows, cols, re/im bytes) of every deformation, in order.
inline std::uint64_t deformation_hash(const std::vector<Deformation> &defs) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto eat = [&h](const void *p, size_t n) {
        const auto *b = static_cast<const unsigned char *>(p);
        for (size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 0x100000001b3ULL;
        }
    };
    for (const auto &d : defs) {
        const std::int64_t head[3] = {d.site, d.matrix.rows(), d.matrix.cols()};
        eat(head, sizeof(head));
        for (Eigen::Index j = 0; j < d.matrix.cols(); ++j)
            for (Eigen::Index i = 0; i < d.matrix.rows(); ++i) {
                const double re = d.matrix(i, j).real(), im = d.matrix(i, j).imag();
                eat(&re, sizeof(re));
                eat(&im, sizeof(im));
            }
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

// ---------------------------------------------------------------------------
// States: little-endian interleaved (re, im) doubles plus a JSON sidecar.

namespace detail {

inline void put_le(std::ostream &os, double v) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
    os.write(reinterpret_cast<const char *>(b), 8);
}

inline double get_le(const unsigned char *b) {
    std::uint64_t bits = 0;
    for (int i = 7; i >= 0; --i) bits = (bits << 8) | b[i];
    return std::bit_cast<double>(bits);
}

}  // namespace detail

inline void write_state_binary(std::ostream &os, const Vector &amps) {
    for (Eigen::Index i = 0; i < amps.size(); ++i) {
        detail::put_le(os, amps(i).real());
        detail::put_le(os, amps(i).imag());
    }
}

inline Vector read_state_binary(std::istream &is) {
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    if (buf.size() % 16 != 0) throw Error(ErrorCode::InvalidConfig, "state file length is not a multiple of 16");
    Vector v(static_cast<Eigen::Index>(buf.size() / 16));
    for (Eigen::Index i = 0; i < v.size(); ++i)
        v(i) = cplx(detail::get_le(buf.data() + 16 * i), detail::get_le(buf.data() + 16 * i + 8));
    return v;
}

inline json state_sidecar(const StateVector &s, const SiteTensor &tensor, const BoundaryTwist &twist,
                          const std::vector<Deformation> &applied) {
    json mult = json::object();
    for (size_t a = 0; a < tensor.rep.irreps.size(); ++a) mult[tensor.rep.irreps[a].label] = tensor.rep.multiplicities[a];
    return {{"format", "complex128-le-interleaved"},
            {"amplitudes", s.amplitudes.size()},
            {"lattice", {{"W", s.lattice.width}, {"H", s.lattice.height}}},
            {"site_dim", s.site_dim},
            {"site_order", "site 0 most significant"},
            {"rep", {{"group", tensor.rep.group.name}, {"multiplicities", mult}, {"bond_dim", tensor.bond_dim()}}},
            {"twist", {{"g", twist.g}, {"h", twist.h}, {"column_cut", twist.column_cut}, {"row_cut", twist.row_cut}}},
            {"deformations", applied.size()},
            {"deformation_hash", hex64(deformation_hash(applied))}};
}

/// Writes <stem>.bin and <stem>.json.
inline void export_state(const std::string &stem, const StateVector &s, const SiteTensor &tensor,
                         const BoundaryTwist &twist, const std::vector<Deformation> &applied) {
    std::ofstream bin(stem + ".bin", std::ios::binary);
    if (!bin) throw Error(ErrorCode::InvalidConfig, "cannot write " + stem + ".bin");
    write_state_binary(bin, s.amplitudes);
    std::ofstream side(stem + ".json");
    if (!side) throw Error(ErrorCode::InvalidConfig, "cannot write " + stem + ".json");
    side << state_sidecar(s, tensor, twist, applied).dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Tables.

/// Round-trip decimal form (17 significant digits).
inline std::string fmt_double(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

inline void write_spectrum_csv(std::ostream &os, const JordanSpectrum &js, double kappa, int step = -1,
                               bool header = true) {
    const double bound = 1.0 / (kappa * kappa);
    if (header) os << (step >= 0 ? "step," : "") << "block,d_k,margin\n";
    for (int k = 0; k < static_cast<int>(js.r_vectors.cols()); ++k) {
        if (step >= 0) os << step << ',';
        const double d = js.overlap(k);
        os << k << ',' << fmt_double(d) << ',' << fmt_double(d - bound) << '\n';
    }
}

inline json trace_to_json(const ProtocolTrace &tr) {
    json steps = json::array();
    for (const auto &s : tr.steps)
        steps.push_back({{"step", s.step},
                         {"outcomes", s.outcomes},
                         {"forward_measurements", s.forward_measurements},
                         {"success", s.success}});
    json j = {{"seed", tr.seed},
              {"trial", tr.trial},
              {"m", tr.m},
              {"success", tr.success},
              {"error", tr.error.empty() ? json(nullptr) : json(tr.error)},
              {"failed_step", tr.failed_step},
              {"total_measurements", tr.total_measurements},
              {"final_fidelity", tr.final_fidelity},
              {"final_weights", tr.final_weights},
              {"rewind_checks", tr.rewind_checks},
              {"rewind_max_deviation", tr.rewind_max_deviation},
              {"steps", std::move(steps)}};
    return j;
}

inline void write_traces_jsonl(std::ostream &os, const std::vector<ProtocolTrace> &traces) {
    for (const auto &tr : traces) os << trace_to_json(tr).dump() << '\n';
}

struct AggregateRow {
    int step = 0;
    std::int64_t m = 0;
    double empirical_fail = 0.0;
    double analytic_fail = 0.0;
    double bound = 0.0;
    double d_min = 0.0;
    double kappa = 1.0;
};

inline void write_aggregate_csv(std::ostream &os, const std::vector<AggregateRow> &rows) {
    os << "step,m,empirical_fail,analytic_fail,bound,d_min,kappa\n";
    for (const auto &r : rows)
        os << r.step << ',' << r.m << ',' << fmt_double(r.empirical_fail) << ',' << fmt_double(r.analytic_fail) << ','
           << fmt_double(r.bound) << ',' << fmt_double(r.d_min) << ',' << fmt_double(r.kappa) << '\n';
}

}  // namespace gipeps
