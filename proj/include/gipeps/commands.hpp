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

// Experiment commands behind the CLI. Each takes a raw JSON config, fills in
// every default explicitly, validates it, runs, and returns an exit code with
// a JSON report that echoes the resolved config. Files go to opts.out_dir
// when it is set.
//
// Exit codes: 0 pass, 2 config or validation error, 3 resource cap,
// 4 a checked bound failed.

#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "gipeps/io.hpp"
#include "gipeps/version.hpp"

namespace gipeps {

enum ExitCode : int { kExitPass = 0, kExitConfig = 2, kExitResource = 3, kExitBound = 4 };

struct RunOptions {
    std::string out_dir;                  // empty: no files
    std::optional<std::uint64_t> seed;    // overrides config "seed"
    std::optional<std::int64_t> trials;   // overrides config "trials"
    int threads = 1;
};

struct CommandResult {
    int exit_code = kExitPass;
    json report;
};

namespace detail {

inline Error config_error(const std::string &msg) { return Error(ErrorCode::InvalidConfig, msg); }

inline void reject_unknown(const json &j, const json &defaults, const std::string &where) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!defaults.contains(it.key())) throw config_error("unknown key '" + where + it.key() + "'");
}

/// defaults <- user, one level deep for nested objects listed in `nested`.
inline json merge_config(const json &defaults, const json &user, const std::set<std::string> &nested) {
    if (!user.is_object()) throw config_error("config must be a JSON object");
    reject_unknown(user, defaults, "");
    json out = defaults;
    for (auto it = user.begin(); it != user.end(); ++it) {
        if (nested.count(it.key()) && it.value().is_object() && defaults.at(it.key()).is_object()) {
            reject_unknown(it.value(), defaults.at(it.key()), it.key() + ".");
            for (auto jt = it.value().begin(); jt != it.value().end(); ++jt) out[it.key()][jt.key()] = jt.value();
        } else {
            out[it.key()] = it.value();
        }
    }
    return out;
}

inline double positive_number(const json &j, const std::string &what) {
    if (!j.is_number() || !(j.get<double>() > 0.0)) throw config_error("'" + what + "' must be a positive number");
    return j.get<double>();
}

inline std::int64_t integer(const json &j, const std::string &what, std::int64_t lo) {
    if (!j.is_number_integer() || j.get<std::int64_t>() < lo)
        throw config_error("'" + what + "' must be an integer >= " + std::to_string(lo));
    return j.get<std::int64_t>();
}

inline json common_defaults() {
    return {{"group", "Z2"}, {"rep", {{"multiplicities", "regular"}}}, {"seed", 0}};
}

inline json lattice_defaults(json cfg) {
    cfg["lattice"] = {{"W", 2}, {"H", 2}};
    cfg["order"] = "row-major";
    cfg["deformations"] = {{"mode", "random"}, {"kappa", 2.0}, {"seed", nullptr}, {"sites", "all"}, {"file", nullptr}};
    return cfg;
}

inline void write_file(const RunOptions &opts, const std::string &name, const std::string &content) {
    if (opts.out_dir.empty()) return;
    std::filesystem::create_directories(opts.out_dir);
    const auto path = std::filesystem::path(opts.out_dir) / name;
    std::ofstream os(path, std::ios::binary);
    if (!os) throw config_error("cannot write " + path.string());
    os << content;
}

inline SemiRegularRep build_rep(const GroupData &g, const json &mult) {
    if (mult.is_string()) {
        if (mult.get<std::string>() != "regular") throw config_error("rep.multiplicities must be \"regular\", a map or a list");
        return regular_rep(g.table, g.irreps);
    }
    if (mult.is_object()) {
        std::map<std::string, int> by_label;
        for (auto it = mult.begin(); it != mult.end(); ++it) by_label[it.key()] = static_cast<int>(integer(it.value(), "rep.multiplicities." + it.key(), 0));
        return semi_regular_rep(g.table, g.irreps, by_label);
    }
    if (mult.is_array()) {
        std::vector<int> v;
        for (const auto &x : mult) v.push_back(static_cast<int>(integer(x, "rep.multiplicities[]", 0)));
        return semi_regular_rep(g.table, g.irreps, v);
    }
    throw config_error("rep.multiplicities must be \"regular\", a map or a list");
}

inline json multiplicity_echo(const SemiRegularRep &rep) {
    json m = json::object();
    for (size_t a = 0; a < rep.irreps.size(); ++a) m[rep.irreps[a].label] = rep.multiplicities[a];
    return m;
}

inline TorusLattice build_lattice(const json &cfg) {
    const json &l = cfg.at("lattice");
    return TorusLattice(static_cast<int>(integer(l.at("W"), "lattice.W", 0)),
                        static_cast<int>(integer(l.at("H"), "lattice.H", 0)));
}

inline std::vector<int> growth_order(const TorusLattice &lat, const json &order) {
    std::vector<int> out;
    if (order.is_string()) {
        const auto s = order.get<std::string>();
        if (s == "row-major") {
            for (int v = 0; v < lat.vertices(); ++v) out.push_back(v);
        } else if (s == "column-major") {
            for (int x = 0; x < lat.width; ++x)
                for (int y = 0; y < lat.height; ++y) out.push_back(lat.vertex(x, y));
        } else {
            throw config_error("order must be \"row-major\", \"column-major\" or a vertex list");
        }
        return out;
    }
    if (!order.is_array()) throw config_error("order must be \"row-major\", \"column-major\" or a vertex list");
    std::set<int> seen;
    for (const auto &x : order) {
        const int v = static_cast<int>(integer(x, "order[]", 0));
        if (v >= lat.vertices() || !seen.insert(v).second) throw config_error("order must be a permutation of the vertices");
        out.push_back(v);
    }
    if (static_cast<int>(out.size()) != lat.vertices()) throw config_error("order must list every vertex");
    return out;
}

/// One deformation per vertex, in growth order.
inline std::vector<Deformation> build_deformations(const TorusLattice &lat, const SiteTensor &tensor, const json &cfg,
                                                   double kappa, std::uint64_t seed) {
    const json &dj = cfg.at("deformations");
    const auto order = growth_order(lat, cfg.at("order"));
    const auto mode = dj.at("mode").get<std::string>();
    std::vector<Deformation> defs;
    if (mode == "file") {
        if (!dj.at("file").is_string()) throw config_error("deformations.file must be a path");
        std::ifstream is(dj.at("file").get<std::string>());
        if (!is) throw config_error("cannot read " + dj.at("file").get<std::string>());
        json doc;
        try {
            doc = json::parse(is);
        } catch (const json::exception &e) {
            throw config_error(std::string("deformation file: ") + e.what());
        }
        auto loaded = deformations_from_json(doc, tensor);
        std::map<int, Deformation> by_site;
        for (auto &d : loaded) by_site[d.site] = std::move(d);
        for (int v : order) defs.push_back(by_site.count(v) ? by_site[v] : identity_deformation(v, tensor));
        if (by_site.size() != loaded.size()) throw config_error("deformation file repeats a site");
        for (const auto &[site, d] : by_site)
            if (site < 0 || site >= lat.vertices()) throw config_error("deformation file site out of range");
        return defs;
    }
    std::set<int> chosen;
    if (dj.at("sites").is_string()) {
        if (dj.at("sites").get<std::string>() != "all") throw config_error("deformations.sites must be \"all\" or a list");
        for (int v = 0; v < lat.vertices(); ++v) chosen.insert(v);
    } else if (dj.at("sites").is_array()) {
        for (const auto &x : dj.at("sites")) {
            const int v = static_cast<int>(integer(x, "deformations.sites[]", 0));
            if (v >= lat.vertices()) throw config_error("deformations.sites entry out of range");
            chosen.insert(v);
        }
    } else {
        throw config_error("deformations.sites must be \"all\" or a list");
    }
    for (int v : order) {
        if (mode == "identity" || !chosen.count(v)) {
            defs.push_back(identity_deformation(v, tensor));
        } else if (mode == "random") {
            defs.push_back(random_deformation(v, tensor, kappa, seed));
        } else {
            throw config_error("deformations.mode must be random, identity or file");
        }
    }
    return defs;
}

/// Fills the deformation seed from the top-level seed when unset.
inline void resolve_deformation_seed(json &cfg) {
    auto &d = cfg["deformations"];
    if (d["seed"].is_null()) d["seed"] = cfg["seed"];
    integer(d["seed"], "deformations.seed", 0);
    if (d["mode"] == "random") positive_number(d["kappa"], "deformations.kappa");
}

inline json header(const std::string &command, const json &resolved) {
    return {{"command", command}, {"version", std::string(kVersion)}, {"resolved_config", resolved}};
}

/// Runs body(resolved, report), mapping errors to exit codes.
template <class Resolve, class Body>
CommandResult guarded(const std::string &command, Resolve &&resolve, Body &&body) {
    CommandResult res;
    json resolved;
    try {
        resolved = resolve();
        res.report = header(command, resolved);
        res.exit_code = body(resolved, res.report);
        res.report["status"] = res.exit_code == kExitPass ? "pass" : "fail";
    } catch (const Error &e) {
        if (res.report.is_null()) res.report = header(command, resolved);
        res.report["status"] = "error";
        res.report["error"] = {{"code", std::string(error_name(e.code()))}, {"message", e.what()}};
        switch (e.code()) {
            case ErrorCode::DimensionOverflow: res.exit_code = kExitResource; break;
            case ErrorCode::BoundViolation: res.exit_code = kExitBound; break;
            default: res.exit_code = kExitConfig;
        }
    } catch (const json::exception &e) {
        if (res.report.is_null()) res.report = header(command, resolved);
        res.report["status"] = "error";
        res.report["error"] = {{"code", "InvalidConfig"}, {"message", e.what()}};
        res.exit_code = kExitConfig;
    }
    return res;
}

inline json check(double deviation, double tol) {
    return {{"deviation", deviation}, {"tolerance", tol}, {"pass", deviation <= tol}};
}

}  // namespace detail

// ---------------------------------------------------------------------------

inline json resolve_verify_group(const json &raw, const RunOptions &opts) {
    json d = detail::common_defaults();
    d["tolerances"] = {{"irrep", 1e-12}, {"delta_trace", 1e-10}, {"regular_weights", 1e-12}};
    d["outputs"] = {{"report", "report.json"}};
    json cfg = detail::merge_config(d, raw, {"rep", "tolerances", "outputs"});
    if (opts.seed) cfg["seed"] = *opts.seed;
    return cfg;
}

inline CommandResult cmd_verify_group(const json &raw, const RunOptions &opts = {}) {
    return detail::guarded("verify-group", [&] { return resolve_verify_group(raw, opts); },
                           [&](const json &cfg, json &report) {
        const GroupData g = resolve_group(cfg.at("group"));
        const SemiRegularRep rep = detail::build_rep(g, cfg.at("rep").at("multiplicities"));
        const json &tol = cfg.at("tolerances");
        const double t_irr = tol.at("irrep").get<double>();

        double hom = 0.0, uni = 0.0, orth = 0.0;
        int sum_sq = 0;
        for (size_t a = 0; a < g.irreps.size(); ++a) {
            hom = std::max(hom, homomorphism_deviation(g.table, g.irreps[a].matrices));
            uni = std::max(uni, unitarity_deviation(g.irreps[a].matrices));
            sum_sq += g.irreps[a].dim * g.irreps[a].dim;
            for (size_t b = 0; b < g.irreps.size(); ++b)
                orth = std::max(orth, std::abs(std::abs(character_overlap(g.irreps[a], g.irreps[b])) - (a == b ? 1.0 : 0.0)));
        }
        const DeltaMap delta = delta_map(rep);
        const double wdev = (delta.weights.array() - 1.0).abs().maxCoeff();
        const bool predicate = rep.is_regular() == (wdev <= tol.at("regular_weights").get<double>());

        json checks = {
            {"irrep_homomorphism", detail::check(hom, t_irr)},
            {"irrep_unitarity", detail::check(uni, t_irr)},
            {"character_orthogonality", detail::check(orth, 1e-9)},
            {"completeness", detail::check(std::abs(sum_sq - g.table.order), 0.0)},
            {"rep_homomorphism", detail::check(homomorphism_deviation(g.table, rep.matrices), t_irr)},
            {"delta_trace", detail::check(delta_trace_deviation(rep, delta), tol.at("delta_trace").get<double>())},
            {"delta_commutator", detail::check(delta_commutator_deviation(rep, delta), t_irr)},
            {"regular_iff_delta_identity", {{"regular", rep.is_regular()}, {"max_weight_deviation", wdev}, {"pass", predicate}}},
        };
        bool ok = true;
        for (auto &[k, v] : checks.items()) ok = ok && v.at("pass").get<bool>();
        json irreps = json::array();
        for (const auto &irr : g.irreps) irreps.push_back({{"label", irr.label}, {"dim", irr.dim}});
        report["group"] = {{"name", g.table.name}, {"order", g.table.order}, {"abelian", g.table.is_abelian()}, {"irreps", irreps}};
        report["rep"] = {{"dim", rep.dim}, {"multiplicities", detail::multiplicity_echo(rep)}, {"delta_weights", std::vector<double>(delta.weights.data(), delta.weights.data() + delta.weights.size())}};
        report["checks"] = checks;
        detail::write_file(opts, cfg.at("outputs").at("report").get<std::string>(), report.dump(2) + "\n");
        return ok ? kExitPass : kExitBound;
    });
}

// ---------------------------------------------------------------------------

inline json resolve_verify_appendix(const json &raw, const RunOptions &opts) {
    json d = detail::common_defaults();
    d["reps"] = nullptr;
    d["tolerances"] = {{"gram", 1e-10}, {"entry", 1e-10}};
    d["outputs"] = {{"report", "report.json"}, {"table", "appendix.csv"}};
    json cfg = detail::merge_config(d, raw, {"rep", "tolerances", "outputs"});
    if (opts.seed) cfg["seed"] = *opts.seed;
    if (cfg["reps"].is_null()) cfg["reps"] = json::array({{{"group", cfg["group"]}, {"multiplicities", cfg["rep"]["multiplicities"]}}});
    if (!cfg["reps"].is_array() || cfg["reps"].empty()) throw detail::config_error("reps must be a non-empty list");
    for (auto &r : cfg["reps"]) {
        if (!r.is_object() || !r.contains("group")) throw detail::config_error("each reps entry needs a group");
        if (!r.contains("multiplicities")) r["multiplicities"] = "regular";
        detail::reject_unknown(r, json{{"group", 0}, {"multiplicities", 0}}, "reps[].");
    }
    return cfg;
}

inline CommandResult cmd_verify_appendix(const json &raw, const RunOptions &opts = {}) {
    return detail::guarded("verify-appendix", [&] { return resolve_verify_appendix(raw, opts); },
                           [&](const json &cfg, json &report) {
        const double t_gram = cfg.at("tolerances").at("gram").get<double>();
        const double t_entry = cfg.at("tolerances").at("entry").get<double>();
        json rows = json::array();
        std::ostringstream csv;
        csv << "group,bond_dim,regular,gram_deviation,entry_check,max_entry_error,decomposition_deviation,route,pass\n";
        bool ok = true;
        for (const auto &r : cfg.at("reps")) {
            const GroupData g = resolve_group(r.at("group"));
            const SemiRegularRep rep = detail::build_rep(g, r.at("multiplicities"));
            const RegroupReport rr = verify_regroup_equivalence(rep, t_entry);
            const bool pass = rr.gram_deviation <= t_gram && rr.entry_check;
            ok = ok && pass;
            rows.push_back({{"group", rr.group},
                            {"multiplicities", detail::multiplicity_echo(rep)},
                            {"bond_dim", rr.bond_dim},
                            {"regular", rr.regular},
                            {"gram_deviation", rr.gram_deviation},
                            {"entry_check", rr.entry_check},
                            {"max_entry_error", rr.max_entry_error},
                            {"decomposition_deviation", rr.decomposition_deviation},
                            {"scale", rr.scale},
                            {"route", rr.route},
                            {"pass", pass}});
            csv << rr.group << ',' << rr.bond_dim << ',' << rr.regular << ',' << fmt_double(rr.gram_deviation) << ','
                << rr.entry_check << ',' << fmt_double(rr.max_entry_error) << ','
                << fmt_double(rr.decomposition_deviation) << ',' << rr.route << ',' << pass << '\n';
        }
        report["reps"] = rows;
        detail::write_file(opts, cfg.at("outputs").at("table").get<std::string>(), csv.str());
        detail::write_file(opts, cfg.at("outputs").at("report").get<std::string>(), report.dump(2) + "\n");
        return ok ? kExitPass : kExitBound;
    });
}

// ---------------------------------------------------------------------------

namespace detail {

struct LatticeSetup {
    TorusLattice lattice;
    SiteTensor tensor;
    std::vector<Deformation> deformations;
};

inline LatticeSetup build_setup(const json &cfg, double kappa, std::uint64_t seed) {
    LatticeSetup s;
    s.lattice = build_lattice(cfg);
    const GroupData g = resolve_group(cfg.at("group"));
    s.tensor = build_site_tensor(build_rep(g, cfg.at("rep").at("multiplicities")));
    require_state_fits(s.lattice, s.tensor.sym_dim);
    s.deformations = build_deformations(s.lattice, s.tensor, cfg, kappa, seed);
    return s;
}

inline LatticeSetup build_setup(const json &cfg) {
    const json &d = cfg.at("deformations");
    return build_setup(cfg, d.at("kappa").get<double>(), d.at("seed").get<std::uint64_t>());
}

struct StepOverlap {
    int step = 0;
    JordanSpectrum spectrum;
    double kappa = 1.0;
    int rank_t = 0;
    int rank_next = 0;
};

inline json step_overlap_json(const StepOverlap &s, double tol, bool &ok) {
    const double bound = 1.0 / (s.kappa * s.kappa);
    const double margin = s.spectrum.d_min - bound;
    const bool pass = s.spectrum.zero_overlaps == 0 && margin >= -tol;
    ok = ok && pass;
    std::vector<double> d;
    for (int k = 0; k < static_cast<int>(s.spectrum.r_vectors.cols()); ++k) d.push_back(s.spectrum.overlap(k));
    return {{"step", s.step},          {"rank_t", s.rank_t},   {"rank_next", s.rank_next},
            {"d_k", d},                {"d_min", s.spectrum.d_min}, {"kappa", s.kappa},
            {"bound", bound},          {"margin", margin},     {"zero_overlaps", s.spectrum.zero_overlaps},
            {"tolerance", tol},        {"pass", pass}};
}

}  // namespace detail

inline json resolve_overlap(const json &raw, const RunOptions &opts) {
    json d = detail::lattice_defaults(detail::common_defaults());
    d["step"] = "all";
    d["export_states"] = false;
    d["tolerances"] = {{"overlap", 1e-9}, {"rank", 1e-10}};
    d["outputs"] = {{"report", "report.json"}, {"spectrum", "spectrum.csv"}, {"deformations", "deformations.json"}};
    json cfg = detail::merge_config(d, raw, {"rep", "lattice", "deformations", "tolerances", "outputs"});
    if (opts.seed) cfg["seed"] = *opts.seed;
    detail::resolve_deformation_seed(cfg);
    if (!cfg["step"].is_string()) detail::integer(cfg["step"], "step", 0);
    else if (cfg["step"] != "all") throw detail::config_error("step must be an integer or \"all\"");
    if (!cfg["export_states"].is_boolean()) throw detail::config_error("export_states must be a boolean");
    return cfg;
}

/// Principal overlaps between consecutive ground spaces P_t and P_t+1.
inline CommandResult cmd_overlap(const json &raw, const RunOptions &opts = {}) {
    return detail::guarded("overlap", [&] { return resolve_overlap(raw, opts); }, [&](const json &cfg, json &report) {
        const auto setup = detail::build_setup(cfg);
        const int n = setup.lattice.vertices();
        const double tol = cfg.at("tolerances").at("overlap").get<double>();
        const double rank_tol = cfg.at("tolerances").at("rank").get<double>();
        int first = 0, last = n - 1;
        if (!cfg.at("step").is_string()) {
            first = last = static_cast<int>(cfg.at("step").get<std::int64_t>());
            if (first >= n) throw detail::config_error("step must be below the vertex count");
        }

        const auto seq = ground_projector_sequence(setup.lattice, setup.tensor, setup.deformations, rank_tol);
        std::ostringstream csv;
        csv << "step,block,d_k,margin\n";
        json steps = json::array();
        bool ok = true;
        for (int t = first; t <= last; ++t) {
            detail::StepOverlap so;
            so.step = t;
            so.spectrum = jordan_decompose(seq[t], seq[t + 1]);
            so.kappa = setup.deformations[t].kappa_sym;
            so.rank_t = seq[t].rank;
            so.rank_next = seq[t + 1].rank;
            steps.push_back(detail::step_overlap_json(so, tol, ok));
            write_spectrum_csv(csv, so.spectrum, so.kappa, t, false);
        }
        report["steps"] = steps;
        report["deformation_hash"] = hex64(deformation_hash(setup.deformations));

        if (cfg.at("export_states").get<bool>() && !opts.out_dir.empty()) {
            std::vector<Deformation> applied(setup.deformations.begin(), setup.deformations.begin() + last + 1);
            for (auto [g, h] : setup.tensor.rep.group.commuting_pairs()) {
                const BoundaryTwist tw = make_twist(setup.tensor.rep.group, g, h);
                const auto s = partial_peps_state(setup.lattice, setup.tensor, setup.deformations, last + 1, tw);
                std::filesystem::create_directories(opts.out_dir);
                export_state((std::filesystem::path(opts.out_dir) /
                              ("state_t" + std::to_string(last + 1) + "_g" + std::to_string(g) + "_h" + std::to_string(h)))
                                 .string(),
                             s, setup.tensor, tw, applied);
            }
        }
        detail::write_file(opts, cfg.at("outputs").at("spectrum").get<std::string>(), csv.str());
        detail::write_file(opts, cfg.at("outputs").at("deformations").get<std::string>(),
                           json{{"deformations", deformations_to_json(setup.deformations)}}.dump(2) + "\n");
        detail::write_file(opts, cfg.at("outputs").at("report").get<std::string>(), report.dump(2) + "\n");
        if (!ok) {
            report["error"] = {{"code", "BoundViolation"}, {"message", "d_min below kappa^-2"}};
            return static_cast<int>(kExitBound);
        }
        return static_cast<int>(kExitPass);
    });
}

// ---------------------------------------------------------------------------

inline json resolve_simulate(const json &raw, const RunOptions &opts) {
    json d = detail::lattice_defaults(detail::common_defaults());
    d["epsilon"] = 0.1;
    d["m"] = "auto";
    d["trials"] = 1000;
    d["check_rewind"] = true;
    d["tolerances"] = {{"final_state", 1e-8}, {"rewind", 1e-9}, {"rank", 1e-10}};
    d["outputs"] = {{"report", "report.json"},
                    {"traces", "traces.jsonl"},
                    {"aggregate", "aggregate.csv"},
                    {"deformations", "deformations.json"}};
    json cfg = detail::merge_config(d, raw, {"rep", "lattice", "deformations", "tolerances", "outputs"});
    if (opts.seed) cfg["seed"] = *opts.seed;
    if (opts.trials) cfg["trials"] = *opts.trials;
    detail::resolve_deformation_seed(cfg);
    detail::integer(cfg["trials"], "trials", 1);
    detail::integer(cfg["seed"], "seed", 0);
    if (!cfg["m"].is_string()) detail::integer(cfg["m"], "m", 0);
    else if (cfg["m"] != "auto") throw detail::config_error("m must be an integer or \"auto\"");
    if (!cfg["epsilon"].is_number()) throw detail::config_error("epsilon must be a number");
    if (!cfg["check_rewind"].is_boolean()) throw detail::config_error("check_rewind must be a boolean");
    return cfg;
}

/// Runs the preparation protocol over many trials. Per-trial failures are
/// recorded in the traces; the exit code reflects the deterministic checks
/// (final state inside P_N, rewind structure, closed form below the bound).
/// Statistical comparisons are reported with their 3-sigma windows.
inline CommandResult cmd_simulate(const json &raw, const RunOptions &opts = {}) {
    return detail::guarded("simulate", [&] { return resolve_simulate(raw, opts); }, [&](const json &cfg, json &report) {
        auto setup = detail::build_setup(cfg);
        const json &tol = cfg.at("tolerances");
        ProtocolConfig pc;
        pc.lattice = setup.lattice;
        pc.tensor = setup.tensor;
        pc.deformations = setup.deformations;
        pc.epsilon = cfg.at("epsilon").get<double>();
        if (!cfg.at("m").is_string()) pc.m = cfg.at("m").get<std::int64_t>();
        pc.seed = cfg.at("seed").get<std::uint64_t>();
        pc.check_rewind_structure = cfg.at("check_rewind").get<bool>();
        pc.rank_tol = tol.at("rank").get<double>();
        const Protocol proto(pc);
        const auto trials = static_cast<std::uint64_t>(cfg.at("trials").get<std::int64_t>());
        const auto traces = proto.run_trials(trials, std::max(1, opts.threads));

        const int n = proto.steps();
        const std::int64_t m = proto.m();
        std::vector<int> reached(n, 0), failed(n, 0);
        int successes = 0, final_ok = 0, rewind_checks = 0;
        double worst_final = 1.0, worst_rewind = 0.0;
        std::int64_t measurements = 0;
        for (const auto &tr : traces) {
            for (const auto &s : tr.steps) {
                ++reached[s.step - 1];
                if (!s.success) ++failed[s.step - 1];
            }
            measurements += tr.total_measurements;
            rewind_checks += tr.rewind_checks;
            worst_rewind = std::max(worst_rewind, tr.rewind_max_deviation);
            if (!tr.success) continue;
            ++successes;
            worst_final = std::min(worst_final, tr.final_fidelity);
            if (tr.final_fidelity >= 1.0 - tol.at("final_state").get<double>()) ++final_ok;
        }

        const auto exact_fail = proto.exact_step_failure(m);
        const auto profile = proto.exact_success_profile(m);
        std::vector<AggregateRow> rows;
        json steps = json::array();
        bool bound_ok = true;
        for (int t = 0; t < n; ++t) {
            AggregateRow r;
            r.step = t + 1;
            r.m = m;
            r.empirical_fail = reached[t] ? static_cast<double>(failed[t]) / reached[t] : 0.0;
            r.analytic_fail = exact_fail[t];
            r.d_min = proto.spectra()[t].d_min;
            r.kappa = proto.kappas()[t];
            r.bound = (m > 0 && r.d_min > 0.0) ? failure_bound(r.d_min, m) : INFINITY;
            const bool below = r.analytic_fail <= r.bound + 1e-12;
            bound_ok = bound_ok && below;
            const double sigma = reached[t] ? std::sqrt(r.analytic_fail * (1.0 - r.analytic_fail) / reached[t]) : 0.0;
            steps.push_back({{"step", r.step},
                             {"reached", reached[t]},
                             {"failed", failed[t]},
                             {"empirical_fail", r.empirical_fail},
                             {"analytic_fail", r.analytic_fail},
                             {"bound", r.bound},
                             {"d_min", r.d_min},
                             {"kappa", r.kappa},
                             {"analytic_below_bound", below},
                             {"empirical_within_3sigma",
                              std::abs(r.empirical_fail - r.analytic_fail) <= 3.0 * sigma + 0.5 / std::max(1, reached[t])}});
            rows.push_back(r);
        }

        const double frac = static_cast<double>(successes) / static_cast<double>(trials);
        const double exact_success = profile.back();
        const double sig_exact = std::sqrt(exact_success * (1.0 - exact_success) / trials);
        const double target = 1.0 - pc.epsilon;
        const double sig_target = std::sqrt(target * (1.0 - target) / trials);
        const bool final_pass = final_ok == successes;
        const bool rewind_pass = worst_rewind <= tol.at("rewind").get<double>();

        report["m"] = m;
        report["kappa_g"] = proto.kappa_g();
        report["projector_ranks"] = [&] {
            std::vector<int> r;
            for (const auto &p : proto.projectors()) r.push_back(p.rank);
            return r;
        }();
        report["trials"] = trials;
        report["successes"] = successes;
        report["success_fraction"] = frac;
        report["analytic_success"] = exact_success;
        report["mean_measurements"] = static_cast<double>(measurements) / static_cast<double>(trials);
        report["deformation_hash"] = hex64(deformation_hash(setup.deformations));
        report["steps"] = steps;
        report["checks"] = {
            {"final_state", {{"successful_runs", successes}, {"inside", final_ok}, {"min_fidelity", successes ? worst_final : 1.0},
                             {"tolerance", tol.at("final_state")}, {"pass", final_pass}}},
            {"rewind_structure", {{"checks", rewind_checks}, {"max_deviation", worst_rewind}, {"tolerance", tol.at("rewind")}, {"pass", rewind_pass}}},
            {"analytic_below_bound", {{"pass", bound_ok}}},
        };
        report["statistical_checks"] = {
            {"success_vs_analytic", {{"observed", frac}, {"expected", exact_success}, {"sigma", sig_exact},
                                     {"pass", std::abs(frac - exact_success) <= 3.0 * sig_exact + 0.5 / trials}}},
            {"success_vs_target", {{"observed", frac}, {"target", target}, {"sigma", sig_target},
                                   {"applies", cfg.at("m").is_string()},
                                   {"pass", frac >= target - 3.0 * sig_target - 0.5 / trials}}},
        };

        std::ostringstream jsonl, csv;
        write_traces_jsonl(jsonl, traces);
        write_aggregate_csv(csv, rows);
        const json &out = cfg.at("outputs");
        detail::write_file(opts, out.at("traces").get<std::string>(), jsonl.str());
        detail::write_file(opts, out.at("aggregate").get<std::string>(), csv.str());
        detail::write_file(opts, out.at("deformations").get<std::string>(),
                           json{{"deformations", deformations_to_json(setup.deformations)}}.dump(2) + "\n");
        detail::write_file(opts, out.at("report").get<std::string>(), report.dump(2) + "\n");
        return (final_pass && rewind_pass && bound_ok) ? static_cast<int>(kExitPass) : static_cast<int>(kExitBound);
    });
}

// ---------------------------------------------------------------------------

inline json resolve_sweep(const json &raw, const RunOptions &opts) {
    json d = detail::lattice_defaults(detail::common_defaults());
    d["sweep"] = {{"kappas", {1.0, 2.0, 4.0, 8.0}}, {"seeds", {0, 1, 2, 3, 4}}};
    d["tolerances"] = {{"overlap", 1e-9}, {"rank", 1e-10}};
    d["outputs"] = {{"report", "report.json"}, {"table", "sweep.csv"}};
    json cfg = detail::merge_config(d, raw, {"rep", "lattice", "deformations", "tolerances", "outputs", "sweep"});
    if (opts.seed) cfg["seed"] = *opts.seed;
    detail::resolve_deformation_seed(cfg);
    if (cfg["deformations"]["mode"] != "random") throw detail::config_error("sweep needs deformations.mode = random");
    const json &s = cfg["sweep"];
    if (!s["kappas"].is_array() || s["kappas"].empty()) throw detail::config_error("sweep.kappas must be a non-empty list");
    for (const auto &k : s["kappas"]) detail::positive_number(k, "sweep.kappas[]");
    if (!s["seeds"].is_array() || s["seeds"].empty()) throw detail::config_error("sweep.seeds must be a non-empty list");
    for (const auto &k : s["seeds"]) detail::integer(k, "sweep.seeds[]", 0);
    return cfg;
}

/// Overlap over a grid of (kappa, seed) deformation instances; points run in
/// parallel and are written in grid order.
inline CommandResult cmd_sweep(const json &raw, const RunOptions &opts = {}) {
    return detail::guarded("sweep", [&] { return resolve_sweep(raw, opts); }, [&](const json &cfg, json &report) {
        std::vector<std::pair<double, std::uint64_t>> points;
        for (const auto &k : cfg.at("sweep").at("kappas"))
            for (const auto &s : cfg.at("sweep").at("seeds")) points.emplace_back(k.get<double>(), s.get<std::uint64_t>());
        const double tol = cfg.at("tolerances").at("overlap").get<double>();
        const double rank_tol = cfg.at("tolerances").at("rank").get<double>();

        std::vector<std::vector<detail::StepOverlap>> results(points.size());
        std::vector<std::string> errors(points.size());
        std::vector<int> codes(points.size(), -1);
        std::atomic<size_t> next{0};
        auto worker = [&] {
            for (size_t i = next++; i < points.size(); i = next++) {
                try {
                    const auto setup = detail::build_setup(cfg, points[i].first, points[i].second);
                    const auto seq = ground_projector_sequence(setup.lattice, setup.tensor, setup.deformations, rank_tol);
                    for (int t = 0; t + 1 < static_cast<int>(seq.size()); ++t) {
                        detail::StepOverlap so;
                        so.step = t;
                        so.spectrum = jordan_decompose(seq[t], seq[t + 1]);
                        so.kappa = setup.deformations[t].kappa_sym;
                        so.rank_t = seq[t].rank;
                        so.rank_next = seq[t + 1].rank;
                        so.spectrum.r_vectors.resize(0, static_cast<Eigen::Index>(so.spectrum.r_vectors.cols()));
                        so.spectrum.q_vectors.resize(0, 0);
                        results[i].push_back(std::move(so));
                    }
                } catch (const Error &e) {
                    errors[i] = e.what();
                    codes[i] = static_cast<int>(e.code());
                }
            }
        };
        const int nt = std::max(1, std::min<int>(opts.threads, static_cast<int>(points.size())));
        std::vector<std::thread> pool;
        for (int i = 1; i < nt; ++i) pool.emplace_back(worker);
        worker();
        for (auto &th : pool) th.join();

        for (size_t i = 0; i < points.size(); ++i)
            if (codes[i] >= 0) throw Error(static_cast<ErrorCode>(codes[i]), errors[i]);

        std::ostringstream csv;
        csv << "kappa_target,seed,step,kappa,d_min,bound,margin,zero_overlaps\n";
        json rows = json::array();
        bool ok = true;
        double worst = INFINITY;
        for (size_t i = 0; i < points.size(); ++i) {
            for (const auto &so : results[i]) {
                json row = detail::step_overlap_json(so, tol, ok);
                row.erase("d_k");
                row["kappa_target"] = points[i].first;
                row["seed"] = points[i].second;
                worst = std::min(worst, row.at("margin").get<double>());
                csv << fmt_double(points[i].first) << ',' << points[i].second << ',' << so.step << ','
                    << fmt_double(so.kappa) << ',' << fmt_double(so.spectrum.d_min) << ','
                    << fmt_double(1.0 / (so.kappa * so.kappa)) << ','
                    << fmt_double(so.spectrum.d_min - 1.0 / (so.kappa * so.kappa)) << ',' << so.spectrum.zero_overlaps
                    << '\n';
                rows.push_back(std::move(row));
            }
        }
        report["points"] = points.size();
        report["rows"] = rows;
        report["min_margin"] = worst;
        detail::write_file(opts, cfg.at("outputs").at("table").get<std::string>(), csv.str());
        detail::write_file(opts, cfg.at("outputs").at("report").get<std::string>(), report.dump(2) + "\n");
        return ok ? static_cast<int>(kExitPass) : static_cast<int>(kExitBound);
    });
}

/// Dispatch by subcommand name.
inline CommandResult run_command(const std::string &name, const json &raw, const RunOptions &opts = {}) {
    if (name == "verify-group") return cmd_verify_group(raw, opts);
    if (name == "verify-appendix") return cmd_verify_appendix(raw, opts);
    if (name == "overlap") return cmd_overlap(raw, opts);
    if (name == "simulate") return cmd_simulate(raw, opts);
    if (name == "sweep") return cmd_sweep(raw, opts);
    CommandResult r;
    r.exit_code = kExitConfig;
    r.report = {{"command", name}, {"version", std::string(kVersion)}, {"status", "error"},
                {"error", {{"code", "InvalidConfig"}, {"message", "unknown command"}}}};
    return r;
}

}  // namespace gipeps
