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

#include <sstream>

#include "gipeps/io.hpp"

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

TEST(MatrixJson, RoundTripIsExact) {
    CounterRng rng(1);
    Matrix m(3, 2);
    for (auto &x : m.reshaped()) x = rng.complex_normal();
    const json j = json::parse(matrix_to_json(m).dump());
    EXPECT_EQ(matrix_from_json(j, "m"), m);
}

TEST(MatrixJson, ImaginaryPartOptional) {
    const json j = json::parse(R"({"re": [[1, 2], [3, 4]]})");
    const Matrix m = matrix_from_json(j, "m");
    EXPECT_EQ(m(1, 0), cplx(3.0, 0.0));
    EXPECT_EQ(code_of([] { matrix_from_json(json::parse(R"({"re": [[1, 2], [3]]})"), "m"); }),
              ErrorCode::InvalidConfig);
}

TEST(GroupJson, RoundTripThroughDocument) {
    const auto t = build_group("S3");
    const json doc = json::parse(group_to_json(t, irreps(t)).dump());
    const GroupData g = group_from_json(doc);
    EXPECT_EQ(g.table.order, 6);
    EXPECT_EQ(g.table.mult, t.mult);
    ASSERT_EQ(g.irreps.size(), 3u);
    EXPECT_EQ(g.irreps[2].dim, 2);
}

TEST(GroupJson, FlatTableAndDefaultLabels) {
    const json doc = json::parse(R"({
        "order": 2, "mult_table": [0, 1, 1, 0],
        "irreps": [{"dim": 1, "matrices": [{"re": [[1]]}, {"re": [[1]]}]},
                   {"dim": 1, "matrices": [{"re": [[1]]}, {"re": [[-1]]}]}]})");
    const GroupData g = group_from_json(doc);
    EXPECT_EQ(g.irreps[1].label, "irrep1");
}

TEST(GroupJson, TableIsCheckedBeforeIrreps) {
    const json doc = json::parse(R"({"order": 2, "mult_table": [[0, 1], [1, 1]]})");
    EXPECT_EQ(code_of([&] { group_from_json(doc); }), ErrorCode::MissingInverse);
    EXPECT_EQ(code_of([] { resolve_group(json("Q8")); }), ErrorCode::InvalidConfig);
}

TEST(DeformationJson, RoundTripPreservesHash) {
    const auto tensor = build_site_tensor(regular_rep(build_group("Z2")));
    const TorusLattice lat(2, 2);
    const auto defs = random_deformations(lat, tensor, 3.0, 7);
    const json doc = json::parse(json{{"deformations", deformations_to_json(defs)}}.dump());
    const auto back = deformations_from_json(doc, tensor);
    ASSERT_EQ(back.size(), defs.size());
    EXPECT_EQ(deformation_hash(back), deformation_hash(defs));
    for (size_t i = 0; i < defs.size(); ++i) {
        EXPECT_EQ(back[i].site, defs[i].site);
        EXPECT_NEAR(back[i].kappa_sym, defs[i].kappa_sym, 1e-12);
    }
    auto other = defs;
    other[2].matrix(0, 0) += 1e-15;
    EXPECT_NE(deformation_hash(other), deformation_hash(defs));
    EXPECT_EQ(hex64(0xabcULL), "0000000000000abc");
}

TEST(DeformationJson, RejectsWrongShape) {
    const auto tensor = build_site_tensor(regular_rep(build_group("Z2")));
    const json bad = {{"site", 0}, {"matrix", matrix_to_json(Matrix::Identity(3, 3))}};
    EXPECT_EQ(code_of([&] { deformation_from_json(bad, tensor); }), ErrorCode::DimensionMismatch);
    EXPECT_EQ(code_of([&] { deformations_from_json(json::object(), tensor); }), ErrorCode::InvalidConfig);
}

TEST(StateBinary, LittleEndianInterleaved) {
    Vector v(2);
    v << cplx(1.0, -2.0), cplx(0.5, 0.0);
    std::ostringstream os;
    write_state_binary(os, v);
    const std::string bytes = os.str();
    ASSERT_EQ(bytes.size(), 32u);
    // 1.0 = 0x3FF0000000000000: low byte first.
    EXPECT_EQ(static_cast<unsigned char>(bytes[0]), 0x00);
    EXPECT_EQ(static_cast<unsigned char>(bytes[7]), 0x3F);
    EXPECT_EQ(static_cast<unsigned char>(bytes[6]), 0xF0);
    // -2.0 = 0xC000000000000000.
    EXPECT_EQ(static_cast<unsigned char>(bytes[15]), 0xC0);
    std::istringstream is(bytes);
    EXPECT_EQ(read_state_binary(is), v);
    std::istringstream truncated(bytes.substr(0, 20));
    EXPECT_EQ(code_of([&] { read_state_binary(truncated); }), ErrorCode::InvalidConfig);
}

TEST(Tables, SpectrumCsvColumns) {
    JordanSpectrum js;
    js.overlaps = {0.5, 0.25};
    js.d_min = 0.25;
    js.r_vectors = Matrix::Zero(4, 2);
    std::ostringstream os;
    write_spectrum_csv(os, js, 2.0, 3);
    EXPECT_EQ(os.str(), "step,block,d_k,margin\n3,0,0.5,0.25\n3,1,0.25,0\n");
    std::ostringstream plain;
    write_spectrum_csv(plain, js, 2.0);
    EXPECT_EQ(plain.str().substr(0, 17), "block,d_k,margin\n");
}

TEST(Tables, AggregateHeaderAndDoubles) {
    std::ostringstream os;
    write_aggregate_csv(os, {AggregateRow{1, 5, 0.1, 0.125, 0.2, 0.5, 2.0}});
    EXPECT_EQ(os.str(), "step,m,empirical_fail,analytic_fail,bound,d_min,kappa\n"
                        "1,5,0.10000000000000001,0.125,0.20000000000000001,0.5,2\n");
}

TEST(Traces, JsonLinesOnePerTrial) {
    ProtocolTrace a, b;
    a.trial = 0;
    b.trial = 1;
    b.success = false;
    b.error = "StepExhausted";
    b.failed_step = 2;
    std::ostringstream os;
    write_traces_jsonl(os, {a, b});
    std::istringstream is(os.str());
    std::string line;
    int n = 0;
    while (std::getline(is, line)) {
        const json j = json::parse(line);
        EXPECT_EQ(j.at("trial").get<int>(), n);
        ++n;
    }
    EXPECT_EQ(n, 2);
    EXPECT_EQ(json::parse(os.str().substr(os.str().find('\n') + 1)).at("error"), "StepExhausted");
}

}  // namespace
}  // namespace gipeps
