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
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "gipeps/error.hpp"

namespace gipeps::detail {

/// Dense row-major tensor whose modes are identified by integer labels.
struct DenseTensor {
    std::vector<std::complex<double>> data;
    std::vector<int> labels;
    std::vector<std::int64_t> dims;

    std::int64_t size() const {
        std::int64_t s = 1;
        for (auto d : dims) s *= d;
        return s;
    }

    int mode_of(int label) const {
        auto it = std::find(labels.begin(), labels.end(), label);
        return it == labels.end() ? -1 : static_cast<int>(it - labels.begin());
    }
};

/// Reorders the modes of t to match new_labels (a permutation of t.labels).
inline DenseTensor permute(const DenseTensor &t, const std::vector<int> &new_labels) {
    const size_t rank = t.labels.size();
    std::vector<int> src_mode(rank);
    for (size_t i = 0; i < rank; ++i) src_mode[i] = t.mode_of(new_labels[i]);
    bool identity = true;
    for (size_t i = 0; i < rank; ++i) identity &= src_mode[i] == static_cast<int>(i);
    if (identity) return t;

    std::vector<std::int64_t> src_stride(rank, 1);
    for (int i = static_cast<int>(rank) - 2; i >= 0; --i) src_stride[i] = src_stride[i + 1] * t.dims[i + 1];

    DenseTensor out;
    out.labels = new_labels;
    out.dims.resize(rank);
    std::vector<std::int64_t> stride(rank);
    for (size_t i = 0; i < rank; ++i) {
        out.dims[i] = t.dims[src_mode[i]];
        stride[i] = src_stride[src_mode[i]];
    }
    out.data.resize(t.data.size());

    // Odometer over the output index, innermost mode copied in a tight loop.
    std::vector<std::int64_t> idx(rank, 0);
    const std::int64_t inner = rank ? out.dims[rank - 1] : 1;
    const std::int64_t inner_stride = rank ? stride[rank - 1] : 1;
    std::int64_t offset = 0;
    for (std::int64_t pos = 0; pos < static_cast<std::int64_t>(out.data.size()); pos += inner) {
        for (std::int64_t k = 0; k < inner; ++k) out.data[pos + k] = t.data[offset + k * inner_stride];
        for (int m = static_cast<int>(rank) - 2; m >= 0; --m) {
            if (++idx[m] < out.dims[m]) {
                offset += stride[m];
                break;
            }
            offset -= stride[m] * (out.dims[m] - 1);
            idx[m] = 0;
        }
    }
    return out;
}

/// Sums over every label the two tensors share. Result modes: free modes of a
/// (in order) followed by free modes of b.
inline DenseTensor contract(const DenseTensor &a, const DenseTensor &b) {
    std::vector<int> shared, free_a, free_b;
    for (int l : a.labels) (b.mode_of(l) >= 0 ? shared : free_a).push_back(l);
    for (int l : b.labels)
        if (a.mode_of(l) < 0) free_b.push_back(l);

    std::vector<int> order_a = free_a;
    order_a.insert(order_a.end(), shared.begin(), shared.end());
    std::vector<int> order_b = shared;
    order_b.insert(order_b.end(), free_b.begin(), free_b.end());
    const DenseTensor pa = permute(a, order_a);
    const DenseTensor pb = permute(b, order_b);

    std::int64_t rows = 1, inner = 1, cols = 1;
    DenseTensor out;
    for (size_t i = 0; i < free_a.size(); ++i) {
        rows *= pa.dims[i];
        out.labels.push_back(free_a[i]);
        out.dims.push_back(pa.dims[i]);
    }
    for (size_t i = free_a.size(); i < pa.dims.size(); ++i) inner *= pa.dims[i];
    for (size_t i = shared.size(); i < pb.dims.size(); ++i) {
        cols *= pb.dims[i];
        out.labels.push_back(free_b[i - shared.size()]);
        out.dims.push_back(pb.dims[i]);
    }
    if (static_cast<std::uint64_t>(rows) * static_cast<std::uint64_t>(cols) > amplitude_cap())
        throw Error(ErrorCode::DimensionOverflow, "intermediate contraction of " + std::to_string(rows * cols) +
                                                      " amplitudes exceeds the cap");

    using RowMat = Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::Map<const RowMat> ma(pa.data.data(), rows, inner);
    Eigen::Map<const RowMat> mb(pb.data.data(), inner, cols);
    out.data.resize(static_cast<size_t>(rows * cols));
    Eigen::Map<RowMat> mo(out.data.data(), rows, cols);
    mo.noalias() = ma * mb;
    return out;
}

}  // namespace gipeps::detail
