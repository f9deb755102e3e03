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

#include <cstdint>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <string_view>

namespace gipeps {

enum class ErrorCode {
    InvalidTable,
    NonAssociative,
    MissingIdentity,
    MissingInverse,
    InvalidIrrep,
    IncompleteIrrepSet,
    ZeroMultiplicity,
    DimensionOverflow,
    InvalidKappa,
    SingularOnSymmetric,
    InvalidLattice,
    NonCommutingTwist,
    ZeroState,
    DimensionMismatch,
    BoundViolation,
    InvalidEpsilon,
    UnnormalizedWeights,
    StepExhausted,
    StateOutsideProjector,
    InvalidConfig,
};

inline std::string_view error_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidTable: return "InvalidTable";
        case ErrorCode::NonAssociative: return "NonAssociative";
        case ErrorCode::MissingIdentity: return "MissingIdentity";
        case ErrorCode::MissingInverse: return "MissingInverse";
        case ErrorCode::InvalidIrrep: return "InvalidIrrep";
        case ErrorCode::IncompleteIrrepSet: return "IncompleteIrrepSet";
        case ErrorCode::ZeroMultiplicity: return "ZeroMultiplicity";
        case ErrorCode::DimensionOverflow: return "DimensionOverflow";
        case ErrorCode::InvalidKappa: return "InvalidKappa";
        case ErrorCode::SingularOnSymmetric: return "SingularOnSymmetric";
        case ErrorCode::InvalidLattice: return "InvalidLattice";
        case ErrorCode::NonCommutingTwist: return "NonCommutingTwist";
        case ErrorCode::ZeroState: return "ZeroState";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::BoundViolation: return "BoundViolation";
        case ErrorCode::InvalidEpsilon: return "InvalidEpsilon";
        case ErrorCode::UnnormalizedWeights: return "UnnormalizedWeights";
        case ErrorCode::StepExhausted: return "StepExhausted";
        case ErrorCode::StateOutsideProjector: return "StateOutsideProjector";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
   public:
    Error(ErrorCode code, const std::string &what)
        : std::runtime_error(std::string(error_name(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

   private:
    ErrorCode code_;
};

/// Upper bound on the number of complex amplitudes any single dense object may
/// hold. Read from GIPEPS_MAX_AMPLITUDES, default 2^26.
inline std::uint64_t amplitude_cap() {
    if (const char *env = std::getenv("GIPEPS_MAX_AMPLITUDES")) {
        char *end = nullptr;
        const auto v = std::strtoull(env, &end, 10);
        if (end != env && v > 0) return v;
    }
    return std::uint64_t{1} << 26;
}

/// Overflow-safe product check against the amplitude cap.
inline void require_within_cap(std::uint64_t base, unsigned power, const std::string &what) {
    const std::uint64_t cap = amplitude_cap();
    std::uint64_t total = 1;
    for (unsigned i = 0; i < power; ++i) {
        if (base != 0 && total > cap / base) {
            throw Error(ErrorCode::DimensionOverflow,
                        what + " needs " + std::to_string(base) + "^" + std::to_string(power) +
                            " amplitudes, cap is " + std::to_string(cap));
        }
        total *= base;
    }
}

}  // namespace gipeps
