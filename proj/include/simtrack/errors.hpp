// Copyright 2026 The simtrack authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace simtrack {

/// Coarse failure category; doubles as the CLI process exit code.
enum class ErrorKind : int {
    config = 2,
    data = 3,
    numeric = 4,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

#define SIMTRACK_DEFINE_ERROR(Name, Kind)                                               \
    class Name : public Error {                                                         \
    public:                                                                             \
        explicit Name(const std::string& msg) : Error(ErrorKind::Kind, #Name ": " + msg) {} \
    };

// geometry
SIMTRACK_DEFINE_ERROR(DegenerateProjection, numeric)
SIMTRACK_DEFINE_ERROR(BehindCamera, numeric)
SIMTRACK_DEFINE_ERROR(InsufficientCorrespondences, data)
SIMTRACK_DEFINE_ERROR(RankDeficientGeometry, numeric)

// rpca
SIMTRACK_DEFINE_ERROR(SvdFailure, numeric)
SIMTRACK_DEFINE_ERROR(TileError, numeric)

// eo_detection
SIMTRACK_DEFINE_ERROR(DegenerateFrame, data)
SIMTRACK_DEFINE_ERROR(ParseError, data)

// rf_preproc
SIMTRACK_DEFINE_ERROR(BandOutOfCapture, data)
SIMTRACK_DEFINE_ERROR(NoSignal, data)

// tdoa
SIMTRACK_DEFINE_ERROR(NoPeak, data)
SIMTRACK_DEFINE_ERROR(DegenerateGeometry, numeric)
SIMTRACK_DEFINE_ERROR(NoRealRoot, numeric)

// fingerprint
SIMTRACK_DEFINE_ERROR(InsufficientData, data)
SIMTRACK_DEFINE_ERROR(EmptyStream, data)
SIMTRACK_DEFINE_ERROR(TrainRequired, config)

// fusion
SIMTRACK_DEFINE_ERROR(MissingOffset, config)

// simulator / cli
SIMTRACK_DEFINE_ERROR(UnknownPreset, config)
SIMTRACK_DEFINE_ERROR(ConfigError, config)
SIMTRACK_DEFINE_ERROR(IOError, data)
SIMTRACK_DEFINE_ERROR(EvalUnavailable, data)

// generic precondition breach
SIMTRACK_DEFINE_ERROR(InvalidArgument, data)

#undef SIMTRACK_DEFINE_ERROR

}  // namespace simtrack
