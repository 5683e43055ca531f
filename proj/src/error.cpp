// src/error.cpp

// Copyright 2026 The msfser Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "msfser/error.hpp"

namespace msfser {

const char *ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kIo: return "IoError";
    case ErrorCode::kMalformedHeader: return "MalformedHeader";
    case ErrorCode::kMalformedBody: return "MalformedBody";
    case ErrorCode::kTruncatedFile: return "TruncatedFile";
    case ErrorCode::kNonMonotoneIntervals: return "NonMonotoneIntervals";
    case ErrorCode::kUnknownTier: return "UnknownTier";
    case ErrorCode::kUnsupportedAudio: return "UnsupportedAudio";
    case ErrorCode::kSignalTooShort: return "SignalTooShort";
    case ErrorCode::kMalformedRecord: return "MalformedRecord";
    case ErrorCode::kDimMismatch: return "DimMismatch";
    case ErrorCode::kDuplicateKey: return "DuplicateKey";
    case ErrorCode::kMissingKey: return "MissingKey";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kTooShort: return "TooShort";
    case ErrorCode::kMissingSemantics: return "MissingSemantics";
    case ErrorCode::kTooFewUtterances: return "TooFewUtterances";
    case ErrorCode::kNumericalFailure: return "NumericalFailure";
    case ErrorCode::kMalformedCheckpoint: return "MalformedCheckpoint";
  }
  return "Unknown";
}

}  // namespace msfser
