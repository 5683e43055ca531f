// msfser/error.hpp

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

#ifndef MSFSER_ERROR_HPP_
#define MSFSER_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace msfser {

enum class ErrorCode {
  kInvalidArgument,
  kIo,
  // TextGrid parsing.
  kMalformedHeader,
  kMalformedBody,
  kTruncatedFile,
  kNonMonotoneIntervals,
  kUnknownTier,
  // Audio.
  kUnsupportedAudio,
  kSignalTooShort,
  // Embeddings.
  kMalformedRecord,
  kDimMismatch,
  kDuplicateKey,
  kMissingKey,
  // Numerics and model.
  kShapeMismatch,
  kEmptyInput,
  kLengthMismatch,
  kTooShort,
  kMissingSemantics,
  kTooFewUtterances,
  kNumericalFailure,
  kMalformedCheckpoint,
};

const char *ErrorCodeName(ErrorCode code);

/// Every failure in the library is reported as an Error carrying a typed code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string &what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void Fail(ErrorCode code, const std::string &what) {
  throw Error(code, std::string(ErrorCodeName(code)) + ": " + what);
}

}  // namespace msfser

#endif  // MSFSER_ERROR_HPP_
