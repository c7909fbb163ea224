// Copyright 2026 The fsbed Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
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
#include <string_view>

#include <Eigen/Dense>

namespace fsbed {

using Matrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

enum class Errc {
  UnsupportedEncoding,
  CorruptHeader,
  EmptyAudio,
  TooShort,
  MalformedRow,
  UnknownLabel,
  NoPositives,
  EmptyQuery,
  DimensionMismatch,
  ExternalRowCountMismatch,
  RowCountMismatch,
  NonFiniteValue,
  SingleClassCorpus,
  EmptyClass,
  QueryTooSmall,
  ShapeMismatch,
  EmptyMatrix,
  AlignmentMismatch,
  PlacementFailure,
  EmptyCorpus,
  InvalidConfig,
  Io,
};

std::string_view to_string(Errc code);

// All library failures are reported as fsbed::Error; code() identifies the
// failure class so callers can branch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        message_(message) {}

  Errc code() const noexcept { return code_; }
  // The message without the code prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  Errc code_;
  std::string message_;
};

}  // namespace fsbed
