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

#include "fsbed/common.hpp"

namespace fsbed {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::UnsupportedEncoding: return "UnsupportedEncoding";
    case Errc::CorruptHeader: return "CorruptHeader";
    case Errc::EmptyAudio: return "EmptyAudio";
    case Errc::TooShort: return "TooShort";
    case Errc::MalformedRow: return "MalformedRow";
    case Errc::UnknownLabel: return "UnknownLabel";
    case Errc::NoPositives: return "NoPositives";
    case Errc::EmptyQuery: return "EmptyQuery";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::ExternalRowCountMismatch: return "ExternalRowCountMismatch";
    case Errc::RowCountMismatch: return "RowCountMismatch";
    case Errc::NonFiniteValue: return "NonFiniteValue";
    case Errc::SingleClassCorpus: return "SingleClassCorpus";
    case Errc::EmptyClass: return "EmptyClass";
    case Errc::QueryTooSmall: return "QueryTooSmall";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::EmptyMatrix: return "EmptyMatrix";
    case Errc::AlignmentMismatch: return "AlignmentMismatch";
    case Errc::PlacementFailure: return "PlacementFailure";
    case Errc::EmptyCorpus: return "EmptyCorpus";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace fsbed
