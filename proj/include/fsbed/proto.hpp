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

#include <string>
#include <vector>

#include "fsbed/common.hpp"
#include "fsbed/embed.hpp"

namespace fsbed::proto {

enum class Provenance { W0, W1, W2, Adapted };

std::string_view to_string(Provenance p);

// Two-row prototype classifier: row 0 is the positive prototype, row 1 the
// negative one.
struct ClassifierWeights {
  Matrix W;
  Provenance provenance = Provenance::W0;

  int dim() const { return static_cast<int>(W.cols()); }
  auto positive() const { return W.row(0); }
  auto negative() const { return W.row(1); }
};

// n x 2 class probabilities, column 0 positive.
struct ProbMatrix {
  Matrix p;

  std::size_t rows() const { return static_cast<std::size_t>(p.rows()); }
};

// Prototypes are plain means of the (already normalized) rows; they are not
// renormalized.
ClassifierWeights build_prototypes(const embed::EmbeddingMatrix& pos,
                                   const embed::EmbeddingMatrix& neg,
                                   Provenance provenance = Provenance::W0);

// Row-wise softmax over negative Euclidean distances to each prototype.
ProbMatrix predict_probs(const ClassifierWeights& weights, const Matrix& embs);

struct SelectionResult {
  std::vector<std::size_t> selected_indices;  // ascending
  std::size_t candidate_count = 0;
  std::size_t lower = 0;
  std::size_t upper = 0;
};

// Picks query rows z with d(z,w1) > d(w1,w2) and d(z,w1) - d(z,w2) >
// d(w1,w2)/2, then trims or fills to [B, max(B, P - N + B)] by margin
// d(z,w1) - d(z,w2), largest first, lower index on ties.
SelectionResult select_negatives(const ClassifierWeights& weights,
                                 const Matrix& query_embs, std::size_t positives,
                                 std::size_t negatives, std::size_t budget = 5);

// Positive prototype from pos; negative prototype from the union of the
// support negatives and the selected query rows.
ClassifierWeights rebuild_classifier(const embed::EmbeddingMatrix& pos,
                                     const embed::EmbeddingMatrix& neg_support,
                                     const embed::EmbeddingMatrix& neg_selected);

// Row subset helper used when assembling class members.
Matrix gather_rows(const Matrix& m, const std::vector<std::size_t>& indices);

}  // namespace fsbed::proto
