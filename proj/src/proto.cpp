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

#include "fsbed/proto.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fsbed::proto {
namespace {

void require_class(const embed::EmbeddingMatrix& m, const char* which) {
  if (m.rows.rows() == 0) {
    throw Error(Errc::EmptyClass, std::string(which) + " class has no rows");
  }
}

}  // namespace

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::W0: return "W0";
    case Provenance::W1: return "W1";
    case Provenance::W2: return "W2";
    case Provenance::Adapted: return "adapted";
  }
  return "?";
}

ClassifierWeights build_prototypes(const embed::EmbeddingMatrix& pos,
                                   const embed::EmbeddingMatrix& neg,
                                   Provenance provenance) {
  require_class(pos, "positive");
  require_class(neg, "negative");
  if (pos.rows.cols() != neg.rows.cols()) {
    throw Error(Errc::DimensionMismatch, "class embeddings differ in width");
  }
  ClassifierWeights w;
  w.provenance = provenance;
  w.W.resize(2, pos.rows.cols());
  w.W.row(0) = pos.rows.colwise().mean();
  w.W.row(1) = neg.rows.colwise().mean();
  return w;
}

ProbMatrix predict_probs(const ClassifierWeights& weights, const Matrix& embs) {
  if (embs.cols() != weights.W.cols()) {
    throw Error(Errc::DimensionMismatch, "embedding width differs from W");
  }
  const auto k = weights.W.rows();
  ProbMatrix out;
  out.p.resize(embs.rows(), k);
  Eigen::RowVectorXd logits(k);
  for (Eigen::Index i = 0; i < embs.rows(); ++i) {
    for (Eigen::Index c = 0; c < k; ++c) {
      logits(c) = -(weights.W.row(c) - embs.row(i)).norm();
    }
    const double mx = logits.maxCoeff();
    const Eigen::RowVectorXd e = (logits.array() - mx).exp().matrix();
    out.p.row(i) = e / e.sum();
  }
  return out;
}

SelectionResult select_negatives(const ClassifierWeights& weights,
                                 const Matrix& query_embs, std::size_t positives,
                                 std::size_t negatives, std::size_t budget) {
  if (positives < 1 || negatives < 1 || budget < 1) {
    throw Error(Errc::InvalidConfig, "selection needs P, N, B >= 1");
  }
  if (query_embs.cols() != weights.W.cols()) {
    throw Error(Errc::DimensionMismatch, "query width differs from W");
  }
  const auto n = static_cast<std::size_t>(query_embs.rows());
  if (n < budget) {
    throw Error(Errc::QueryTooSmall, "query has " + std::to_string(n) +
                                         " segments, budget is " +
                                         std::to_string(budget));
  }
  const double proto_gap = (weights.positive() - weights.negative()).norm();

  std::vector<double> margin(n);
  std::vector<bool> candidate(n);
  SelectionResult result;
  for (std::size_t j = 0; j < n; ++j) {
    const auto z = query_embs.row(static_cast<Eigen::Index>(j));
    const double to_pos = (z - weights.positive()).norm();
    const double to_neg = (z - weights.negative()).norm();
    margin[j] = to_pos - to_neg;
    candidate[j] = to_pos > proto_gap && margin[j] > proto_gap / 2.0;
    if (candidate[j]) ++result.candidate_count;
  }

  result.lower = budget;
  const auto p = static_cast<long long>(positives);
  const auto q = static_cast<long long>(negatives);
  const auto b = static_cast<long long>(budget);
  result.upper = static_cast<std::size_t>(std::max(b, p - q + b));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t c) {
                     return margin[a] > margin[c];
                   });

  std::vector<std::size_t> chosen;
  for (std::size_t j : order) {
    if (candidate[j] && chosen.size() < result.upper) chosen.push_back(j);
  }
  for (std::size_t j : order) {
    if (chosen.size() >= result.lower) break;
    if (!candidate[j]) chosen.push_back(j);
  }
  std::sort(chosen.begin(), chosen.end());
  result.selected_indices = std::move(chosen);
  return result;
}

Matrix gather_rows(const Matrix& m, const std::vector<std::size_t>& indices) {
  Matrix out(static_cast<Eigen::Index>(indices.size()), m.cols());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    out.row(static_cast<Eigen::Index>(k)) =
        m.row(static_cast<Eigen::Index>(indices[k]));
  }
  return out;
}

ClassifierWeights rebuild_classifier(const embed::EmbeddingMatrix& pos,
                                     const embed::EmbeddingMatrix& neg_support,
                                     const embed::EmbeddingMatrix& neg_selected) {
  embed::EmbeddingMatrix neg;
  neg.normalized = neg_support.normalized && neg_selected.normalized;
  if (neg_selected.rows.rows() == 0) {
    neg.rows = neg_support.rows;
  } else {
    if (neg_support.rows.rows() > 0 &&
        neg_support.rows.cols() != neg_selected.rows.cols()) {
      throw Error(Errc::DimensionMismatch, "negative sets differ in width");
    }
    neg.rows.resize(neg_support.rows.rows() + neg_selected.rows.rows(),
                    neg_selected.rows.cols());
    if (neg_support.rows.rows() > 0) {
      neg.rows.topRows(neg_support.rows.rows()) = neg_support.rows;
    }
    neg.rows.bottomRows(neg_selected.rows.rows()) = neg_selected.rows;
  }
  return build_prototypes(pos, neg, Provenance::W2);
}

}  // namespace fsbed::proto
