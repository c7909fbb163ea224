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

#include <vector>

#include "fsbed/common.hpp"
#include "fsbed/proto.hpp"

namespace fsbed::adapt {

enum class LossScope { Full, Disagreement };

struct AdaptiveConfig {
  double lambda = 0.5;
  double T = 150.0;  // duration normalizer, frames
  double lr = 1e-5;
  int max_steps = 20;
  LossScope loss_scope = LossScope::Full;

  void validate() const;
};

// Probabilities are clamped to [kProbFloor, 1] before any logarithm.
inline constexpr double kProbFloor = 1e-12;

struct LossBreakdown {
  double kl = 0.0;
  double h_marginal = 0.0;
  double h_conditional = 0.0;
  double mutual_info = 0.0;
  double weight = 0.0;  // seg_len / T
  double total = 0.0;
};

// Sum over rows (not mean) of KL(p_st || p_te).
double kl_divergence_sum(const proto::ProbMatrix& p_st,
                         const proto::ProbMatrix& p_te);

struct EntropyTerms {
  double h_marginal = 0.0;
  double h_conditional = 0.0;
  double mutual_info = 0.0;
};

// Marginal entropy of the mean prediction, mean per-row entropy, and their
// difference. Natural log, 0 log 0 = 0.
EntropyTerms mutual_information_terms(const proto::ProbMatrix& p_st);

// (seg_len / T) * (KL - lambda * I).
LossBreakdown adaptive_loss(const proto::ProbMatrix& p_st,
                            const proto::ProbMatrix& p_te, int seg_len,
                            const AdaptiveConfig& cfg);

// Gradient of adaptive_loss w.r.t. the student prototypes, with p_st =
// predict_probs(W_st, embs) and the teacher held fixed.
Matrix student_loss_gradient(const proto::ClassifierWeights& w_st,
                             const Matrix& student_embs,
                             const proto::ProbMatrix& p_te, int seg_len,
                             const AdaptiveConfig& cfg);

// Rows where the student and teacher pick different classes.
std::vector<std::size_t> disagreements(const proto::ProbMatrix& p_st,
                                       const proto::ProbMatrix& p_te);

struct StepRecord {
  int step = 0;
  LossBreakdown loss;
  std::size_t disagreements = 0;
};

struct AdaptResult {
  proto::ClassifierWeights weights;
  std::vector<StepRecord> log;
};

// Gated Adam loop on the student prototypes only: a step is taken while the
// student and teacher disagree on at least one query row.
AdaptResult adapt_student(const proto::ClassifierWeights& w_st,
                          const Matrix& student_embs,
                          const proto::ProbMatrix& p_te, int seg_len,
                          const AdaptiveConfig& cfg);

}  // namespace fsbed::adapt
