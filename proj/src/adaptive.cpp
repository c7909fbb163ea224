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

#include "fsbed/adaptive.hpp"

#include <algorithm>
#include <cmath>

#include "fsbed/optim.hpp"

namespace fsbed::adapt {
namespace {

double clamped_log(double p) { return std::log(std::max(p, kProbFloor)); }

// Derivative factor of p * log(max(p, floor)) beyond the log term: 1 where
// the clamp is inactive, 0 where it holds p at the floor.
double active(double p) { return p > kProbFloor ? 1.0 : 0.0; }

void require_same_shape(const proto::ProbMatrix& a, const proto::ProbMatrix& b) {
  if (a.p.rows() != b.p.rows() || a.p.cols() != b.p.cols()) {
    throw Error(Errc::ShapeMismatch, "probability matrices differ in shape");
  }
}

struct Scoped {
  Matrix embs;
  proto::ProbMatrix p_te;
};

Scoped restrict_rows(const Matrix& embs, const proto::ProbMatrix& p_te,
                     const std::vector<std::size_t>& rows) {
  return {proto::gather_rows(embs, rows), {proto::gather_rows(p_te.p, rows)}};
}

}  // namespace

void AdaptiveConfig::validate() const {
  if (!(lambda >= 0.0)) throw Error(Errc::InvalidConfig, "lambda must be >= 0");
  if (!(T > 0.0)) throw Error(Errc::InvalidConfig, "T must be > 0");
  if (!(lr >= 0.0)) throw Error(Errc::InvalidConfig, "lr must be >= 0");
  if (max_steps < 0) throw Error(Errc::InvalidConfig, "max_steps must be >= 0");
}

double kl_divergence_sum(const proto::ProbMatrix& p_st,
                         const proto::ProbMatrix& p_te) {
  require_same_shape(p_st, p_te);
  double kl = 0.0;
  for (Eigen::Index i = 0; i < p_st.p.rows(); ++i) {
    for (Eigen::Index k = 0; k < p_st.p.cols(); ++k) {
      const double p = p_st.p(i, k);
      kl += p * (clamped_log(p) - clamped_log(p_te.p(i, k)));
    }
  }
  return kl;
}

EntropyTerms mutual_information_terms(const proto::ProbMatrix& p_st) {
  const auto n = p_st.p.rows();
  if (n == 0) throw Error(Errc::EmptyMatrix, "no rows for entropy terms");
  EntropyTerms t;
  const Eigen::RowVectorXd marginal = p_st.p.colwise().mean();
  for (Eigen::Index k = 0; k < marginal.size(); ++k) {
    const double pk = marginal(k);
    if (pk > 0.0) t.h_marginal -= pk * clamped_log(pk);
  }
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < p_st.p.cols(); ++k) {
      const double p = p_st.p(i, k);
      if (p > 0.0) acc += p * clamped_log(p);
    }
  }
  t.h_conditional = -acc / static_cast<double>(n);
  t.mutual_info = t.h_marginal - t.h_conditional;
  return t;
}

LossBreakdown adaptive_loss(const proto::ProbMatrix& p_st,
                            const proto::ProbMatrix& p_te, int seg_len,
                            const AdaptiveConfig& cfg) {
  if (seg_len < 1) throw Error(Errc::InvalidConfig, "seg_len must be >= 1");
  LossBreakdown out;
  out.kl = kl_divergence_sum(p_st, p_te);
  const EntropyTerms e = mutual_information_terms(p_st);
  out.h_marginal = e.h_marginal;
  out.h_conditional = e.h_conditional;
  out.mutual_info = e.mutual_info;
  out.weight = seg_len / cfg.T;
  out.total = out.weight * (out.kl - cfg.lambda * out.mutual_info);
  return out;
}

Matrix student_loss_gradient(const proto::ClassifierWeights& w_st,
                             const Matrix& student_embs,
                             const proto::ProbMatrix& p_te, int seg_len,
                             const AdaptiveConfig& cfg) {
  if (student_embs.rows() != p_te.p.rows() ||
      w_st.W.rows() != p_te.p.cols() || student_embs.cols() != w_st.W.cols()) {
    throw Error(Errc::ShapeMismatch, "gradient inputs disagree in shape");
  }
  const auto n = student_embs.rows();
  const auto k_count = w_st.W.rows();
  if (n == 0) throw Error(Errc::EmptyMatrix, "no query rows");
  const double inv_n = 1.0 / static_cast<double>(n);
  const double weight = seg_len / cfg.T;

  const Matrix p = predict_probs(w_st, student_embs).p;
  const Eigen::RowVectorXd marginal = p.colwise().mean();

  // dL/dp for every entry.
  Matrix g(n, k_count);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < k_count; ++k) {
      const double pik = p(i, k);
      const double lq = clamped_log(p_te.p(i, k));
      const double d_kl = active(pik) * (clamped_log(pik) - lq + 1.0);
      const double d_hm =
          -inv_n * (clamped_log(marginal(k)) + active(marginal(k)));
      const double d_hc = -inv_n * (clamped_log(pik) + active(pik));
      g(i, k) = weight * (d_kl - cfg.lambda * (d_hm - d_hc));
    }
  }

  // Back through the softmax over logits a_ik = -||w_k - z_i||.
  Matrix grad = Matrix::Zero(k_count, w_st.W.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mean_g = p.row(i).dot(g.row(i));
    for (Eigen::Index k = 0; k < k_count; ++k) {
      const double d_logit = p(i, k) * (g(i, k) - mean_g);
      const Eigen::RowVectorXd diff = w_st.W.row(k) - student_embs.row(i);
      const double dist = diff.norm();
      if (dist > 0.0) grad.row(k) -= d_logit * diff / dist;
    }
  }
  return grad;
}

std::vector<std::size_t> disagreements(const proto::ProbMatrix& p_st,
                                       const proto::ProbMatrix& p_te) {
  require_same_shape(p_st, p_te);
  std::vector<std::size_t> rows;
  for (Eigen::Index i = 0; i < p_st.p.rows(); ++i) {
    Eigen::Index a = 0, b = 0;
    p_st.p.row(i).maxCoeff(&a);
    p_te.p.row(i).maxCoeff(&b);
    if (a != b) rows.push_back(static_cast<std::size_t>(i));
  }
  return rows;
}

AdaptResult adapt_student(const proto::ClassifierWeights& w_st,
                          const Matrix& student_embs,
                          const proto::ProbMatrix& p_te, int seg_len,
                          const AdaptiveConfig& cfg) {
  cfg.validate();
  if (student_embs.rows() != p_te.p.rows()) {
    throw Error(Errc::ShapeMismatch, "student rows differ from teacher rows");
  }
  AdaptResult result{w_st, {}};
  result.weights.provenance = proto::Provenance::Adapted;
  Adam opt({cfg.lr});
  for (int step = 0; step < cfg.max_steps; ++step) {
    const proto::ProbMatrix p_st = predict_probs(result.weights, student_embs);
    const std::vector<std::size_t> rows = disagreements(p_st, p_te);
    if (rows.empty()) break;

    StepRecord rec;
    rec.step = step;
    rec.disagreements = rows.size();
    Matrix grad;
    if (cfg.loss_scope == LossScope::Full) {
      rec.loss = adaptive_loss(p_st, p_te, seg_len, cfg);
      grad = student_loss_gradient(result.weights, student_embs, p_te, seg_len,
                                   cfg);
    } else {
      const Scoped s = restrict_rows(student_embs, p_te, rows);
      rec.loss = adaptive_loss({proto::gather_rows(p_st.p, rows)}, s.p_te,
                               seg_len, cfg);
      grad = student_loss_gradient(result.weights, s.embs, s.p_te, seg_len, cfg);
    }
    result.log.push_back(rec);

    opt.tick();
    opt.update(0,
               {result.weights.W.data(),
                static_cast<std::size_t>(result.weights.W.size())},
               {grad.data(), static_cast<std::size_t>(grad.size())});
  }
  return result;
}

}  // namespace fsbed::adapt
