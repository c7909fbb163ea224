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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "fsbed/embed.hpp"
#include "fsbed/optim.hpp"
#include "test_util.hpp"

namespace {

using fsbed::Errc;
using fsbed::Matrix;
using fsbed::Vector;
using fsbed::embed::EmbedderKind;
using fsbed::embed::EmbedderSpec;
using fsbed::embed::EmbeddingMatrix;

fsbed::audio::PcenGram constant_gram(int frames, double v) {
  fsbed::audio::PcenGram g;
  g.values = Matrix::Constant(frames, 16, v);
  return g;
}

fsbed::audio::PcenGram random_gram(int frames, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  fsbed::audio::PcenGram g;
  g.values = testutil::random_matrix(frames, 16, rng).cwiseAbs();
  return g;
}

fsbed::task::SegmentGrid grid_for(int frames, int seg_len) {
  return fsbed::task::make_grid(frames, {seg_len, seg_len, std::max(1, seg_len / 4)},
                                10.0);
}

std::vector<EmbedderSpec> all_computed_specs() {
  EmbedderSpec pooled = fsbed::embed::default_teacher();
  EmbedderSpec trainable = fsbed::embed::default_student();
  EmbedderSpec flat = pooled;
  flat.pooling = {2, 0.0};
  return {pooled, trainable, flat};
}

// Two Gaussian blobs in feature space, separated along every coordinate.
fsbed::embed::LabeledFeatures blobs(int n, int dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.3);
  fsbed::embed::LabeledFeatures out;
  out.features.resize(n, dim);
  for (int i = 0; i < n; ++i) {
    const int y = i % 2;
    out.labels.push_back(y);
    for (int j = 0; j < dim; ++j) out.features(i, j) = (y ? 1.0 : -1.0) + noise(rng);
  }
  return out;
}

template <typename F>
Errc code_of(F&& f) {
  try {
    f();
  } catch (const fsbed::Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return Errc::Io;
}

std::filesystem::path tmp(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST(Embed, ConstantGramGivesIdenticalRows) {
  const auto gram = constant_gram(200, 0.7);
  const auto grid = grid_for(200, 20);
  for (const auto& spec : all_computed_specs()) {
    const EmbeddingMatrix e = fsbed::embed::embed(spec, gram, grid);
    ASSERT_EQ(e.rows.rows(), static_cast<Eigen::Index>(grid.size()));
    ASSERT_EQ(e.rows.cols(), spec.d);
    // Running sums leave rounding-level differences only.
    for (Eigen::Index i = 1; i < e.rows.rows(); ++i) {
      ASSERT_LE((e.rows.row(i) - e.rows.row(0)).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(Embed, Deterministic) {
  const auto gram = random_gram(300, 5);
  const auto grid = grid_for(300, 24);
  for (const auto& spec : all_computed_specs()) {
    const auto a = fsbed::embed::embed(spec, gram, grid);
    const auto b = fsbed::embed::embed(spec, gram, grid);
    EXPECT_TRUE(a.rows == b.rows);
  }
}

TEST(Embed, PooledStatistics) {
  fsbed::audio::PcenGram gram;
  gram.values = Matrix::Zero(8, 2);
  for (int t = 0; t < 8; ++t) {
    gram.values(t, 0) = t;
    gram.values(t, 1) = 1.0;
  }
  const auto grid = fsbed::task::make_grid(8, {4, 4, 4}, 10.0);
  const Matrix f = fsbed::embed::pooled_features(gram, grid, {2, 0.0});
  ASSERT_EQ(f.rows(), 2);
  ASSERT_EQ(f.cols(), 8);
  // Second segment, frames 4..7, sub-windows {4,5} and {6,7}.
  EXPECT_NEAR(f(1, 0), 4.5, 1e-12);
  EXPECT_NEAR(f(1, 2), 0.5, 1e-12);
  EXPECT_NEAR(f(1, 4), 6.5, 1e-12);
  EXPECT_NEAR(f(1, 1), 1.0, 1e-12);
  EXPECT_NEAR(f(1, 3), 0.0, 1e-12);
}

TEST(Embed, ContextWidensWindow) {
  fsbed::audio::PcenGram gram;
  gram.values = Matrix::Zero(12, 1);
  for (int t = 0; t < 12; ++t) gram.values(t, 0) = t;
  const auto grid = fsbed::task::make_grid(4, {4, 4, 1}, 10.0, 4);
  const Matrix f = fsbed::embed::pooled_features(gram, grid, {1, 0.5});
  // Frames 2..9 after widening by two frames on both sides.
  EXPECT_NEAR(f(0, 0), 5.5, 1e-12);
}

TEST(Embed, ExternalPassthrough) {
  const auto grid = grid_for(60, 20);
  Matrix basis = Matrix::Zero(static_cast<Eigen::Index>(grid.size()), 4);
  for (Eigen::Index i = 0; i < basis.rows(); ++i) basis(i, i % 4) = 1.0;
  const auto path = tmp("fsbed_ext.csv");
  fsbed::embed::write_embeddings_csv(path, basis);
  EmbedderSpec spec;
  spec.kind = EmbedderKind::External;
  spec.d = 4;
  spec.external_path = path.string();
  const auto e = fsbed::embed::embed(spec, constant_gram(60, 0.0), grid);
  std::filesystem::remove(path);
  EXPECT_TRUE(e.rows == basis);
  EXPECT_FALSE(e.normalized);
}

TEST(Normalize, Examples) {
  EmbeddingMatrix m;
  m.rows.resize(3, 2);
  m.rows << 3, 4, 0.6, 0.8, 0, 0;
  const auto n = fsbed::embed::l2_normalize(m);
  EXPECT_TRUE(n.normalized);
  EXPECT_NEAR(n.rows(0, 0), 0.6, 1e-15);
  EXPECT_NEAR(n.rows(0, 1), 0.8, 1e-15);
  EXPECT_NEAR(n.rows(1, 0), 0.6, 1e-15);
  EXPECT_NEAR(n.rows(1, 1), 0.8, 1e-15);
  EXPECT_EQ(n.rows(2, 0), 1.0);
  EXPECT_EQ(n.rows(2, 1), 0.0);
  EXPECT_EQ(n.degenerate_rows, 1u);
}

TEST(Normalize, UnitNorms) {
  std::mt19937_64 rng(2);
  EmbeddingMatrix m;
  m.rows = testutil::random_matrix(100, 7, rng, 50.0);
  const auto n = fsbed::embed::l2_normalize(m);
  for (Eigen::Index i = 0; i < n.rows.rows(); ++i) {
    EXPECT_NEAR(n.rows.row(i).norm(), 1.0, 1e-6);
  }
}

TEST(External, CsvAndBinaryRoundTrip) {
  Matrix m(3, 4);
  m << 0.5, -1.25, 2.0, 0.0, 1.0, 0.125, -3.5, 4.0, 0.25, 0.75, -0.5, 8.0;
  const auto csv = tmp("fsbed_rt.csv");
  const auto bin = tmp("fsbed_rt.embd");
  fsbed::embed::write_embeddings_csv(csv, m);
  fsbed::embed::write_embeddings_binary(bin, m);
  EXPECT_TRUE(fsbed::embed::import_external_embeddings(csv, 3, 4) == m);
  EXPECT_TRUE(fsbed::embed::import_external_embeddings(bin, 3, 4) == m);
  std::filesystem::remove(csv);
  std::filesystem::remove(bin);
}

TEST(External, CsvFullPrecision) {
  std::mt19937_64 rng(8);
  const Matrix m = testutil::random_matrix(5, 3, rng);
  const auto csv = tmp("fsbed_prec.csv");
  fsbed::embed::write_embeddings_csv(csv, m);
  EXPECT_TRUE(fsbed::embed::import_external_embeddings(csv, 5, 3) == m);
  std::filesystem::remove(csv);
}

TEST(External, Errors) {
  const auto path = tmp("fsbed_err.csv");
  fsbed::embed::write_embeddings_csv(path, Matrix::Ones(2, 4));
  EXPECT_EQ(code_of([&] { fsbed::embed::import_external_embeddings(path, 3, 4); }),
            Errc::RowCountMismatch);
  EXPECT_EQ(code_of([&] { fsbed::embed::import_external_embeddings(path, 2, 5); }),
            Errc::DimensionMismatch);
  {
    std::ofstream out(path);
    out << "1,2\nnan,4\n";
  }
  EXPECT_EQ(code_of([&] { fsbed::embed::import_external_embeddings(path, 2, 2); }),
            Errc::NonFiniteValue);
  Matrix bad = Matrix::Ones(2, 2);
  bad(1, 1) = std::numeric_limits<double>::quiet_NaN();
  fsbed::embed::write_embeddings_binary(path, bad);
  EXPECT_EQ(code_of([&] { fsbed::embed::import_external_embeddings(path, 2, 2); }),
            Errc::NonFiniteValue);
  std::filesystem::remove(path);
}

TEST(Spec, Validate) {
  EmbedderSpec s = fsbed::embed::default_student();
  s.validate();
  s.d = 1;
  EXPECT_EQ(code_of([&] { s.validate(); }), Errc::DimensionMismatch);
  EmbedderSpec p = fsbed::embed::default_teacher();
  p.trainable = true;
  EXPECT_THROW(p.validate(), fsbed::Error);
  EmbedderSpec e;
  e.kind = EmbedderKind::External;
  EXPECT_THROW(e.validate(), fsbed::Error);
}

TEST(CrossEntropy, GradientMatchesFiniteDifferences) {
  constexpr double h = 1e-5;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    const auto data = blobs(12, 6, seed + 100);
    EmbedderSpec spec = fsbed::embed::default_student();
    spec.d = 5;
    spec.seed = seed;
    spec = fsbed::embed::materialize(spec, 6);
    spec.bias = testutil::random_matrix(1, 5, rng, 0.1).row(0).transpose();
    auto head = fsbed::embed::make_head(2, 5, seed);
    head.bias = testutil::random_matrix(1, 2, rng, 0.1).row(0).transpose();
    const auto g = fsbed::embed::cross_entropy(spec, head, data.features, data.labels);

    double max_err = 0.0, max_ref = 0.0;
    auto check = [&](double& param, double analytic) {
      const double keep = param;
      param = keep + h;
      const double up = fsbed::embed::cross_entropy(spec, head, data.features, data.labels).loss;
      param = keep - h;
      const double dn = fsbed::embed::cross_entropy(spec, head, data.features, data.labels).loss;
      param = keep;
      const double numeric = (up - dn) / (2 * h);
      max_err = std::max(max_err, std::abs(numeric - analytic));
      max_ref = std::max(max_ref, std::abs(numeric));
    };
    for (Eigen::Index i = 0; i < spec.weight.size(); ++i) {
      check(spec.weight.data()[i], g.d_weight.data()[i]);
    }
    for (Eigen::Index i = 0; i < spec.bias.size(); ++i) check(spec.bias(i), g.d_bias(i));
    for (Eigen::Index i = 0; i < head.weight.size(); ++i) {
      check(head.weight.data()[i], g.d_head_weight.data()[i]);
    }
    for (Eigen::Index i = 0; i < head.bias.size(); ++i) {
      check(head.bias(i), g.d_head_bias(i));
    }
    EXPECT_LE(max_err / max_ref, 1e-4) << "seed " << seed;
  }
}

TEST(Pretrain, ZeroEpochsOrZeroRateUnchanged) {
  const auto data = blobs(40, 6, 1);
  EmbedderSpec spec = fsbed::embed::materialize(fsbed::embed::default_student(), 6);
  auto r = fsbed::embed::pretrain_embedder(spec, data, {0, 1e-3, 8, 1});
  EXPECT_TRUE(r.spec == spec);
  EXPECT_TRUE(r.epoch_loss.empty());
  r = fsbed::embed::pretrain_embedder(spec, data, {5, 0.0, 8, 1});
  EXPECT_TRUE(r.spec == spec);
  EXPECT_EQ(r.epoch_loss.size(), 5u);
}

TEST(Pretrain, LossDecreasesOnSeparableCorpus) {
  const auto data = blobs(64, 6, 2);
  const auto r = fsbed::embed::pretrain_embedder(fsbed::embed::default_student(), data,
                                                 {30, 1e-2, 16, 3});
  ASSERT_EQ(r.epoch_loss.size(), 30u);
  EXPECT_LT(r.epoch_loss.back(), r.epoch_loss.front());
  const auto again = fsbed::embed::pretrain_embedder(fsbed::embed::default_student(),
                                                     data, {30, 1e-2, 16, 3});
  EXPECT_TRUE(again.spec == r.spec);
}

TEST(Pretrain, Errors) {
  auto data = blobs(10, 4, 3);
  for (int& y : data.labels) y = 1;
  EXPECT_EQ(code_of([&] {
              fsbed::embed::pretrain_embedder(fsbed::embed::default_student(), data, {});
            }),
            Errc::SingleClassCorpus);
  EXPECT_THROW(fsbed::embed::pretrain_embedder(fsbed::embed::default_teacher(),
                                               blobs(10, 4, 3), {}),
               fsbed::Error);
}

TEST(Finetune, ZeroStepsAndPooledUnchanged) {
  const auto data = blobs(10, 6, 4);
  const EmbedderSpec spec = fsbed::embed::default_student();
  auto r = fsbed::embed::finetune_on_support(spec, data, 1e-5, 0, 1);
  EXPECT_TRUE(r.spec == spec);
  const EmbedderSpec pooled = fsbed::embed::default_teacher();
  r = fsbed::embed::finetune_on_support(pooled, data, 1e-5, 50, 1);
  EXPECT_TRUE(r.spec == pooled);
  EXPECT_FALSE(r.notice.empty());
}

TEST(Finetune, ZeroRateUnchanged) {
  const auto data = blobs(10, 6, 4);
  const EmbedderSpec spec = fsbed::embed::materialize(fsbed::embed::default_student(), 6);
  const auto r = fsbed::embed::finetune_on_support(spec, data, 0.0, 20, 1);
  EXPECT_TRUE(r.spec == spec);
}

TEST(Finetune, SupportLossDecreases) {
  const auto data = blobs(20, 6, 5);
  const auto r = fsbed::embed::finetune_on_support(fsbed::embed::default_student(), data,
                                                   1e-3, 50, 7);
  ASSERT_EQ(r.step_loss.size(), 51u);
  EXPECT_LT(r.step_loss.back(), r.step_loss.front());
  EXPECT_TRUE(r.notice.empty());
}

TEST(Finetune, SingleClassPassesThrough) {
  auto data = blobs(10, 6, 6);
  for (int& y : data.labels) y = 0;
  const EmbedderSpec spec = fsbed::embed::default_student();
  const auto r = fsbed::embed::finetune_on_support(spec, data, 1e-3, 10, 1);
  EXPECT_TRUE(r.spec == spec);
  EXPECT_FALSE(r.notice.empty());
}

TEST(Adam, FirstStepMovesByLearningRate) {
  // After bias correction the first step is lr * g / (|g| + eps).
  fsbed::Adam opt({0.1, 0.9, 0.999, 1e-8});
  std::vector<double> p = {1.0, -2.0, 0.5};
  const std::vector<double> g = {3.0, -0.5, 0.0};
  opt.tick();
  opt.update(0, p, g);
  EXPECT_NEAR(p[0], 0.9, 1e-8);
  EXPECT_NEAR(p[1], -1.9, 1e-8);
  EXPECT_EQ(p[2], 0.5);
}

TEST(Adam, SecondStepMatchesUpdateEquations) {
  fsbed::Adam opt({0.01, 0.9, 0.999, 1e-8});
  std::vector<double> p = {0.0};
  opt.tick();
  opt.update(0, p, std::vector<double>{1.0});
  opt.tick();
  opt.update(0, p, std::vector<double>{-2.0});
  const double m = 0.9 * 0.1 * 1.0 + 0.1 * -2.0;
  const double v = 0.999 * 0.001 * 1.0 + 0.001 * 4.0;
  const double mhat = m / (1 - 0.81), vhat = v / (1 - 0.999 * 0.999);
  const double expect = -0.01 / (1.0 + 1e-8) - 0.01 * mhat / (std::sqrt(vhat) + 1e-8);
  EXPECT_NEAR(p[0], expect, 1e-12);
}
