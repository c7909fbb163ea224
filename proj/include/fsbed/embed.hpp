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

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fsbed/common.hpp"
#include "fsbed/frontend.hpp"
#include "fsbed/task.hpp"

namespace fsbed::embed {

enum class EmbedderKind { Pooled, Trainable, External };

// Statistics pooling over a segment. The segment (optionally widened by
// context * seg_len frames on each side, clipped to the recording) is cut
// into sub_windows equal parts; each part contributes per-mel mean and
// standard deviation.
struct PoolingConfig {
  int sub_windows = 1;
  double context = 0.0;
};

struct EmbedderSpec {
  EmbedderKind kind = EmbedderKind::Pooled;
  int d = 64;
  PoolingConfig pooling;
  std::uint64_t seed = 0;
  bool trainable = false;
  // Affine map of the trainable backend, d x input_dim and d. Empty until
  // materialized; materialization is a pure function of (seed, input_dim).
  Matrix weight;
  Vector bias;
  // External backend: CSV or EMBD binary file.
  std::string external_path;

  void validate() const;
  bool operator==(const EmbedderSpec& other) const;
};

// Local-feature student: four sub-windows, trainable projection.
EmbedderSpec default_student();
// Long-context teacher: whole-segment statistics over a window widened by
// half a segment on each side.
EmbedderSpec default_teacher();

struct EmbeddingMatrix {
  Matrix rows;
  bool normalized = false;
  std::size_t degenerate_rows = 0;  // zero rows replaced by e_1
};

int pooled_dim(const PoolingConfig& pooling, int n_mels);

// One row of pooled statistics per grid segment.
Matrix pooled_features(const audio::PcenGram& gram,
                       const task::SegmentGrid& grid,
                       const PoolingConfig& pooling);

// Seeded Gaussian matrix scaled by 1/sqrt(input_dim), d x input_dim.
Matrix random_projection(int d, int input_dim, std::uint64_t seed);

// Fills weight/bias of a trainable spec if they are empty.
EmbedderSpec materialize(EmbedderSpec spec, int input_dim);

// Maps pooled features to embeddings: linear projection for the pooled
// backend, tanh(W x + b) for the trainable one.
Matrix project(const EmbedderSpec& spec, const Matrix& features);

EmbeddingMatrix embed(const EmbedderSpec& spec, const audio::PcenGram& gram,
                      const task::SegmentGrid& grid);

// Zero rows (norm < 1e-12) become e_1 and are counted in degenerate_rows.
EmbeddingMatrix l2_normalize(EmbeddingMatrix m);

Matrix import_external_embeddings(const std::filesystem::path& path,
                                  std::size_t expected_rows, int d);
void write_embeddings_csv(const std::filesystem::path& path, const Matrix& m);
void write_embeddings_binary(const std::filesystem::path& path,
                             const Matrix& m);

// ---------------------------------------------------------------------------
// Cross-entropy training of the trainable backend.

struct LabeledFeatures {
  Matrix features;          // pooled statistics, one row per example
  std::vector<int> labels;  // class ids in [0, n_classes)
};

struct ClassificationHead {
  Matrix weight;  // n_classes x d
  Vector bias;
};

ClassificationHead make_head(int n_classes, int d, std::uint64_t seed);

struct CrossEntropyGrad {
  double loss = 0.0;  // mean over examples
  Matrix d_weight;
  Vector d_bias;
  Matrix d_head_weight;
  Vector d_head_bias;
};

// Mean softmax cross-entropy of head(tanh(W x + b)) and its exact gradient.
CrossEntropyGrad cross_entropy(const EmbedderSpec& spec,
                               const ClassificationHead& head,
                               const Matrix& features,
                               std::span<const int> labels);

struct TrainOptions {
  int epochs = 10;
  double lr = 1e-4;
  int batch_size = 32;
  std::uint64_t seed = 0;
};

struct TrainResult {
  EmbedderSpec spec;
  std::vector<double> epoch_loss;  // mean mini-batch loss per epoch
};

// Mini-batch Adam on a throwaway linear head; only the spec is returned.
TrainResult pretrain_embedder(EmbedderSpec spec, const LabeledFeatures& corpus,
                              const TrainOptions& options);

struct FinetuneResult {
  EmbedderSpec spec;
  std::vector<double> step_loss;  // loss before each step
  std::string notice;             // set when fine-tuning was skipped
};

// Full-batch binary cross-entropy steps on the support set (label 1 =
// positive). Non-trainable specs and single-class data pass through.
FinetuneResult finetune_on_support(EmbedderSpec spec,
                                   const LabeledFeatures& support, double lr,
                                   int steps, std::uint64_t seed);

}  // namespace fsbed::embed
