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

#include "fsbed/embed.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include "fsbed/optim.hpp"

namespace fsbed::embed {
namespace {

constexpr double kZeroNorm = 1e-12;

std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw Error(Errc::CorruptHeader, "truncated embedding file");
  }
  return b[0] | (b[1] << 8) | (b[2] << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b, 4);
}

Matrix read_csv_matrix(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) {
      const auto b = field.find_first_not_of(" \t\r");
      const auto e = field.find_last_not_of(" \t\r");
      const std::string f =
          b == std::string::npos ? std::string{} : field.substr(b, e - b + 1);
      double v = 0.0;
      if (f == "nan" || f == "NaN" || f == "inf" || f == "-inf") {
        throw Error(Errc::NonFiniteValue, "line " + std::to_string(line_no));
      }
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || ptr != f.data() + f.size()) {
        throw Error(Errc::MalformedRow,
                    "embedding line " + std::to_string(line_no));
      }
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) return Matrix(0, 0);
  Matrix m(static_cast<Eigen::Index>(rows.size()),
           static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size()) {
      throw Error(Errc::DimensionMismatch, "ragged embedding CSV");
    }
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  }
  return m;
}

}  // namespace

void EmbedderSpec::validate() const {
  if (d < 2) throw Error(Errc::DimensionMismatch, "embedding d must be >= 2");
  if (trainable && kind != EmbedderKind::Trainable) {
    throw Error(Errc::InvalidConfig, "only the trainable backend can train");
  }
  if (pooling.sub_windows < 1) {
    throw Error(Errc::InvalidConfig, "sub_windows must be >= 1");
  }
  if (pooling.context < 0.0) {
    throw Error(Errc::InvalidConfig, "context must be nonnegative");
  }
  if (kind == EmbedderKind::External && external_path.empty()) {
    throw Error(Errc::InvalidConfig, "external backend needs a path");
  }
  if (weight.size() > 0 && (weight.rows() != d || bias.size() != d)) {
    throw Error(Errc::DimensionMismatch, "trainable weights do not match d");
  }
}

bool EmbedderSpec::operator==(const EmbedderSpec& o) const {
  if (kind != o.kind || d != o.d || seed != o.seed || trainable != o.trainable ||
      external_path != o.external_path ||
      pooling.sub_windows != o.pooling.sub_windows ||
      pooling.context != o.pooling.context) {
    return false;
  }
  if (weight.size() == 0 && o.weight.size() == 0) return true;
  const EmbedderSpec a =
      weight.size() ? *this : materialize(*this, static_cast<int>(o.weight.cols()));
  const EmbedderSpec b =
      o.weight.size() ? o : materialize(o, static_cast<int>(weight.cols()));
  return a.weight.rows() == b.weight.rows() &&
         a.weight.cols() == b.weight.cols() && a.weight == b.weight &&
         a.bias == b.bias;
}

EmbedderSpec default_student() {
  EmbedderSpec s;
  s.kind = EmbedderKind::Trainable;
  s.trainable = true;
  s.d = 64;
  s.pooling = {4, 0.0};
  s.seed = 17;
  return s;
}

EmbedderSpec default_teacher() {
  EmbedderSpec s;
  s.kind = EmbedderKind::Pooled;
  s.d = 64;
  s.pooling = {1, 0.5};
  s.seed = 29;
  return s;
}

int pooled_dim(const PoolingConfig& pooling, int n_mels) {
  return 2 * n_mels * pooling.sub_windows;
}

Matrix pooled_features(const audio::PcenGram& gram,
                       const task::SegmentGrid& grid,
                       const PoolingConfig& pooling) {
  const int n_frames = gram.n_frames();
  const int n_mels = gram.n_mels();
  const int sw = pooling.sub_windows;
  const int ext =
      static_cast<int>(std::lround(pooling.context * grid.seg_len));

  Matrix out(static_cast<Eigen::Index>(grid.size()), pooled_dim(pooling, n_mels));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto& seg = grid.segments[i];
    const int a = grid.origin_frame + seg.start;
    const int b = grid.origin_frame + seg.end;
    if (a < 0 || a >= n_frames) {
      throw Error(Errc::AlignmentMismatch, "segment starts outside the gram");
    }
    const int lo = std::max(0, a - ext);
    const int hi = std::max(b, std::min(n_frames, b + ext));
    const int len = hi - lo;
    for (int k = 0; k < sw; ++k) {
      int p0 = lo + k * len / sw;
      int p1 = lo + (k + 1) * len / sw;
      if (p1 <= p0) {
        p0 = std::min(p0, hi - 1);
        p1 = p0 + 1;
      }
      // Frames at or beyond n_frames are zero padding.
      const int real = std::max(0, std::min(p1, n_frames) - p0);
      const double count = p1 - p0;
      const auto block = gram.values.middleRows(std::min(p0, n_frames), real);
      const Eigen::RowVectorXd mean = block.colwise().sum() / count;
      const Eigen::RowVectorXd ss =
          (block.rowwise() - mean).array().square().colwise().sum().matrix() +
          (count - real) * mean.array().square().matrix();
      const Eigen::Index base = static_cast<Eigen::Index>(k) * 2 * n_mels;
      out.block(static_cast<Eigen::Index>(i), base, 1, n_mels) = mean;
      out.block(static_cast<Eigen::Index>(i), base + n_mels, 1, n_mels) =
          (ss / count).array().sqrt().matrix();
    }
  }
  return out;
}

Matrix random_projection(int d, int input_dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double scale = 1.0 / std::sqrt(static_cast<double>(input_dim));
  Matrix p(d, input_dim);
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    for (Eigen::Index c = 0; c < p.cols(); ++c) p(r, c) = normal(rng) * scale;
  }
  return p;
}

EmbedderSpec materialize(EmbedderSpec spec, int input_dim) {
  if (spec.kind != EmbedderKind::Trainable || spec.weight.size() > 0) {
    return spec;
  }
  spec.weight = random_projection(spec.d, input_dim, spec.seed);
  spec.bias = Vector::Zero(spec.d);
  return spec;
}

Matrix project(const EmbedderSpec& spec, const Matrix& features) {
  switch (spec.kind) {
    case EmbedderKind::Pooled: {
      const Matrix p = random_projection(
          spec.d, static_cast<int>(features.cols()), spec.seed);
      return features * p.transpose();
    }
    case EmbedderKind::Trainable: {
      const EmbedderSpec s =
          materialize(spec, static_cast<int>(features.cols()));
      if (s.weight.cols() != features.cols()) {
        throw Error(Errc::DimensionMismatch,
                    "trainable weights expect " +
                        std::to_string(s.weight.cols()) + " inputs, got " +
                        std::to_string(features.cols()));
      }
      Matrix h = features * s.weight.transpose();
      h.rowwise() += s.bias.transpose();
      return h.array().tanh().matrix();
    }
    case EmbedderKind::External:
      break;
  }
  throw Error(Errc::InvalidConfig, "external backend has no projection");
}

EmbeddingMatrix embed(const EmbedderSpec& spec, const audio::PcenGram& gram,
                      const task::SegmentGrid& grid) {
  spec.validate();
  EmbeddingMatrix out;
  if (spec.kind == EmbedderKind::External) {
    out.rows = import_external_embeddings(spec.external_path, grid.size(),
                                          spec.d);
    return out;
  }
  out.rows = project(spec, pooled_features(gram, grid, spec.pooling));
  if (out.rows.cols() != spec.d) {
    throw Error(Errc::DimensionMismatch, "projection produced wrong width");
  }
  return out;
}

EmbeddingMatrix l2_normalize(EmbeddingMatrix m) {
  for (Eigen::Index i = 0; i < m.rows.rows(); ++i) {
    const double norm = m.rows.row(i).norm();
    if (norm < kZeroNorm) {
      m.rows.row(i).setZero();
      if (m.rows.cols() > 0) m.rows(i, 0) = 1.0;
      ++m.degenerate_rows;
    } else {
      m.rows.row(i) /= norm;
    }
  }
  m.normalized = true;
  return m;
}

Matrix import_external_embeddings(const std::filesystem::path& path,
                                  std::size_t expected_rows, int d) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  char magic[4] = {0, 0, 0, 0};
  in.read(magic, 4);
  Matrix m;
  if (in.gcount() == 4 && std::string(magic, 4) == "EMBD") {
    const std::uint32_t rows = read_u32(in);
    const std::uint32_t cols = read_u32(in);
    m.resize(rows, cols);
    for (std::uint32_t r = 0; r < rows; ++r) {
      for (std::uint32_t c = 0; c < cols; ++c) {
        m(r, c) = std::bit_cast<float>(read_u32(in));
      }
    }
  } else {
    in.clear();
    in.seekg(0);
    m = read_csv_matrix(in);
  }
  if (!m.allFinite()) {
    throw Error(Errc::NonFiniteValue, "non-finite value in " + path.string());
  }
  if (static_cast<std::size_t>(m.rows()) != expected_rows) {
    throw Error(Errc::RowCountMismatch,
                path.string() + " has " + std::to_string(m.rows()) +
                    " rows, expected " + std::to_string(expected_rows));
  }
  if (m.cols() != d) {
    throw Error(Errc::DimensionMismatch,
                path.string() + " has " + std::to_string(m.cols()) +
                    " columns, expected " + std::to_string(d));
  }
  return m;
}

void write_embeddings_csv(const std::filesystem::path& path, const Matrix& m) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << m(i, j);
    }
    out << '\n';
  }
}

void write_embeddings_binary(const std::filesystem::path& path,
                             const Matrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out.write("EMBD", 4);
  write_u32(out, static_cast<std::uint32_t>(m.rows()));
  write_u32(out, static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      write_u32(out,
                std::bit_cast<std::uint32_t>(static_cast<float>(m(i, j))));
    }
  }
}

ClassificationHead make_head(int n_classes, int d, std::uint64_t seed) {
  ClassificationHead head;
  head.weight = random_projection(n_classes, d, seed ^ 0x9E3779B97F4A7C15ull);
  head.bias = Vector::Zero(n_classes);
  return head;
}

CrossEntropyGrad cross_entropy(const EmbedderSpec& spec,
                               const ClassificationHead& head,
                               const Matrix& features,
                               std::span<const int> labels) {
  if (spec.weight.size() == 0) {
    throw Error(Errc::InvalidConfig, "cross_entropy needs materialized weights");
  }
  const auto n = features.rows();
  if (static_cast<std::size_t>(n) != labels.size() || n == 0) {
    throw Error(Errc::ShapeMismatch, "features and labels differ in length");
  }
  Matrix h = features * spec.weight.transpose();
  h.rowwise() += spec.bias.transpose();
  const Matrix z = h.array().tanh().matrix();
  Matrix logits = z * head.weight.transpose();
  logits.rowwise() += head.bias.transpose();

  CrossEntropyGrad g;
  Matrix dlogits(n, logits.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mx = logits.row(i).maxCoeff();
    const Eigen::RowVectorXd e = (logits.row(i).array() - mx).exp().matrix();
    const double denom = e.sum();
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= logits.cols()) {
      throw Error(Errc::ShapeMismatch, "label outside head classes");
    }
    g.loss += -(logits(i, y) - mx - std::log(denom));
    dlogits.row(i) = e / denom;
    dlogits(i, y) -= 1.0;
  }
  g.loss /= static_cast<double>(n);
  dlogits /= static_cast<double>(n);

  g.d_head_weight = dlogits.transpose() * z;
  g.d_head_bias = dlogits.colwise().sum().transpose();
  const Matrix dz = dlogits * head.weight;
  const Matrix dh = (dz.array() * (1.0 - z.array().square())).matrix();
  g.d_weight = dh.transpose() * features;
  g.d_bias = dh.colwise().sum().transpose();
  return g;
}

namespace {

void adam_step(Adam& opt, EmbedderSpec& spec, ClassificationHead& head,
               CrossEntropyGrad& g) {
  opt.tick();
  opt.update(0, {spec.weight.data(), static_cast<std::size_t>(spec.weight.size())},
             {g.d_weight.data(), static_cast<std::size_t>(g.d_weight.size())});
  opt.update(1, {spec.bias.data(), static_cast<std::size_t>(spec.bias.size())},
             {g.d_bias.data(), static_cast<std::size_t>(g.d_bias.size())});
  opt.update(2,
             {head.weight.data(), static_cast<std::size_t>(head.weight.size())},
             {g.d_head_weight.data(),
              static_cast<std::size_t>(g.d_head_weight.size())});
  opt.update(3, {head.bias.data(), static_cast<std::size_t>(head.bias.size())},
             {g.d_head_bias.data(),
              static_cast<std::size_t>(g.d_head_bias.size())});
}

int count_classes(std::span<const int> labels) {
  int n = 0;
  for (int y : labels) n = std::max(n, y + 1);
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  for (int y : labels) {
    if (y < 0) throw Error(Errc::InvalidConfig, "negative class label");
    seen[static_cast<std::size_t>(y)] = true;
  }
  return static_cast<int>(std::count(seen.begin(), seen.end(), true));
}

}  // namespace

TrainResult pretrain_embedder(EmbedderSpec spec, const LabeledFeatures& corpus,
                              const TrainOptions& options) {
  spec.validate();
  if (spec.kind != EmbedderKind::Trainable) {
    throw Error(Errc::InvalidConfig, "pretraining needs the trainable backend");
  }
  if (corpus.features.rows() == 0 ||
      static_cast<std::size_t>(corpus.features.rows()) != corpus.labels.size()) {
    throw Error(Errc::ShapeMismatch, "empty or misaligned training corpus");
  }
  if (count_classes(corpus.labels) < 2) {
    throw Error(Errc::SingleClassCorpus, "pretraining needs two classes");
  }
  TrainResult result{spec, {}};
  if (options.epochs <= 0) return result;

  EmbedderSpec trained =
      materialize(spec, static_cast<int>(corpus.features.cols()));
  const int n_classes =
      *std::max_element(corpus.labels.begin(), corpus.labels.end()) + 1;
  ClassificationHead head = make_head(n_classes, trained.d, options.seed);
  Adam opt({options.lr});
  std::mt19937_64 rng(options.seed);

  const auto n = static_cast<std::size_t>(corpus.features.rows());
  const std::size_t batch =
      static_cast<std::size_t>(std::max(1, options.batch_size));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t stop = std::min(n, start + batch);
      Matrix x(static_cast<Eigen::Index>(stop - start), corpus.features.cols());
      std::vector<int> y(stop - start);
      for (std::size_t k = start; k < stop; ++k) {
        x.row(static_cast<Eigen::Index>(k - start)) =
            corpus.features.row(static_cast<Eigen::Index>(order[k]));
        y[k - start] = corpus.labels[order[k]];
      }
      CrossEntropyGrad g = cross_entropy(trained, head, x, y);
      total += g.loss;
      ++batches;
      adam_step(opt, trained, head, g);
    }
    result.epoch_loss.push_back(total / batches);
  }
  result.spec = std::move(trained);
  return result;
}

FinetuneResult finetune_on_support(EmbedderSpec spec,
                                   const LabeledFeatures& support, double lr,
                                   int steps, std::uint64_t seed) {
  FinetuneResult result{spec, {}, {}};
  if (spec.kind != EmbedderKind::Trainable) {
    result.notice = "fine-tuning skipped: backend is not trainable";
    return result;
  }
  if (steps <= 0) {
    result.notice = "fine-tuning skipped: zero steps";
    return result;
  }
  if (support.features.rows() == 0 || count_classes(support.labels) < 2) {
    result.notice = "fine-tuning skipped: support lacks both classes";
    return result;
  }
  EmbedderSpec tuned =
      materialize(std::move(spec), static_cast<int>(support.features.cols()));
  ClassificationHead head = make_head(2, tuned.d, seed);
  Adam opt({lr});
  for (int s = 0; s < steps; ++s) {
    CrossEntropyGrad g = cross_entropy(tuned, head, support.features,
                                       support.labels);
    result.step_loss.push_back(g.loss);
    adam_step(opt, tuned, head, g);
  }
  result.step_loss.push_back(
      cross_entropy(tuned, head, support.features, support.labels).loss);
  result.spec = std::move(tuned);
  return result;
}

}  // namespace fsbed::embed
