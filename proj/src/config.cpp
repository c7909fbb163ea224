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

#include <fstream>

#include "fsbed/pipeline.hpp"

namespace fsbed::pipeline {
namespace {

using nlohmann::json;

std::string kind_name(embed::EmbedderKind k) {
  switch (k) {
    case embed::EmbedderKind::Pooled: return "pooled";
    case embed::EmbedderKind::Trainable: return "trainable";
    case embed::EmbedderKind::External: return "external";
  }
  return "pooled";
}

embed::EmbedderKind kind_from(const std::string& s) {
  if (s == "pooled") return embed::EmbedderKind::Pooled;
  if (s == "trainable") return embed::EmbedderKind::Trainable;
  if (s == "external") return embed::EmbedderKind::External;
  throw Error(Errc::InvalidConfig, "unknown embedder kind '" + s + "'");
}

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    rows.push_back(std::vector<double>(m.row(i).begin(), m.row(i).end()));
  }
  return rows;
}

Matrix matrix_from(const json& j) {
  if (j.empty()) return Matrix(0, 0);
  Matrix m(static_cast<Eigen::Index>(j.size()),
           static_cast<Eigen::Index>(j.at(0).size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (j[i].size() != static_cast<std::size_t>(m.cols())) {
      throw Error(Errc::DimensionMismatch, "ragged weight matrix");
    }
    for (std::size_t c = 0; c < j[i].size(); ++c) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
          j[i][c].get<double>();
    }
  }
  return m;
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void PipelineConfig::validate() const {
  frontend.validate();
  student.validate();
  teacher.validate();
  adaptive.validate();
  eval.validate();
  if (budget < 1) throw Error(Errc::InvalidConfig, "B must be >= 1");
  if (n_shots < 1) throw Error(Errc::InvalidConfig, "n_shots must be >= 1");
  if (random_negatives_per_positive < 1) {
    throw Error(Errc::InvalidConfig, "random_negatives_per_positive >= 1");
  }
  if (finetune.steps < 0 || finetune.lr < 0.0) {
    throw Error(Errc::InvalidConfig, "finetune steps and lr must be >= 0");
  }
  if (use_al && student == teacher) {
    throw Error(Errc::InvalidConfig,
                "adaptive learning needs distinct student and teacher specs");
  }
}

PipelineConfig ablation_preset(const std::string& name) {
  PipelineConfig cfg;
  cfg.name = name;
  if (name == "None") {
    cfg.negative_source = NegativeSource::RandomQuery;
    cfg.use_nss = false;
    cfg.use_al = false;
  } else if (name == "NS") {
    cfg.use_nss = false;
    cfg.use_al = false;
  } else if (name == "NSS") {
    cfg.use_al = false;
  } else if (name == "AL") {
    cfg.use_nss = false;
  } else if (name != "NSS+AL") {
    throw Error(Errc::InvalidConfig, "unknown ablation preset '" + name + "'");
  }
  return cfg;
}

json spec_to_json(const embed::EmbedderSpec& s) {
  json j{{"kind", kind_name(s.kind)},
         {"d", s.d},
         {"sub_windows", s.pooling.sub_windows},
         {"context", s.pooling.context},
         {"seed", s.seed},
         {"trainable", s.trainable}};
  if (!s.external_path.empty()) j["external_path"] = s.external_path;
  if (s.weight.size() > 0) {
    j["weight"] = matrix_json(s.weight);
    j["bias"] = std::vector<double>(s.bias.begin(), s.bias.end());
  }
  return j;
}

embed::EmbedderSpec spec_from_json(const json& j) {
  embed::EmbedderSpec s;
  if (j.contains("kind")) s.kind = kind_from(j.at("kind").get<std::string>());
  s.trainable = s.kind == embed::EmbedderKind::Trainable;
  read(j, "d", s.d);
  read(j, "sub_windows", s.pooling.sub_windows);
  read(j, "context", s.pooling.context);
  read(j, "seed", s.seed);
  read(j, "trainable", s.trainable);
  read(j, "external_path", s.external_path);
  if (j.contains("weight")) {
    s.weight = matrix_from(j.at("weight"));
    const auto b = j.at("bias").get<std::vector<double>>();
    s.bias = Eigen::Map<const Vector>(b.data(), static_cast<Eigen::Index>(b.size()));
  }
  return s;
}

json config_to_json(const PipelineConfig& c) {
  const auto& f = c.frontend;
  return json{
      {"name", c.name},
      {"frontend",
       {{"target_rate", f.target_rate},
        {"frame_length_ms", f.frame_length_ms},
        {"frame_shift_ms", f.frame_shift_ms},
        {"n_mels", f.n_mels},
        {"fft_size", f.fft_size},
        {"fmin", f.fmin},
        {"fmax", f.fmax},
        {"pcen",
         {{"smoothing", f.pcen.smoothing},
          {"alpha", f.pcen.alpha},
          {"delta", f.pcen.delta},
          {"root", f.pcen.root},
          {"floor", f.pcen.floor}}}}},
      {"student", spec_to_json(c.student)},
      {"teacher", spec_to_json(c.teacher)},
      {"adaptive",
       {{"lambda", c.adaptive.lambda},
        {"T", c.adaptive.T},
        {"lr", c.adaptive.lr},
        {"max_steps", c.adaptive.max_steps},
        {"loss_scope", c.adaptive.loss_scope == adapt::LossScope::Full
                           ? "full"
                           : "disagreement"}}},
      {"eval",
       {{"prob_threshold", c.eval.prob_threshold},
        {"iou_threshold", c.eval.iou_threshold},
        {"min_duration_s", c.eval.min_duration_s}}},
      {"negative_source", c.negative_source == NegativeSource::RandomQuery
                              ? "random_query"
                              : "support_background"},
      {"use_nss", c.use_nss},
      {"use_al", c.use_al},
      {"teacher_nss", c.teacher_nss},
      {"finetune", {{"steps", c.finetune.steps}, {"lr", c.finetune.lr}}},
      {"pretrain",
       {{"epochs", c.pretrain.epochs},
        {"lr", c.pretrain.lr},
        {"batch_size", c.pretrain.batch_size},
        {"seg_len", c.pretrain.seg_len}}},
      {"B", c.budget},
      {"n_shots", c.n_shots},
      {"random_negatives_per_positive", c.random_negatives_per_positive},
      {"seed", c.seed}};
}

PipelineConfig config_from_json(const json& j) {
  PipelineConfig c;
  try {
    read(j, "name", c.name);
    if (j.contains("frontend")) {
      const json& f = j.at("frontend");
      read(f, "target_rate", c.frontend.target_rate);
      read(f, "frame_length_ms", c.frontend.frame_length_ms);
      read(f, "frame_shift_ms", c.frontend.frame_shift_ms);
      read(f, "n_mels", c.frontend.n_mels);
      read(f, "fft_size", c.frontend.fft_size);
      read(f, "fmin", c.frontend.fmin);
      read(f, "fmax", c.frontend.fmax);
      if (f.contains("pcen")) {
        const json& p = f.at("pcen");
        read(p, "smoothing", c.frontend.pcen.smoothing);
        read(p, "alpha", c.frontend.pcen.alpha);
        read(p, "delta", c.frontend.pcen.delta);
        read(p, "root", c.frontend.pcen.root);
        read(p, "floor", c.frontend.pcen.floor);
      }
    }
    if (j.contains("student")) c.student = spec_from_json(j.at("student"));
    if (j.contains("teacher")) c.teacher = spec_from_json(j.at("teacher"));
    if (j.contains("adaptive")) {
      const json& a = j.at("adaptive");
      read(a, "lambda", c.adaptive.lambda);
      read(a, "T", c.adaptive.T);
      read(a, "lr", c.adaptive.lr);
      read(a, "max_steps", c.adaptive.max_steps);
      if (a.contains("loss_scope")) {
        const auto s = a.at("loss_scope").get<std::string>();
        if (s == "full") {
          c.adaptive.loss_scope = adapt::LossScope::Full;
        } else if (s == "disagreement") {
          c.adaptive.loss_scope = adapt::LossScope::Disagreement;
        } else {
          throw Error(Errc::InvalidConfig, "loss_scope must be full|disagreement");
        }
      }
    }
    if (j.contains("eval")) {
      const json& e = j.at("eval");
      read(e, "prob_threshold", c.eval.prob_threshold);
      read(e, "iou_threshold", c.eval.iou_threshold);
      read(e, "min_duration_s", c.eval.min_duration_s);
    }
    if (j.contains("negative_source")) {
      const auto s = j.at("negative_source").get<std::string>();
      if (s == "random_query") {
        c.negative_source = NegativeSource::RandomQuery;
      } else if (s == "support_background") {
        c.negative_source = NegativeSource::SupportBackground;
      } else {
        throw Error(Errc::InvalidConfig,
                    "negative_source must be random_query|support_background");
      }
    }
    read(j, "use_nss", c.use_nss);
    read(j, "use_al", c.use_al);
    read(j, "teacher_nss", c.teacher_nss);
    if (j.contains("finetune")) {
      read(j.at("finetune"), "steps", c.finetune.steps);
      read(j.at("finetune"), "lr", c.finetune.lr);
    }
    if (j.contains("pretrain")) {
      const json& p = j.at("pretrain");
      read(p, "epochs", c.pretrain.epochs);
      read(p, "lr", c.pretrain.lr);
      read(p, "batch_size", c.pretrain.batch_size);
      read(p, "seg_len", c.pretrain.seg_len);
    }
    read(j, "B", c.budget);
    read(j, "n_shots", c.n_shots);
    read(j, "random_negatives_per_positive", c.random_negatives_per_positive);
    read(j, "seed", c.seed);
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidConfig, e.what());
  }
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  try {
    return config_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidConfig, path.string() + ": " + e.what());
  }
}

}  // namespace fsbed::pipeline
