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
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fsbed/adaptive.hpp"
#include "fsbed/audio.hpp"
#include "fsbed/embed.hpp"
#include "fsbed/evaluate.hpp"
#include "fsbed/frontend.hpp"
#include "fsbed/manifest.hpp"
#include "fsbed/proto.hpp"
#include "fsbed/task.hpp"

namespace fsbed::pipeline {

enum class NegativeSource { SupportBackground, RandomQuery };

struct FinetuneConfig {
  int steps = 50;
  double lr = 1e-5;
};

// Optional cross-entropy pretraining of a trainable student on the "train"
// split of a benchmark manifest.
struct PretrainConfig {
  int epochs = 0;
  double lr = 1e-4;
  int batch_size = 32;
  int seg_len = 20;
};

struct PipelineConfig {
  std::string name = "NSS+AL";
  audio::FrontendConfig frontend;
  embed::EmbedderSpec student = embed::default_student();
  embed::EmbedderSpec teacher = embed::default_teacher();
  adapt::AdaptiveConfig adaptive;
  eval::EvalConfig eval;
  NegativeSource negative_source = NegativeSource::SupportBackground;
  bool use_nss = true;
  bool use_al = true;
  bool teacher_nss = false;
  FinetuneConfig finetune;
  PretrainConfig pretrain;
  int budget = 5;                          // B
  int n_shots = 5;
  int random_negatives_per_positive = 5;   // random_query mode
  std::uint64_t seed = 0;

  void validate() const;
};

// "None", "NS", "NSS", "AL", "NSS+AL" ablation rows.
PipelineConfig ablation_preset(const std::string& name);

nlohmann::json config_to_json(const PipelineConfig& cfg);
// Missing keys keep their defaults.
PipelineConfig config_from_json(const nlohmann::json& j);
PipelineConfig load_config(const std::filesystem::path& path);
nlohmann::json spec_to_json(const embed::EmbedderSpec& spec);
embed::EmbedderSpec spec_from_json(const nlohmann::json& j);

// Pipeline failures carry the stage in which they happened.
class StageError : public Error {
 public:
  StageError(std::string stage, Errc code, const std::string& message)
      : Error(code, "[" + stage + "] " + message), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct EpisodeInput {
  std::string recording_id;
  std::string subset;
  audio::Waveform wave;
  std::vector<task::AnnotationEvent> events;
  int n_shots = 5;
};

EpisodeInput load_episode_input(const task::Manifest& manifest,
                                const task::ManifestEntry& entry);

struct EpisodeReport {
  std::string recording_id;
  std::string subset;
  task::SegmentPlan plan;
  double query_start_s = 0.0;
  double query_end_s = 0.0;
  std::size_t support_segments = 0;
  std::size_t query_segments = 0;
  std::size_t positives = 0;
  std::size_t negatives = 0;
  std::size_t ambiguous = 0;
  std::vector<proto::ClassifierWeights> chain;  // W0 -> W1 -> W2 -> adapted
  std::optional<proto::SelectionResult> selection;
  std::vector<adapt::StepRecord> step_log;
  std::vector<std::string> notices;
  std::vector<double> query_probs;   // positive probability per segment
  std::vector<double> segment_times; // query segment centers, seconds
  std::vector<eval::EventInterval> predictions;
  std::vector<eval::EventInterval> references;
  eval::MatchResult match;
  eval::Scores scores;
  double elapsed_s = 0.0;
};

EpisodeReport run_episode(const EpisodeInput& input, const PipelineConfig& cfg);

struct BenchmarkReport {
  std::string config_name;
  std::vector<EpisodeReport> episodes;
  std::vector<std::pair<std::string, std::string>> failures;  // id, message
  eval::EvalReport overall;
  std::map<std::string, eval::EvalReport> per_subset;
  std::vector<double> pretrain_loss;
};

// Runs every "test" recording; failures are recorded and the run goes on.
BenchmarkReport run_benchmark(const task::Manifest& manifest,
                              const PipelineConfig& cfg, int jobs = 1);

// Same, over episodes already in memory.
BenchmarkReport run_benchmark(const std::vector<EpisodeInput>& episodes,
                              const PipelineConfig& cfg, int jobs = 1);

// Builds the cross-entropy corpus for pretraining from fully annotated
// recordings (label 1 = event, 0 = background).
embed::LabeledFeatures training_features(
    const std::vector<EpisodeInput>& recordings, const PipelineConfig& cfg);

nlohmann::json episode_to_json(const EpisodeReport& r, bool with_timing);
nlohmann::json benchmark_to_json(const BenchmarkReport& r, bool with_timing);
nlohmann::json classifier_to_json(const proto::ClassifierWeights& w);

// One row per config, one F column per subset plus ALL.
std::string comparison_table(const std::vector<BenchmarkReport>& reports);

// Step log as JSON lines.
std::string step_log_jsonl(const std::vector<adapt::StepRecord>& log);

// time_s,p_positive per query segment.
std::string probability_trace_csv(const EpisodeReport& r);

}  // namespace fsbed::pipeline
