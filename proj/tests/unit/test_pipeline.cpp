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

#include <filesystem>
#include <sstream>

#include "fsbed/pipeline.hpp"
#include "fsbed/synth.hpp"

namespace {

using fsbed::Errc;
using fsbed::pipeline::EpisodeInput;
using fsbed::pipeline::PipelineConfig;
using fsbed::proto::Provenance;

EpisodeInput easy_input(std::uint64_t seed, double len_s = 40.0) {
  auto p = fsbed::synth::preset_profile("easy");
  p.recording_len_s = len_s;
  const auto t = fsbed::synth::generate_task(p, seed);
  EpisodeInput in;
  in.recording_id = "easy_" + std::to_string(seed);
  in.subset = "easy";
  in.wave = t.waveform;
  in.events = t.annotations;
  return in;
}

std::vector<Provenance> chain_of(const fsbed::pipeline::EpisodeReport& r) {
  std::vector<Provenance> out;
  for (const auto& w : r.chain) out.push_back(w.provenance);
  return out;
}

std::string predictions_csv(const fsbed::pipeline::EpisodeReport& r) {
  std::ostringstream out;
  fsbed::eval::write_predictions(out, r.predictions);
  return out.str();
}

}  // namespace

TEST(Pipeline, ChainFollowsFlags) {
  const auto in = easy_input(3);
  using V = std::vector<Provenance>;
  const struct {
    const char* name;
    V chain;
  } cases[] = {
      {"None", V{Provenance::W0, Provenance::W1}},
      {"NS", V{Provenance::W0, Provenance::W1}},
      {"NSS", V{Provenance::W0, Provenance::W1, Provenance::W2}},
      {"AL", V{Provenance::W0, Provenance::W1, Provenance::Adapted}},
      {"NSS+AL", V{Provenance::W0, Provenance::W1, Provenance::W2, Provenance::Adapted}},
  };
  for (const auto& c : cases) {
    const auto r = fsbed::pipeline::run_episode(in, fsbed::pipeline::ablation_preset(c.name));
    EXPECT_EQ(chain_of(r), c.chain) << c.name;
    EXPECT_EQ(r.selection.has_value(), std::string(c.name).find("NSS") == 0) << c.name;
  }
}

TEST(Pipeline, WithoutSelectionFinalWeightsAreW1) {
  const auto in = easy_input(4);
  const auto ns = fsbed::pipeline::run_episode(in, fsbed::pipeline::ablation_preset("NS"));
  const auto nss = fsbed::pipeline::run_episode(in, fsbed::pipeline::ablation_preset("NSS"));
  EXPECT_TRUE(ns.chain.back().W == nss.chain[1].W);
  EXPECT_TRUE(ns.chain.back().W == ns.chain[1].W);
}

TEST(Pipeline, NoStepLogWithoutAdaptiveLearning) {
  const auto in = easy_input(5);
  for (const char* name : {"None", "NS", "NSS"}) {
    const auto r = fsbed::pipeline::run_episode(in, fsbed::pipeline::ablation_preset(name));
    EXPECT_TRUE(r.step_log.empty()) << name;
    EXPECT_EQ(fsbed::pipeline::episode_to_json(r, false)["step_log"].size(), 0u);
  }
}

TEST(Pipeline, RandomQueryNegativesCount) {
  const auto in = easy_input(6);
  const auto r = fsbed::pipeline::run_episode(in, fsbed::pipeline::ablation_preset("None"));
  EXPECT_EQ(r.negatives, std::min(r.query_segments, 5 * r.positives));
}

TEST(Pipeline, EasyTaskScoresPerfectly) {
  auto p = fsbed::synth::preset_profile("easy");
  p.min_duration_s = 0.3;
  p.max_duration_s = 0.4;
  p.min_gap_s = 1.0;
  p.recording_len_s = 60.0;
  const auto t = fsbed::synth::generate_task(p, 11);
  EpisodeInput in{"constructed", "easy", t.waveform, t.annotations, 5};
  const auto r = fsbed::pipeline::run_episode(in, PipelineConfig{});
  EXPECT_GT(r.references.size(), 5u);
  EXPECT_DOUBLE_EQ(r.scores.f_measure, 1.0)
      << "tp " << r.match.counts.tp << " fp " << r.match.counts.fp << " fn "
      << r.match.counts.fn;
}

TEST(Pipeline, DeterministicReport) {
  const auto in = easy_input(7);
  for (const char* name : {"None", "NSS+AL"}) {
    const auto cfg = fsbed::pipeline::ablation_preset(name);
    const auto a = fsbed::pipeline::run_episode(in, cfg);
    const auto b = fsbed::pipeline::run_episode(in, cfg);
    EXPECT_EQ(fsbed::pipeline::episode_to_json(a, false).dump(),
              fsbed::pipeline::episode_to_json(b, false).dump());
    EXPECT_EQ(predictions_csv(a), predictions_csv(b));
  }
}

TEST(Pipeline, NoPredictionsInSupportRegion) {
  for (std::uint64_t seed = 20; seed < 24; ++seed) {
    const auto in = easy_input(seed);
    const auto r = fsbed::pipeline::run_episode(in, PipelineConfig{});
    for (const auto& p : r.predictions) EXPECT_GE(p.onset_s, r.query_start_s);
  }
}

TEST(Pipeline, ReportJsonShape) {
  const auto r = fsbed::pipeline::run_episode(easy_input(8), PipelineConfig{});
  const auto j = fsbed::pipeline::episode_to_json(r, false);
  EXPECT_FALSE(j.contains("elapsed_s"));
  EXPECT_TRUE(fsbed::pipeline::episode_to_json(r, true).contains("elapsed_s"));
  for (const char* key : {"recording", "plan", "chain", "predictions", "counts",
                          "scores", "selection", "step_log"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  const auto w = fsbed::pipeline::classifier_to_json(r.chain.front());
  EXPECT_EQ(w["provenance"], "W0");
  EXPECT_EQ(w["d"], r.chain.front().dim());
  EXPECT_EQ(w["w1"].size(), static_cast<std::size_t>(r.chain.front().dim()));
  const std::string steps = fsbed::pipeline::step_log_jsonl(r.step_log);
  EXPECT_EQ(static_cast<std::size_t>(std::count(steps.begin(), steps.end(), '\n')),
            r.step_log.size());
  const std::string trace = fsbed::pipeline::probability_trace_csv(r);
  EXPECT_EQ(trace.rfind("time_s,p_positive\n", 0), 0u);
}

TEST(Pipeline, StageTaggedErrors) {
  EpisodeInput in = easy_input(9);
  in.events.clear();
  try {
    fsbed::pipeline::run_episode(in, PipelineConfig{});
    FAIL();
  } catch (const fsbed::pipeline::StageError& e) {
    EXPECT_EQ(e.stage(), "episode");
    EXPECT_EQ(e.code(), Errc::NoPositives);
  }
}

TEST(Pipeline, ResamplesForeignRates) {
  EpisodeInput in = easy_input(10, 30.0);
  in.wave = fsbed::audio::resample(in.wave, 22050);
  const auto r = fsbed::pipeline::run_episode(in, PipelineConfig{});
  EXPECT_FALSE(r.chain.empty());
}

TEST(Benchmark, SingleEpisodeAggregateEqualsEpisode) {
  const auto in = easy_input(12);
  const auto cfg = fsbed::pipeline::ablation_preset("NSS");
  const auto single = fsbed::pipeline::run_episode(in, cfg);
  const auto bench = fsbed::pipeline::run_benchmark(std::vector<EpisodeInput>{in}, cfg);
  ASSERT_EQ(bench.episodes.size(), 1u);
  EXPECT_EQ(bench.overall.counts.tp, single.match.counts.tp);
  EXPECT_EQ(bench.overall.counts.fp, single.match.counts.fp);
  EXPECT_EQ(bench.overall.counts.fn, single.match.counts.fn);
  EXPECT_DOUBLE_EQ(bench.overall.scores.f_measure, single.scores.f_measure);
}

TEST(Benchmark, TwoConfigsSameInputs) {
  std::vector<EpisodeInput> eps;
  auto p = fsbed::synth::preset_profile("dense");
  for (std::uint64_t s = 0; s < 2; ++s) {
    const auto t = fsbed::synth::generate_task(p, s);
    eps.push_back({"dense_" + std::to_string(s), "dense", t.waveform, t.annotations, 5});
  }
  const auto ns = fsbed::pipeline::run_benchmark(eps, fsbed::pipeline::ablation_preset("NS"), 2);
  const auto nss = fsbed::pipeline::run_benchmark(eps, fsbed::pipeline::ablation_preset("NSS"), 2);
  ASSERT_EQ(ns.episodes.size(), 2u);
  ASSERT_EQ(nss.episodes.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(ns.episodes[i].recording_id, nss.episodes[i].recording_id);
    EXPECT_EQ(ns.episodes[i].references, nss.episodes[i].references);
  }
  const std::string table = fsbed::pipeline::comparison_table({ns, nss});
  EXPECT_NE(table.find("NS "), std::string::npos);
  EXPECT_NE(table.find("NSS"), std::string::npos);
  EXPECT_NE(table.find("ALL"), std::string::npos);
}

TEST(Benchmark, ParallelMatchesSerial) {
  std::vector<EpisodeInput> eps;
  for (std::uint64_t s = 30; s < 34; ++s) eps.push_back(easy_input(s, 30.0));
  const auto cfg = PipelineConfig{};
  const auto a = fsbed::pipeline::run_benchmark(eps, cfg, 1);
  const auto b = fsbed::pipeline::run_benchmark(eps, cfg, 4);
  EXPECT_EQ(fsbed::pipeline::benchmark_to_json(a, false).dump(),
            fsbed::pipeline::benchmark_to_json(b, false).dump());
}

TEST(Benchmark, EmptyCorpus) {
  try {
    fsbed::pipeline::run_benchmark(std::vector<EpisodeInput>{}, PipelineConfig{});
    FAIL();
  } catch (const fsbed::Error& e) {
    EXPECT_EQ(e.code(), Errc::EmptyCorpus);
  }
}

TEST(Benchmark, FailuresRecordedAndRunContinues) {
  std::vector<EpisodeInput> eps = {easy_input(40, 30.0), easy_input(41, 30.0)};
  eps[0].events.clear();
  const auto r = fsbed::pipeline::run_benchmark(eps, PipelineConfig{});
  ASSERT_EQ(r.failures.size(), 1u);
  EXPECT_EQ(r.failures[0].first, eps[0].recording_id);
  EXPECT_NE(r.failures[0].second.find("[episode]"), std::string::npos);
  EXPECT_EQ(r.episodes.size(), 1u);
}

TEST(Benchmark, ManifestWithPretraining) {
  const auto dir = std::filesystem::temp_directory_path() / "fsbed_bench_manifest";
  std::filesystem::remove_all(dir);
  auto p = fsbed::synth::preset_profile("easy");
  p.recording_len_s = 30.0;
  const auto m = fsbed::synth::generate_corpus({p}, 1, 2, 5, dir);
  auto cfg = fsbed::pipeline::ablation_preset("NSS");
  cfg.pretrain.epochs = 2;
  const auto r = fsbed::pipeline::run_benchmark(m, cfg, 2);
  EXPECT_EQ(r.episodes.size(), 2u);
  EXPECT_EQ(r.pretrain_loss.size(), 2u);
  EXPECT_TRUE(r.failures.empty());
  EXPECT_EQ(r.per_subset.count("easy"), 1u);
  std::filesystem::remove_all(dir);
}

TEST(Config, JsonRoundTrip) {
  auto cfg = fsbed::pipeline::ablation_preset("None");
  cfg.adaptive.lambda = 2.0;
  cfg.adaptive.loss_scope = fsbed::adapt::LossScope::Disagreement;
  cfg.eval.iou_threshold = 0.4;
  cfg.frontend.pcen.alpha = 0.9;
  cfg.budget = 7;
  cfg.seed = 99;
  cfg.teacher_nss = true;
  const auto j = fsbed::pipeline::config_to_json(cfg);
  const auto back = fsbed::pipeline::config_from_json(j);
  EXPECT_EQ(fsbed::pipeline::config_to_json(back).dump(), j.dump());
  EXPECT_EQ(back.negative_source, fsbed::pipeline::NegativeSource::RandomQuery);
  EXPECT_EQ(back.budget, 7);
}

TEST(Config, MissingKeysKeepDefaults) {
  const auto cfg = fsbed::pipeline::config_from_json(nlohmann::json::object());
  const PipelineConfig def;
  EXPECT_EQ(fsbed::pipeline::config_to_json(cfg).dump(),
            fsbed::pipeline::config_to_json(def).dump());
  EXPECT_EQ(def.budget, 5);
  EXPECT_EQ(def.adaptive.lambda, 0.5);
  EXPECT_EQ(def.adaptive.T, 150.0);
  EXPECT_EQ(def.eval.prob_threshold, 0.5);
  EXPECT_EQ(def.eval.iou_threshold, 0.3);
  EXPECT_EQ(def.pretrain.lr, 1e-4);
  EXPECT_EQ(def.finetune.lr, 1e-5);
}

TEST(Config, AdaptiveLearningNeedsDistinctSpecs) {
  PipelineConfig cfg;
  cfg.teacher = cfg.student;
  try {
    cfg.validate();
    FAIL();
  } catch (const fsbed::Error& e) {
    EXPECT_EQ(e.code(), Errc::InvalidConfig);
  }
  cfg.use_al = false;
  cfg.validate();
}

TEST(Config, UnknownPreset) {
  EXPECT_THROW(fsbed::pipeline::ablation_preset("XYZ"), fsbed::Error);
}
