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

#include "fsbed/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

namespace fsbed::pipeline {
namespace {

using task::SegmentLabel;

template <class F>
auto in_stage(const char* stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(stage, e.code(), e.message());
  }
}

std::uint64_t hash_id(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string expand_path(std::string path, const std::string& recording,
                        const std::string& part) {
  auto replace = [&](const std::string& key, const std::string& value) {
    for (auto pos = path.find(key); pos != std::string::npos;
         pos = path.find(key, pos + value.size())) {
      path.replace(pos, key.size(), value);
    }
  };
  replace("{recording}", recording);
  replace("{part}", part);
  return path;
}

// Embeddings of one grid under one spec, before normalization. Pooled
// statistics are computed once and reused across spec updates.
class GridEmbedder {
 public:
  GridEmbedder(const audio::PcenGram& gram, const task::SegmentGrid& grid,
               std::string recording, std::string part)
      : gram_(gram), grid_(grid), recording_(std::move(recording)),
        part_(std::move(part)) {}

  const Matrix& features(const embed::PoolingConfig& pooling) {
    if (!cached_ || cached_pooling_.sub_windows != pooling.sub_windows ||
        cached_pooling_.context != pooling.context) {
      features_ = embed::pooled_features(gram_, grid_, pooling);
      cached_pooling_ = pooling;
      cached_ = true;
    }
    return features_;
  }

  embed::EmbeddingMatrix normalized(const embed::EmbedderSpec& spec) {
    embed::EmbeddingMatrix m;
    if (spec.kind == embed::EmbedderKind::External) {
      embed::EmbedderSpec s = spec;
      s.external_path = expand_path(spec.external_path, recording_, part_);
      m = embed::embed(s, gram_, grid_);
    } else {
      m.rows = embed::project(spec, features(spec.pooling));
    }
    return embed::l2_normalize(std::move(m));
  }

 private:
  const audio::PcenGram& gram_;
  const task::SegmentGrid& grid_;
  std::string recording_;
  std::string part_;
  Matrix features_;
  embed::PoolingConfig cached_pooling_;
  bool cached_ = false;
};

embed::EmbeddingMatrix rows_of(const embed::EmbeddingMatrix& m,
                               const std::vector<std::size_t>& idx) {
  return {proto::gather_rows(m.rows, idx), m.normalized, 0};
}

// Negative class members for prototype construction; from the support
// background or from random query segments.
struct NegativeSet {
  bool from_query = false;
  std::vector<std::size_t> indices;
};

embed::EmbeddingMatrix negatives_of(const NegativeSet& neg,
                                    const embed::EmbeddingMatrix& support,
                                    const embed::EmbeddingMatrix& query) {
  return rows_of(neg.from_query ? query : support, neg.indices);
}

audio::PcenGram frontend(const audio::Waveform& wave,
                         const audio::FrontendConfig& cfg) {
  if (wave.sample_rate == cfg.target_rate) return audio::mel_pcen(wave, cfg);
  return audio::mel_pcen(audio::resample(wave, cfg.target_rate), cfg);
}

}  // namespace

EpisodeInput load_episode_input(const task::Manifest& manifest,
                                const task::ManifestEntry& entry) {
  EpisodeInput in;
  in.recording_id = entry.recording;
  in.subset = entry.subset;
  in.n_shots = entry.n_shots;
  in.wave = audio::load_wav(manifest.resolve(entry.wav_path));
  in.events = task::load_annotations(manifest.resolve(entry.csv_path));
  return in;
}

EpisodeReport run_episode(const EpisodeInput& input, const PipelineConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  in_stage("config", [&] { cfg.validate(); return 0; });

  EpisodeReport rep;
  rep.recording_id = input.recording_id;
  rep.subset = input.subset;
  const double shift_ms = cfg.frontend.frame_shift_ms;

  const audio::PcenGram gram =
      in_stage("frontend", [&] { return frontend(input.wave, cfg.frontend); });
  const task::Episode episode = in_stage("episode", [&] {
    return task::build_episode(input.events, input.wave.duration_seconds(),
                               std::min(input.n_shots, cfg.n_shots),
                               input.recording_id);
  });
  rep.query_start_s = episode.query_start_s;
  rep.query_end_s = episode.query_end_s;
  rep.plan = in_stage("plan", [&] {
    return task::plan_segments(episode.support_events, shift_ms);
  });

  // The query grid starts on the first frame at or after the last support
  // offset, so no segment reaches back into the support region.
  const int query_frame = static_cast<int>(
      std::ceil(episode.query_start_s * 1000.0 / shift_ms - 1e-9));
  const int n_frames = gram.n_frames();
  if (query_frame >= n_frames || query_frame < 1) {
    throw StageError("grid", Errc::EmptyQuery,
                     "no frames on one side of the support/query split");
  }
  const task::SegmentGrid support_grid = in_stage("grid", [&] {
    return task::make_grid(query_frame, rep.plan, shift_ms, 0);
  });
  const task::SegmentGrid query_grid = in_stage("grid", [&] {
    return task::make_grid(n_frames - query_frame, rep.plan, shift_ms,
                           query_frame);
  });
  rep.support_segments = support_grid.size();
  rep.query_segments = query_grid.size();

  std::vector<std::size_t> pos_idx, neg_idx;
  for (const auto& ls : task::label_support_segments(
           support_grid, episode.support_events, episode.support_unknown)) {
    if (ls.label == SegmentLabel::Positive) pos_idx.push_back(ls.index);
    if (ls.label == SegmentLabel::Negative) neg_idx.push_back(ls.index);
    if (ls.label == SegmentLabel::Ambiguous) ++rep.ambiguous;
  }
  rep.positives = pos_idx.size();

  NegativeSet negatives;
  if (cfg.negative_source == NegativeSource::RandomQuery) {
    negatives.from_query = true;
    std::vector<std::size_t> all(query_grid.size());
    std::iota(all.begin(), all.end(), 0);
    std::mt19937_64 rng(cfg.seed ^ hash_id(input.recording_id));
    std::shuffle(all.begin(), all.end(), rng);
    const std::size_t k = std::min(
        all.size(),
        pos_idx.size() * static_cast<std::size_t>(cfg.random_negatives_per_positive));
    negatives.indices.assign(all.begin(), all.begin() + static_cast<long>(k));
    std::sort(negatives.indices.begin(), negatives.indices.end());
  } else {
    negatives.indices = neg_idx;
  }
  rep.negatives = negatives.indices.size();

  GridEmbedder student_support(gram, support_grid, input.recording_id, "support");
  GridEmbedder student_query(gram, query_grid, input.recording_id, "query");
  embed::EmbedderSpec student = cfg.student;

  auto student_embs = [&] {
    return std::pair{student_support.normalized(student),
                     student_query.normalized(student)};
  };

  auto [s_sup, s_qry] = in_stage("embed", student_embs);
  const proto::ClassifierWeights w0 = in_stage("W0", [&] {
    return proto::build_prototypes(rows_of(s_sup, pos_idx),
                                   negatives_of(negatives, s_sup, s_qry),
                                   proto::Provenance::W0);
  });
  rep.chain.push_back(w0);

  // Support fine-tuning always uses the support set itself.
  in_stage("finetune", [&] {
    embed::LabeledFeatures support;
    if (student.kind != embed::EmbedderKind::External) {
      const Matrix& feats = student_support.features(student.pooling);
      std::vector<std::size_t> idx = pos_idx;
      idx.insert(idx.end(), neg_idx.begin(), neg_idx.end());
      support.features = proto::gather_rows(feats, idx);
      support.labels.assign(pos_idx.size(), 1);
      support.labels.resize(idx.size(), 0);
    }
    auto ft = embed::finetune_on_support(student, support, cfg.finetune.lr,
                                         cfg.finetune.steps,
                                         cfg.seed ^ hash_id(input.recording_id));
    if (!ft.notice.empty()) rep.notices.push_back(ft.notice);
    student = std::move(ft.spec);
    return 0;
  });

  std::tie(s_sup, s_qry) = in_stage("embed", student_embs);
  const embed::EmbeddingMatrix pos_embs = rows_of(s_sup, pos_idx);
  const embed::EmbeddingMatrix neg_embs = negatives_of(negatives, s_sup, s_qry);
  proto::ClassifierWeights w = in_stage("W1", [&] {
    return proto::build_prototypes(pos_embs, neg_embs, proto::Provenance::W1);
  });
  rep.chain.push_back(w);

  if (cfg.use_nss) {
    w = in_stage("selection", [&] {
      rep.selection = proto::select_negatives(
          w, s_qry.rows, pos_idx.size(), negatives.indices.size(),
          static_cast<std::size_t>(cfg.budget));
      return proto::rebuild_classifier(
          pos_embs, neg_embs, rows_of(s_qry, rep.selection->selected_indices));
    });
    rep.chain.push_back(w);
  }

  if (cfg.use_al) {
    w = in_stage("adaptive", [&] {
      GridEmbedder teacher_support(gram, support_grid, input.recording_id,
                                   "support");
      GridEmbedder teacher_query(gram, query_grid, input.recording_id, "query");
      const auto t_sup = teacher_support.normalized(cfg.teacher);
      const auto t_qry = teacher_query.normalized(cfg.teacher);
      const auto t_pos = rows_of(t_sup, pos_idx);
      const auto t_neg = negatives_of(negatives, t_sup, t_qry);
      proto::ClassifierWeights w_te = proto::build_prototypes(t_pos, t_neg);
      if (cfg.teacher_nss) {
        const auto sel = proto::select_negatives(
            w_te, t_qry.rows, pos_idx.size(), negatives.indices.size(),
            static_cast<std::size_t>(cfg.budget));
        w_te = proto::rebuild_classifier(t_pos, t_neg,
                                         rows_of(t_qry, sel.selected_indices));
      }
      const proto::ProbMatrix p_te = proto::predict_probs(w_te, t_qry.rows);
      adapt::AdaptResult ar = adapt::adapt_student(w, s_qry.rows, p_te,
                                                   rep.plan.seg_len, cfg.adaptive);
      rep.step_log = std::move(ar.log);
      return ar.weights;
    });
    rep.chain.push_back(w);
  }

  const proto::ProbMatrix probs = proto::predict_probs(w, s_qry.rows);
  const double shift_s = shift_ms / 1000.0;
  const double query_offset_s = query_frame * shift_s;
  for (std::size_t i = 0; i < query_grid.size(); ++i) {
    const auto& seg = query_grid.segments[i];
    rep.query_probs.push_back(probs.p(static_cast<Eigen::Index>(i), 0));
    rep.segment_times.push_back(query_offset_s +
                                0.5 * (seg.start + seg.end) * shift_s);
  }
  rep.predictions = in_stage("postprocess", [&] {
    return eval::threshold_and_merge(probs, query_grid, query_offset_s, cfg.eval);
  });
  std::erase_if(rep.predictions, [&](const eval::EventInterval& e) {
    return e.onset_s < episode.query_start_s;
  });
  rep.references = eval::to_intervals(episode.reference_events);
  rep.match = eval::match_events(rep.predictions, rep.references, cfg.eval);
  rep.scores = eval::f_measure(rep.match.counts);
  rep.elapsed_s = std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
  return rep;
}

embed::LabeledFeatures training_features(
    const std::vector<EpisodeInput>& recordings, const PipelineConfig& cfg) {
  embed::LabeledFeatures out;
  std::vector<Eigen::RowVectorXd> rows;
  const task::SegmentPlan plan{cfg.pretrain.seg_len, cfg.pretrain.seg_len,
                               std::max(1, cfg.pretrain.seg_len / 4)};
  for (const auto& rec : recordings) {
    const audio::PcenGram gram = frontend(rec.wave, cfg.frontend);
    const task::SegmentGrid grid =
        task::make_grid(gram.n_frames(), plan, cfg.frontend.frame_shift_ms);
    std::vector<task::AnnotationEvent> pos, unk;
    for (const auto& ev : rec.events) {
      (ev.label == task::EventLabel::Pos ? pos : unk).push_back(ev);
    }
    const Matrix feats =
        embed::pooled_features(gram, grid, cfg.student.pooling);
    for (const auto& ls : task::label_support_segments(grid, pos, unk)) {
      if (ls.label == SegmentLabel::Ambiguous) continue;
      rows.push_back(feats.row(static_cast<Eigen::Index>(ls.index)));
      out.labels.push_back(ls.label == SegmentLabel::Positive ? 1 : 0);
    }
  }
  if (!rows.empty()) {
    out.features.resize(static_cast<Eigen::Index>(rows.size()), rows[0].size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      out.features.row(static_cast<Eigen::Index>(i)) = rows[i];
    }
  }
  return out;
}

BenchmarkReport run_benchmark(const std::vector<EpisodeInput>& episodes,
                              const PipelineConfig& cfg, int jobs) {
  if (episodes.empty()) throw Error(Errc::EmptyCorpus, "no test episodes");
  BenchmarkReport report;
  report.config_name = cfg.name;

  std::vector<std::optional<EpisodeReport>> results(episodes.size());
  std::vector<std::string> errors(episodes.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < episodes.size(); i = next++) {
      try {
        results[i] = run_episode(episodes[i], cfg);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const int n_workers =
      std::clamp(jobs, 1, static_cast<int>(episodes.size()));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < n_workers; ++t) pool.emplace_back(worker);
  }

  std::map<std::string, eval::Counts> per_task;
  std::map<std::string, std::map<std::string, eval::Counts>> per_subset;
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    if (!results[i]) {
      report.failures.emplace_back(episodes[i].recording_id, errors[i]);
      continue;
    }
    const EpisodeReport& r = *results[i];
    per_task[r.recording_id] += r.match.counts;
    per_subset[r.subset][r.recording_id] += r.match.counts;
    report.episodes.push_back(std::move(*results[i]));
  }
  report.overall = eval::aggregate(per_task);
  for (const auto& [subset, tasks] : per_subset) {
    report.per_subset[subset] = eval::aggregate(tasks);
  }
  return report;
}

BenchmarkReport run_benchmark(const task::Manifest& manifest,
                              const PipelineConfig& cfg, int jobs) {
  const auto tests = manifest.split("test");
  if (tests.empty()) throw Error(Errc::EmptyCorpus, "manifest has no test split");

  PipelineConfig run_cfg = cfg;
  std::vector<double> pretrain_loss;
  const auto train = manifest.split("train");
  if (cfg.pretrain.epochs > 0 && !train.empty() &&
      cfg.student.kind == embed::EmbedderKind::Trainable) {
    std::vector<EpisodeInput> recs;
    for (const auto& e : train) recs.push_back(load_episode_input(manifest, e));
    const auto corpus = training_features(recs, cfg);
    auto trained = embed::pretrain_embedder(
        cfg.student, corpus,
        {cfg.pretrain.epochs, cfg.pretrain.lr, cfg.pretrain.batch_size, cfg.seed});
    run_cfg.student = std::move(trained.spec);
    pretrain_loss = std::move(trained.epoch_loss);
  }

  std::vector<EpisodeInput> inputs;
  std::vector<std::pair<std::string, std::string>> load_failures;
  for (const auto& e : tests) {
    try {
      inputs.push_back(load_episode_input(manifest, e));
    } catch (const std::exception& ex) {
      load_failures.emplace_back(e.recording, std::string("[load] ") + ex.what());
    }
  }
  BenchmarkReport report;
  if (inputs.empty()) {
    report.config_name = cfg.name;
    report.overall = eval::aggregate({});
  } else {
    report = run_benchmark(inputs, run_cfg, jobs);
  }
  report.failures.insert(report.failures.end(), load_failures.begin(),
                         load_failures.end());
  report.pretrain_loss = std::move(pretrain_loss);
  return report;
}

}  // namespace fsbed::pipeline
