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

#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "fsbed/proto.hpp"
#include "fsbed/task.hpp"

namespace fsbed::eval {

struct EventInterval {
  double onset_s = 0.0;
  double offset_s = 0.0;
  double score = 1.0;

  bool operator==(const EventInterval&) const = default;
};

struct EvalConfig {
  double prob_threshold = 0.5;
  double iou_threshold = 0.3;
  double min_duration_s = 0.0;  // 0 disables the filter

  void validate() const;
};

// Segments with positive probability >= threshold become intervals shifted
// by query_offset_s; intervals that overlap or touch are merged. The event
// score is the mean probability of its member segments.
std::vector<EventInterval> threshold_and_merge(const proto::ProbMatrix& probs,
                                               const task::SegmentGrid& grid,
                                               double query_offset_s,
                                               const EvalConfig& cfg);

// Merges overlapping or touching intervals of an onset-sorted list.
// Scores are combined weighted by member count.
std::vector<EventInterval> merge_intervals(std::span<const EventInterval> sorted);

double iou(const EventInterval& a, const EventInterval& b);

struct Match {
  std::size_t pred = 0;
  std::size_t ref = 0;
  double iou = 0.0;
};

struct Counts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  Counts& operator+=(const Counts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
};

struct MatchResult {
  Counts counts;
  std::vector<Match> matches;
};

// One-to-one greedy matching on descending IoU among pairs with IoU >= the
// threshold. Ties go to the earlier reference onset, then the earlier
// prediction onset.
MatchResult match_events(std::span<const EventInterval> preds,
                         std::span<const EventInterval> refs,
                         const EvalConfig& cfg);

struct Scores {
  double precision = 0.0;
  double recall = 0.0;
  double f_measure = 0.0;
};

Scores f_measure(const Counts& counts);

struct EvalReport {
  Counts counts;
  Scores scores;
  std::vector<Match> matches;
  std::map<std::string, Counts> per_task;
};

// Micro-average: per-task counts are summed before computing scores.
EvalReport aggregate(const std::map<std::string, Counts>& per_task);

std::vector<EventInterval> to_intervals(
    std::span<const task::AnnotationEvent> events);

// Predictions CSV: header onset_s,offset_s,score.
void write_predictions(std::ostream& out, std::span<const EventInterval> events);
void save_predictions(const std::filesystem::path& path,
                      std::span<const EventInterval> events);
std::vector<EventInterval> load_predictions(const std::filesystem::path& path);

}  // namespace fsbed::eval
