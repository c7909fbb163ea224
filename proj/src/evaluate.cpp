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

#include "fsbed/evaluate.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace fsbed::eval {

void EvalConfig::validate() const {
  if (!(prob_threshold > 0.0 && prob_threshold < 1.0)) {
    throw Error(Errc::InvalidConfig, "prob_threshold must lie in (0,1)");
  }
  if (!(iou_threshold > 0.0 && iou_threshold < 1.0)) {
    throw Error(Errc::InvalidConfig, "iou_threshold must lie in (0,1)");
  }
  if (min_duration_s < 0.0) {
    throw Error(Errc::InvalidConfig, "min_duration_s must be >= 0");
  }
}

std::vector<EventInterval> merge_intervals(
    std::span<const EventInterval> sorted) {
  std::vector<EventInterval> out;
  std::vector<double> members;
  for (const auto& ev : sorted) {
    if (!out.empty() && ev.onset_s <= out.back().offset_s) {
      auto& cur = out.back();
      cur.offset_s = std::max(cur.offset_s, ev.offset_s);
      cur.score = (cur.score * members.back() + ev.score) / (members.back() + 1);
      members.back() += 1.0;
    } else {
      out.push_back(ev);
      members.push_back(1.0);
    }
  }
  return out;
}

std::vector<EventInterval> threshold_and_merge(const proto::ProbMatrix& probs,
                                               const task::SegmentGrid& grid,
                                               double query_offset_s,
                                               const EvalConfig& cfg) {
  if (probs.rows() != grid.size()) {
    throw Error(Errc::AlignmentMismatch,
                std::to_string(probs.rows()) + " probability rows for " +
                    std::to_string(grid.size()) + " segments");
  }
  const double shift_s = grid.frame_shift_ms / 1000.0;
  std::vector<EventInterval> kept;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double p = probs.p(static_cast<Eigen::Index>(i), 0);
    if (p < cfg.prob_threshold) continue;
    const auto& seg = grid.segments[i];
    kept.push_back({query_offset_s + seg.start * shift_s,
                    query_offset_s + seg.end * shift_s, p});
  }
  std::vector<EventInterval> events = merge_intervals(kept);
  if (cfg.min_duration_s > 0.0) {
    std::erase_if(events, [&](const EventInterval& e) {
      return e.offset_s - e.onset_s < cfg.min_duration_s;
    });
  }
  return events;
}

double iou(const EventInterval& a, const EventInterval& b) {
  const double inter =
      std::min(a.offset_s, b.offset_s) - std::max(a.onset_s, b.onset_s);
  if (inter <= 0.0) return 0.0;
  const double uni =
      std::max(a.offset_s, b.offset_s) - std::min(a.onset_s, b.onset_s);
  return inter / uni;
}

MatchResult match_events(std::span<const EventInterval> preds,
                         std::span<const EventInterval> refs,
                         const EvalConfig& cfg) {
  std::vector<Match> pairs;
  for (std::size_t p = 0; p < preds.size(); ++p) {
    for (std::size_t r = 0; r < refs.size(); ++r) {
      const double v = iou(preds[p], refs[r]);
      if (v >= cfg.iou_threshold) pairs.push_back({p, r, v});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [&](const Match& a, const Match& b) {
    if (a.iou != b.iou) return a.iou > b.iou;
    if (refs[a.ref].onset_s != refs[b.ref].onset_s) {
      return refs[a.ref].onset_s < refs[b.ref].onset_s;
    }
    if (preds[a.pred].onset_s != preds[b.pred].onset_s) {
      return preds[a.pred].onset_s < preds[b.pred].onset_s;
    }
    return std::tie(a.ref, a.pred) < std::tie(b.ref, b.pred);
  });
  std::vector<bool> pred_used(preds.size(), false);
  std::vector<bool> ref_used(refs.size(), false);
  MatchResult result;
  for (const Match& m : pairs) {
    if (pred_used[m.pred] || ref_used[m.ref]) continue;
    pred_used[m.pred] = ref_used[m.ref] = true;
    result.matches.push_back(m);
  }
  result.counts.tp = result.matches.size();
  result.counts.fp = preds.size() - result.counts.tp;
  result.counts.fn = refs.size() - result.counts.tp;
  return result;
}

Scores f_measure(const Counts& c) {
  Scores s;
  const double tp = static_cast<double>(c.tp);
  if (c.tp + c.fp > 0) s.precision = tp / static_cast<double>(c.tp + c.fp);
  if (c.tp + c.fn > 0) s.recall = tp / static_cast<double>(c.tp + c.fn);
  if (s.precision + s.recall > 0.0) {
    s.f_measure = 2.0 * s.precision * s.recall / (s.precision + s.recall);
  }
  return s;
}

EvalReport aggregate(const std::map<std::string, Counts>& per_task) {
  EvalReport report;
  report.per_task = per_task;
  for (const auto& [name, c] : per_task) report.counts += c;
  report.scores = f_measure(report.counts);
  return report;
}

std::vector<EventInterval> to_intervals(
    std::span<const task::AnnotationEvent> events) {
  std::vector<EventInterval> out;
  out.reserve(events.size());
  for (const auto& ev : events) out.push_back({ev.onset_s, ev.offset_s, 1.0});
  return out;
}

void write_predictions(std::ostream& out,
                       std::span<const EventInterval> events) {
  out << "onset_s,offset_s,score\n" << std::setprecision(10);
  for (const auto& ev : events) {
    out << ev.onset_s << ',' << ev.offset_s << ',' << ev.score << '\n';
  }
}

void save_predictions(const std::filesystem::path& path,
                      std::span<const EventInterval> events) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  write_predictions(out, events);
}

std::vector<EventInterval> load_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<EventInterval> out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    std::stringstream ss(line);
    std::string a, b, c;
    std::getline(ss, a, ',');
    std::getline(ss, b, ',');
    std::getline(ss, c, ',');
    try {
      EventInterval ev{std::stod(a), std::stod(b), c.empty() ? 1.0 : std::stod(c)};
      if (!(ev.onset_s < ev.offset_s)) throw std::invalid_argument("order");
      out.push_back(ev);
    } catch (const std::exception&) {
      throw Error(Errc::MalformedRow,
                  path.string() + " line " + std::to_string(line_no));
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& x, const auto& y) {
    return x.onset_s < y.onset_s;
  });
  return out;
}

}  // namespace fsbed::eval
