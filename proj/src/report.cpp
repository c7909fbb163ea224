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

#include <iomanip>
#include <sstream>

#include "fsbed/pipeline.hpp"

namespace fsbed::pipeline {

using nlohmann::json;

namespace {

json intervals_to_json(const std::vector<eval::EventInterval>& v) {
  json out = json::array();
  for (const auto& e : v) out.push_back({e.onset_s, e.offset_s, e.score});
  return out;
}

json counts_to_json(const eval::Counts& c) {
  return {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}};
}

json scores_to_json(const eval::Scores& s) {
  return {{"precision", s.precision}, {"recall", s.recall}, {"f", s.f_measure}};
}

json eval_to_json(const eval::EvalReport& r) {
  json tasks = json::object();
  for (const auto& [id, c] : r.per_task) tasks[id] = counts_to_json(c);
  return {{"counts", counts_to_json(r.counts)},
          {"scores", scores_to_json(r.scores)},
          {"per_task", tasks}};
}

json step_to_json(const adapt::StepRecord& s) {
  return {{"step", s.step},
          {"loss", s.loss.total},
          {"kl", s.loss.kl},
          {"h_marginal", s.loss.h_marginal},
          {"h_conditional", s.loss.h_conditional},
          {"mutual_info", s.loss.mutual_info},
          {"weight", s.loss.weight},
          {"disagreements", s.disagreements}};
}

}  // namespace

json classifier_to_json(const proto::ClassifierWeights& w) {
  auto row = [&](Eigen::Index r) {
    return std::vector<double>(w.W.row(r).begin(), w.W.row(r).end());
  };
  return {{"provenance", std::string(proto::to_string(w.provenance))},
          {"d", w.dim()},
          {"w1", row(0)},
          {"w2", row(1)}};
}

json episode_to_json(const EpisodeReport& r, bool with_timing) {
  json chain = json::array();
  for (const auto& w : r.chain) chain.push_back(classifier_to_json(w));
  json steps = json::array();
  for (const auto& s : r.step_log) steps.push_back(step_to_json(s));
  json matches = json::array();
  for (const auto& m : r.match.matches) {
    matches.push_back({{"pred", m.pred}, {"ref", m.ref}, {"iou", m.iou}});
  }
  json j = {
      {"recording", r.recording_id},
      {"subset", r.subset},
      {"plan",
       {{"median_frames", r.plan.median_frames},
        {"seg_len", r.plan.seg_len},
        {"hop", r.plan.hop}}},
      {"query_start_s", r.query_start_s},
      {"query_end_s", r.query_end_s},
      {"support_segments", r.support_segments},
      {"query_segments", r.query_segments},
      {"positives", r.positives},
      {"negatives", r.negatives},
      {"ambiguous", r.ambiguous},
      {"chain", chain},
      {"step_log", steps},
      {"notices", r.notices},
      {"predictions", intervals_to_json(r.predictions)},
      {"references", intervals_to_json(r.references)},
      {"matches", matches},
      {"counts", counts_to_json(r.match.counts)},
      {"scores", scores_to_json(r.scores)},
  };
  if (r.selection) {
    j["selection"] = {{"indices", r.selection->selected_indices},
                      {"candidates", r.selection->candidate_count},
                      {"lower", r.selection->lower},
                      {"upper", r.selection->upper}};
  } else {
    j["selection"] = nullptr;
  }
  if (with_timing) j["elapsed_s"] = r.elapsed_s;
  return j;
}

json benchmark_to_json(const BenchmarkReport& r, bool with_timing) {
  json episodes = json::array();
  for (const auto& e : r.episodes) episodes.push_back(episode_to_json(e, with_timing));
  json failures = json::array();
  for (const auto& [id, msg] : r.failures) {
    failures.push_back({{"recording", id}, {"error", msg}});
  }
  json subsets = json::object();
  for (const auto& [name, rep] : r.per_subset) subsets[name] = eval_to_json(rep);
  return {{"config", r.config_name},
          {"overall", eval_to_json(r.overall)},
          {"per_subset", subsets},
          {"failures", failures},
          {"pretrain_loss", r.pretrain_loss},
          {"episodes", episodes}};
}

std::string comparison_table(const std::vector<BenchmarkReport>& reports) {
  std::vector<std::string> subsets;
  for (const auto& r : reports) {
    for (const auto& [name, _] : r.per_subset) {
      if (std::find(subsets.begin(), subsets.end(), name) == subsets.end()) {
        subsets.push_back(name);
      }
    }
  }
  std::sort(subsets.begin(), subsets.end());

  std::ostringstream out;
  out << std::left << std::setw(16) << "config";
  for (const auto& s : subsets) out << std::right << std::setw(10) << s;
  out << std::right << std::setw(10) << "ALL" << '\n';
  out << std::fixed << std::setprecision(3);
  for (const auto& r : reports) {
    out << std::left << std::setw(16) << r.config_name << std::right;
    for (const auto& s : subsets) {
      const auto it = r.per_subset.find(s);
      if (it == r.per_subset.end()) {
        out << std::setw(10) << "-";
      } else {
        out << std::setw(10) << it->second.scores.f_measure;
      }
    }
    out << std::setw(10) << r.overall.scores.f_measure << '\n';
  }
  return out.str();
}

std::string step_log_jsonl(const std::vector<adapt::StepRecord>& log) {
  std::string out;
  for (const auto& s : log) out += step_to_json(s).dump() + '\n';
  return out;
}

std::string probability_trace_csv(const EpisodeReport& r) {
  std::ostringstream out;
  out << "time_s,p_positive\n" << std::setprecision(17);
  for (std::size_t i = 0; i < r.query_probs.size(); ++i) {
    out << r.segment_times[i] << ',' << r.query_probs[i] << '\n';
  }
  return out.str();
}

}  // namespace fsbed::pipeline
