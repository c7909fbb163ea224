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

#include "fsbed/task.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "fsbed/common.hpp"

namespace fsbed::task {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

double parse_seconds(const std::string& field, int line) {
  double v = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
    throw Error(Errc::MalformedRow, "line " + std::to_string(line) +
                                        ": bad time '" + field + "'");
  }
  return v;
}

int interval_overlap(int a0, int a1, int b0, int b1) {
  return std::max(0, std::min(a1, b1) - std::max(a0, b0));
}

}  // namespace

std::vector<AnnotationEvent> parse_annotations(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) return {};
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF &&
      static_cast<unsigned char>(line[1]) == 0xBB &&
      static_cast<unsigned char>(line[2]) == 0xBF) {
    line.erase(0, 3);
  }
  if (trim(line) != "onset_s,offset_s,label") {
    throw Error(Errc::MalformedRow, "expected header onset_s,offset_s,label");
  }
  std::vector<AnnotationEvent> events;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(trim(f));
    if (fields.size() != 3) {
      throw Error(Errc::MalformedRow,
                  "line " + std::to_string(line_no) + ": expected 3 fields");
    }
    AnnotationEvent ev;
    ev.onset_s = parse_seconds(fields[0], line_no);
    ev.offset_s = parse_seconds(fields[1], line_no);
    if (ev.onset_s < 0.0 || ev.onset_s >= ev.offset_s) {
      throw Error(Errc::MalformedRow, "line " + std::to_string(line_no) +
                                          ": need 0 <= onset < offset");
    }
    if (fields[2] == "POS") {
      ev.label = EventLabel::Pos;
    } else if (fields[2] == "UNK") {
      ev.label = EventLabel::Unk;
    } else {
      throw Error(Errc::UnknownLabel, "line " + std::to_string(line_no) +
                                          ": '" + fields[2] + "'");
    }
    events.push_back(ev);
  }
  std::stable_sort(events.begin(), events.end(),
                   [](const auto& a, const auto& b) {
                     return a.onset_s < b.onset_s;
                   });
  return events;
}

std::vector<AnnotationEvent> load_annotations(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  return parse_annotations(in);
}

void write_annotations(std::ostream& out,
                       std::span<const AnnotationEvent> events) {
  out << "onset_s,offset_s,label\n";
  out << std::setprecision(17);
  for (const auto& ev : events) {
    out << ev.onset_s << ',' << ev.offset_s << ','
        << (ev.label == EventLabel::Pos ? "POS" : "UNK") << '\n';
  }
}

void save_annotations(const std::filesystem::path& path,
                      std::span<const AnnotationEvent> events) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  write_annotations(out, events);
}

Episode build_episode(std::span<const AnnotationEvent> events,
                      double duration_s, int n_shots,
                      std::string recording_id) {
  if (n_shots < 1) throw Error(Errc::InvalidConfig, "n_shots must be >= 1");
  std::vector<AnnotationEvent> sorted(events.begin(), events.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const auto& a, const auto& b) {
                     return a.onset_s < b.onset_s;
                   });
  Episode ep;
  ep.recording_id = std::move(recording_id);
  for (const auto& ev : sorted) {
    if (ev.label != EventLabel::Pos) continue;
    if (static_cast<int>(ep.support_events.size()) < n_shots) {
      ep.support_events.push_back(ev);
    } else {
      ep.reference_events.push_back(ev);
    }
  }
  if (ep.support_events.empty()) {
    throw Error(Errc::NoPositives, "no POS events in annotations");
  }
  ep.query_start_s = ep.support_events.back().offset_s;
  ep.query_end_s = duration_s;
  if (!(duration_s > ep.query_start_s)) {
    throw Error(Errc::EmptyQuery,
                "recording ends before the last support event");
  }
  for (const auto& ev : sorted) {
    if (ev.label == EventLabel::Unk && ev.onset_s < ep.query_start_s) {
      ep.support_unknown.push_back(ev);
    }
  }
  return ep;
}

int seconds_to_frames(double seconds, double frame_shift_ms) {
  return static_cast<int>(std::lround(seconds * 1000.0 / frame_shift_ms));
}

int segment_length_for_median(int m) {
  if (m <= 20) return 20;
  if (m <= 100) return m;
  if (m <= 200) return m / 2;
  if (m <= 400) return m / 4;
  return m / 8;
}

SegmentPlan plan_segments(std::span<const AnnotationEvent> support_events,
                          double frame_shift_ms) {
  if (support_events.empty()) {
    throw Error(Errc::NoPositives, "segment plan needs support events");
  }
  std::vector<int> frames;
  frames.reserve(support_events.size());
  for (const auto& ev : support_events) {
    frames.push_back(seconds_to_frames(ev.duration_s(), frame_shift_ms));
  }
  std::sort(frames.begin(), frames.end());
  SegmentPlan plan;
  plan.median_frames = frames[(frames.size() - 1) / 2];
  plan.seg_len = segment_length_for_median(plan.median_frames);
  plan.hop = std::max(1, plan.seg_len / 4);
  return plan;
}

SegmentGrid make_grid(int span, const SegmentPlan& plan,
                      double frame_shift_ms, int origin_frame) {
  if (span < 1) throw Error(Errc::InvalidConfig, "grid span must be >= 1");
  if (plan.seg_len < 1 || plan.hop < 1) {
    throw Error(Errc::InvalidConfig, "segment plan must have seg_len, hop >= 1");
  }
  SegmentGrid grid;
  grid.origin_frame = origin_frame;
  grid.span = span;
  grid.seg_len = plan.seg_len;
  grid.hop = plan.hop;
  grid.frame_shift_ms = frame_shift_ms;
  if (span < plan.seg_len) {
    grid.segments.push_back({0, plan.seg_len});
    return grid;
  }
  for (int s = 0; s + plan.seg_len <= span; s += plan.hop) {
    grid.segments.push_back({s, s + plan.seg_len});
  }
  return grid;
}

std::vector<LabeledSegment> label_support_segments(
    const SegmentGrid& grid, std::span<const AnnotationEvent> positives,
    std::span<const AnnotationEvent> unknowns) {
  struct FrameEvent {
    int start, end;
  };
  auto to_frames = [&](const AnnotationEvent& ev) {
    const int a =
        seconds_to_frames(ev.onset_s, grid.frame_shift_ms) - grid.origin_frame;
    const int b =
        seconds_to_frames(ev.offset_s, grid.frame_shift_ms) - grid.origin_frame;
    return FrameEvent{a, std::max(b, a + 1)};
  };
  std::vector<FrameEvent> pos, unk;
  for (const auto& ev : positives) pos.push_back(to_frames(ev));
  for (const auto& ev : unknowns) unk.push_back(to_frames(ev));

  std::vector<LabeledSegment> out;
  out.reserve(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Segment& seg = grid.segments[i];
    bool touches = false;
    bool positive = false;
    for (const auto& ev : pos) {
      const int ov = interval_overlap(seg.start, seg.end, ev.start, ev.end);
      if (ov == 0) continue;
      touches = true;
      const int seg_frames = seg.end - seg.start;
      const int ev_frames = ev.end - ev.start;
      // Events shorter than half a segment can never reach the 50% mark;
      // segments holding the whole event stand in for them.
      if (2 * ov >= seg_frames || (2 * ev_frames < seg_frames && ov == ev_frames)) {
        positive = true;
      }
    }
    for (const auto& ev : unk) {
      if (interval_overlap(seg.start, seg.end, ev.start, ev.end) > 0) {
        touches = true;
      }
    }
    SegmentLabel label = positive   ? SegmentLabel::Positive
                         : touches ? SegmentLabel::Ambiguous
                                   : SegmentLabel::Negative;
    out.push_back({i, label});
  }
  return out;
}

}  // namespace fsbed::task
