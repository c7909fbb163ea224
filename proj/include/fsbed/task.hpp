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
#include <span>
#include <string>
#include <vector>

namespace fsbed::task {

enum class EventLabel { Pos, Unk };

struct AnnotationEvent {
  double onset_s = 0.0;
  double offset_s = 0.0;
  EventLabel label = EventLabel::Pos;

  double duration_s() const { return offset_s - onset_s; }
  bool operator==(const AnnotationEvent&) const = default;
};

// CSV with header "onset_s,offset_s,label". Rows are returned sorted by
// onset (stable for equal onsets).
std::vector<AnnotationEvent> parse_annotations(std::istream& in);
std::vector<AnnotationEvent> load_annotations(const std::filesystem::path& path);
void write_annotations(std::ostream& out,
                       std::span<const AnnotationEvent> events);
void save_annotations(const std::filesystem::path& path,
                      std::span<const AnnotationEvent> events);

struct Episode {
  std::string recording_id;
  std::vector<AnnotationEvent> support_events;
  // UNK events that intersect the support span.
  std::vector<AnnotationEvent> support_unknown;
  double query_start_s = 0.0;
  double query_end_s = 0.0;
  // Held-out POS events after the support set; only the scorer reads these.
  std::vector<AnnotationEvent> reference_events;
};

// Support = first n_shots POS events by onset (clipped when fewer exist).
// The query span runs from the last support offset to the end of audio.
Episode build_episode(std::span<const AnnotationEvent> events,
                      double duration_s, int n_shots = 5,
                      std::string recording_id = {});

struct SegmentPlan {
  int median_frames = 0;
  int seg_len = 0;
  int hop = 0;
};

int seconds_to_frames(double seconds, double frame_shift_ms);

// Segment length for a median event duration m (frames):
//   m <= 20 -> 20, (20,100] -> m, (100,200] -> m/2, (200,400] -> m/4,
//   > 400 -> m/8, with integer division.
int segment_length_for_median(int median_frames);

// Median uses the lower middle element for even counts.
SegmentPlan plan_segments(std::span<const AnnotationEvent> support_events,
                          double frame_shift_ms);

// Half-open [start, end) in frames, relative to the grid origin.
struct Segment {
  int start = 0;
  int end = 0;
  bool operator==(const Segment&) const = default;
};

struct SegmentGrid {
  int origin_frame = 0;  // absolute frame index of relative frame 0
  int span = 0;          // frames covered by the grid region
  int seg_len = 0;
  int hop = 0;
  double frame_shift_ms = 10.0;
  std::vector<Segment> segments;

  std::size_t size() const { return segments.size(); }
  // True when the span was shorter than seg_len and the single segment
  // extends past it (frames beyond are treated as zeros).
  bool padded() const { return span < seg_len; }
};

SegmentGrid make_grid(int span, const SegmentPlan& plan,
                      double frame_shift_ms, int origin_frame = 0);

enum class SegmentLabel { Positive, Negative, Ambiguous };

struct LabeledSegment {
  std::size_t index = 0;
  SegmentLabel label = SegmentLabel::Ambiguous;
};

// Positive: at least half of the segment's frames overlap one POS event.
// An event shorter than half a segment instead marks every segment that
// contains it entirely. Negative: no overlap with any POS or
// UNK event. Everything else is ambiguous.
std::vector<LabeledSegment> label_support_segments(
    const SegmentGrid& grid, std::span<const AnnotationEvent> positives,
    std::span<const AnnotationEvent> unknowns = {});

}  // namespace fsbed::task
