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
#include <string>
#include <vector>

namespace fsbed::task {

// One recording of a corpus. Paths are relative to the manifest directory
// unless absolute.
struct ManifestEntry {
  std::string recording;
  std::string wav_path;
  std::string csv_path;
  int n_shots = 5;
  std::string split = "test";  // "train" recordings are fully annotated
  std::string subset;          // grouping key for per-subset scores
};

struct Manifest {
  std::filesystem::path base_dir;
  std::vector<ManifestEntry> entries;

  std::filesystem::path resolve(const std::string& p) const;
  std::vector<ManifestEntry> split(const std::string& name) const;
};

// {"recordings": [{recording, wav_path, csv_path, n_shots, split, subset}]}
// A bare episode object {recording, wav_path, csv_path, n_shots} is also
// accepted as a one-entry manifest.
Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const std::filesystem::path& path, const Manifest& manifest);

}  // namespace fsbed::task
