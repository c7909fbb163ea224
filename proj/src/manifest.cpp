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

#include "fsbed/manifest.hpp"

#include <fstream>

#include <json.hpp>

#include "fsbed/common.hpp"

namespace fsbed::task {
namespace {

using nlohmann::json;

ManifestEntry entry_from_json(const json& j) {
  ManifestEntry e;
  e.recording = j.at("recording").get<std::string>();
  e.wav_path = j.at("wav_path").get<std::string>();
  e.csv_path = j.at("csv_path").get<std::string>();
  e.n_shots = j.value("n_shots", 5);
  e.split = j.value("split", std::string("test"));
  e.subset = j.value("subset", std::string());
  return e;
}

}  // namespace

std::filesystem::path Manifest::resolve(const std::string& p) const {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base_dir / path;
}

std::vector<ManifestEntry> Manifest::split(const std::string& name) const {
  std::vector<ManifestEntry> out;
  for (const auto& e : entries) {
    if (e.split == name) out.push_back(e);
  }
  return out;
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  Manifest m;
  m.base_dir = path.parent_path();
  try {
    const json j = json::parse(in);
    if (j.contains("recordings")) {
      for (const auto& r : j.at("recordings")) {
        m.entries.push_back(entry_from_json(r));
      }
    } else {
      m.entries.push_back(entry_from_json(j));
    }
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidConfig, path.string() + ": " + e.what());
  }
  return m;
}

void save_manifest(const std::filesystem::path& path,
                   const Manifest& manifest) {
  json arr = json::array();
  for (const auto& e : manifest.entries) {
    arr.push_back({{"recording", e.recording},
                   {"wav_path", e.wav_path},
                   {"csv_path", e.csv_path},
                   {"n_shots", e.n_shots},
                   {"split", e.split},
                   {"subset", e.subset}});
  }
  std::ofstream out(path);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out << json{{"recordings", arr}}.dump(2) << '\n';
}

}  // namespace fsbed::task
