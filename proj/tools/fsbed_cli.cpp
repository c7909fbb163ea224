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

// Command-line front end: detect, bench, synth, eval, config.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "fsbed/pipeline.hpp"
#include "fsbed/synth.hpp"

namespace fs = std::filesystem;
using namespace fsbed;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out << text;
}

// A config argument is either a JSON file or an ablation preset name.
pipeline::PipelineConfig resolve_config(const std::string& arg) {
  if (arg.empty()) return pipeline::PipelineConfig{};
  if (fs::exists(arg)) return pipeline::load_config(arg);
  return pipeline::ablation_preset(arg);
}

// "pooled", "trainable" or "external:<path>"; other spec fields are kept.
// External paths may contain {recording} and {part} (support or query).
void override_embedder(embed::EmbedderSpec& spec, const std::string& arg) {
  if (arg.empty()) return;
  nlohmann::json j = pipeline::spec_to_json(spec);
  const std::string prefix = "external:";
  if (arg.rfind(prefix, 0) == 0) {
    j["kind"] = "external";
    j["external_path"] = arg.substr(prefix.size());
  } else {
    j["kind"] = arg;
  }
  j.erase("trainable");
  spec = pipeline::spec_from_json(j);
}

struct EmbedderArgs {
  std::string student;
  std::string teacher;

  void apply(pipeline::PipelineConfig& cfg) const {
    override_embedder(cfg.student, student);
    override_embedder(cfg.teacher, teacher);
    cfg.validate();
  }
};

std::string safe_name(std::string s) {
  for (char& c : s) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
  }
  return s;
}

int cmd_detect(const std::string& wav, const std::string& csv,
               const std::string& config, const EmbedderArgs& embedders,
               const fs::path& out_dir) {
  auto cfg = resolve_config(config);
  embedders.apply(cfg);
  pipeline::EpisodeInput in;
  in.recording_id = fs::path(wav).stem().string();
  in.wave = audio::load_wav(wav);
  in.events = task::load_annotations(csv);
  in.n_shots = cfg.n_shots;
  const auto rep = pipeline::run_episode(in, cfg);

  fs::create_directories(out_dir);
  eval::save_predictions(out_dir / "predictions.csv", rep.predictions);
  write_text(out_dir / "report.json",
             pipeline::episode_to_json(rep, true).dump(2) + "\n");
  write_text(out_dir / "steps.jsonl", pipeline::step_log_jsonl(rep.step_log));
  write_text(out_dir / "trace.csv", pipeline::probability_trace_csv(rep));
  for (const auto& n : rep.notices) std::cerr << "note: " << n << '\n';
  std::cout << rep.predictions.size() << " events, F=" << rep.scores.f_measure
            << " (tp " << rep.match.counts.tp << " fp " << rep.match.counts.fp
            << " fn " << rep.match.counts.fn << ")\n";
  return 0;
}

int cmd_bench(const std::string& manifest_path,
              const std::vector<std::string>& configs,
              const EmbedderArgs& embedders, const fs::path& out_dir, int jobs) {
  const auto manifest = task::load_manifest(manifest_path);
  fs::create_directories(out_dir);
  std::vector<pipeline::BenchmarkReport> reports;
  bool failed = false;
  for (const auto& c : configs.empty() ? std::vector<std::string>{""} : configs) {
    auto cfg = resolve_config(c);
    embedders.apply(cfg);
    auto rep = pipeline::run_benchmark(manifest, cfg, jobs);
    const std::string stem = safe_name(cfg.name);
    write_text(out_dir / (stem + ".json"),
               pipeline::benchmark_to_json(rep, true).dump(2) + "\n");
    std::string steps;
    for (const auto& e : rep.episodes) steps += pipeline::step_log_jsonl(e.step_log);
    write_text(out_dir / (stem + ".steps.jsonl"), steps);
    for (const auto& [id, msg] : rep.failures) {
      std::cerr << cfg.name << ": " << id << ": " << msg << '\n';
      failed = true;
    }
    reports.push_back(std::move(rep));
  }
  const std::string table = pipeline::comparison_table(reports);
  if (reports.size() > 1) write_text(out_dir / "comparison.txt", table);
  std::cout << table;
  return failed ? 1 : 0;
}

int cmd_synth(const std::vector<std::string>& profiles, std::uint64_t seed,
              int n_train, int n_test, const fs::path& out_dir) {
  std::vector<synth::SynthProfile> ps;
  for (const auto& p : profiles) ps.push_back(synth::preset_profile(p));
  const auto m = synth::generate_corpus(ps, n_train, n_test, seed, out_dir);
  std::cout << "wrote " << m.entries.size() << " recordings to "
            << out_dir.string() << '\n';
  return 0;
}

int cmd_eval(const std::string& pred, const std::string& ref, double iou) {
  eval::EvalConfig cfg;
  cfg.iou_threshold = iou;
  cfg.validate();
  const auto preds = eval::load_predictions(pred);
  const auto refs = eval::to_intervals(task::load_annotations(ref));
  const auto m = eval::match_events(preds, refs, cfg);
  const auto s = eval::f_measure(m.counts);
  std::cout << "tp " << m.counts.tp << " fp " << m.counts.fp << " fn "
            << m.counts.fn << "\nprecision " << s.precision << "\nrecall "
            << s.recall << "\nF " << s.f_measure << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Few-shot bioacoustic event detection"};
  app.require_subcommand(1);

  std::string wav, csv, config, manifest, pred, ref;
  std::vector<std::string> configs;
  std::vector<std::string> profiles{"easy"};
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  int jobs = 1, n_train = 1, n_test = 10;
  double iou = 0.3;
  EmbedderArgs embedders;
  auto add_embedder_options = [&](CLI::App* cmd) {
    cmd->add_option("--student-embedder", embedders.student,
                    "pooled, trainable or external:<path>");
    cmd->add_option("--teacher-embedder", embedders.teacher,
                    "pooled, trainable or external:<path>");
  };

  auto* detect = app.add_subcommand("detect", "run one episode");
  detect->add_option("--wav", wav)->required();
  detect->add_option("--csv", csv)->required();
  detect->add_option("--config", config, "JSON file or ablation preset");
  detect->add_option("--out-dir", out_dir);
  add_embedder_options(detect);

  auto* bench = app.add_subcommand("bench", "run a corpus under one or more configs");
  bench->add_option("--manifest", manifest)->required();
  bench->add_option("--config", configs, "JSON file or ablation preset");
  bench->add_option("--out-dir", out_dir);
  bench->add_option("--jobs", jobs)->check(CLI::PositiveNumber);
  add_embedder_options(bench);

  auto* syn = app.add_subcommand("synth", "generate a synthetic corpus");
  syn->add_option("--profile", profiles)->check(CLI::IsMember(synth::preset_names()));
  syn->add_option("--seed", seed);
  syn->add_option("--n-train", n_train)->check(CLI::PositiveNumber);
  syn->add_option("--n-test", n_test)->check(CLI::PositiveNumber);
  syn->add_option("--out-dir", out_dir);

  auto* ev = app.add_subcommand("eval", "score a predictions CSV");
  ev->add_option("--pred", pred)->required();
  ev->add_option("--ref", ref)->required();
  ev->add_option("--iou", iou);

  std::string preset = "NSS+AL";
  auto* cfgcmd = app.add_subcommand("config", "print a preset as JSON");
  cfgcmd->add_option("--preset", preset);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*detect) return cmd_detect(wav, csv, config, embedders, out_dir);
    if (*bench) return cmd_bench(manifest, configs, embedders, out_dir, jobs);
    if (*syn) return cmd_synth(profiles, seed, n_train, n_test, out_dir);
    if (*ev) return cmd_eval(pred, ref, iou);
    if (*cfgcmd) {
      std::cout << pipeline::config_to_json(pipeline::ablation_preset(preset)).dump(2)
                << '\n';
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
