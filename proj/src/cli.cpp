// Copyright 2026 The W2SR Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "w2sr/cli.hpp"

#include <atomic>
#include <chrono>
#include <csignal>
#include <map>
#include <ostream>
#include <thread>
#include <unordered_set>

#include "CLI11.hpp"
#include "w2sr/grading.hpp"
#include "w2sr/metrics.hpp"
#include "w2sr/mock_server.hpp"
#include "w2sr/prompts.hpp"

namespace w2sr {

namespace fs = std::filesystem;

namespace {

std::atomic<bool> g_stop_requested{false};

extern "C" void handle_stop_signal(int) { g_stop_requested = true; }

fs::path resolve(const fs::path& base, const fs::path& p) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

// Inputs, outputs and argv of one subcommand run; written to
// <output_dir>/manifests/<name>.json. No timestamps, so reruns reproduce it.
class RunManifest {
 public:
  RunManifest(std::string name, std::vector<std::string> argv) : name_(std::move(name)), argv_(std::move(argv)) {}

  void input(const fs::path& p) { inputs_.push_back(entry(p)); }
  void output(const fs::path& p) { outputs_.push_back(entry(p)); }
  void note(const std::string& key, json value) { extra_[key] = std::move(value); }

  fs::path write(const fs::path& output_dir, std::int64_t seed, const std::optional<fs::path>& config) const {
    json j{{"tool", "w2sr"},
           {"version", kToolVersion},
           {"subcommand", name_},
           {"argv", argv_},
           {"cwd", fs::current_path().string()},
           {"output_dir", fs::absolute(output_dir).lexically_normal().string()},
           {"seed", seed},
           {"inputs", inputs_},
           {"outputs", outputs_}};
    if (config) j["config"] = entry(*config);
    if (!extra_.empty()) j["notes"] = extra_;
    const fs::path path = output_dir / "manifests" / (name_ + ".json");
    write_file_atomic(path, j.dump(2) + "\n");
    return path;
  }

 private:
  static json entry(const fs::path& p) {
    return json{{"path", fs::absolute(p).lexically_normal().string()}, {"sha256", sha256_hex(read_file(p))}};
  }

  std::string name_;
  std::vector<std::string> argv_;
  json inputs_ = json::array();
  json outputs_ = json::array();
  json extra_ = json::object();
};

struct CommonFlags {
  std::string config;
  std::string output_dir;
  std::optional<std::int64_t> seed;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("-c,--config", f.config, "Project configuration file (JSON)")->check(CLI::ExistingFile);
  cmd->add_option("-o,--output-dir", f.output_dir, "Output directory (overrides config)");
  cmd->add_option("--seed", f.seed, "Project seed (overrides config)");
}

struct EndpointFlags {
  std::string url;
  std::string model;
  std::optional<int> max_parallel;
  std::optional<int> max_retries;
  std::optional<double> timeout;
  std::string api;
  std::string template_name;
};

void add_endpoint(CLI::App* cmd, EndpointFlags& f, const std::string& role) {
  cmd->add_option("--" + role + "-url", f.url, "Base URL of the " + role + " endpoint, e.g. http://host:8000/v1");
  cmd->add_option("--" + role + "-model", f.model, "Model name sent to the " + role + " endpoint");
  cmd->add_option("--max-parallel", f.max_parallel, "Concurrent requests")->check(CLI::PositiveNumber);
  cmd->add_option("--max-retries", f.max_retries, "Retries on network/5xx errors")->check(CLI::NonNegativeNumber);
  cmd->add_option("--timeout", f.timeout, "Request timeout in seconds")->check(CLI::PositiveNumber);
  cmd->add_option("--api", f.api, "chat or completions")->check(CLI::IsMember({"chat", "completions"}));
  cmd->add_option("--template", f.template_name, "auto, simple or complex")
      ->check(CLI::IsMember({"auto", "simple", "complex"}));
}

void apply_endpoint(EndpointConfig& e, const EndpointFlags& f) {
  if (!f.url.empty()) e.base_url = f.url;
  if (!f.model.empty()) e.model = f.model;
  if (f.max_parallel) e.max_parallel = *f.max_parallel;
  if (f.max_retries) e.max_retries = *f.max_retries;
  if (f.timeout) e.timeout_s = *f.timeout;
  if (!f.api.empty()) e.api = api_style_from_string(f.api);
}

class Runner {
 public:
  Runner(std::vector<std::string> args, std::ostream& out, std::ostream& err)
      : args_(std::move(args)), out_(out), err_(err) {}

  int run();

 private:
  ProjectConfig load_config(const CommonFlags& f, bool validate) {
    ProjectConfig cfg;
    if (!f.config.empty()) {
      config_path_ = fs::path(f.config);
      cfg = ProjectConfig::load(*config_path_);
    }
    if (!f.output_dir.empty()) cfg.output_dir = f.output_dir;
    if (f.seed) cfg.seed = *f.seed;
    if (!cfg.distill_profile.seed) cfg.distill_profile.seed = cfg.seed;
    if (!cfg.eval_profile.seed) cfg.eval_profile.seed = cfg.seed;
    if (validate) cfg.validate();
    fs::create_directories(cfg.output_dir);
    return cfg;
  }

  PromptTemplate pick_template(const ProjectConfig& cfg, const std::string& choice, const std::string& model) {
    TemplateId id;
    if (choice.empty() || choice == "auto") {
      id = TemplateSelector(cfg.strict_templates).select(model);
    } else {
      id = template_id_from_string(choice);
    }
    if (cfg.template_dir) return PromptTemplate::from_directory(*cfg.template_dir, id);
    return PromptTemplate::builtin(id);
  }

  void finish(RunManifest& m, const ProjectConfig& cfg) {
    fs::path p = m.write(cfg.output_dir, cfg.seed, config_path_);
    err_ << "manifest: " << p.string() << '\n';
  }

  int cmd_ingest(const CommonFlags& common, const std::string& input, const std::string& adapter,
                 std::optional<int> min_level, std::optional<int> max_level, std::optional<std::size_t> max_malformed,
                 const std::string& subset);
  int cmd_distill(const CommonFlags& common, const EndpointFlags& ep, const std::string& corpus_path);
  int cmd_partition(const CommonFlags& common, const std::string& trajectories);
  int cmd_emit_sft(const CommonFlags& common, const std::string& trajectories, const std::vector<std::string>& variants);
  int cmd_emit_config(const CommonFlags& common, const std::string& preset, const std::string& dataset,
                      std::optional<double> lr, std::optional<int> epochs);
  int cmd_eval(const CommonFlags& common, const EndpointFlags& ep, const std::string& corpus_path,
               std::optional<int> k);
  int cmd_pass_at_k(const CommonFlags& common, const std::string& tallies, long long k);
  int cmd_rgr(const CommonFlags& common, double weak, double w2s, double strong);
  int cmd_lengths(const CommonFlags& common, const std::string& generations);
  int cmd_report(const CommonFlags& common, const std::string& rows_path);
  int cmd_mock_serve(const std::string& script, int port, const std::string& host, const std::string& log,
                     const std::string& ready_file);
  int cmd_replay(const std::string& manifest_path);

  std::vector<std::string> args_;
  std::ostream& out_;
  std::ostream& err_;
  std::optional<fs::path> config_path_;
};

int Runner::cmd_ingest(const CommonFlags& common, const std::string& input, const std::string& adapter,
                       std::optional<int> min_level, std::optional<int> max_level,
                       std::optional<std::size_t> max_malformed, const std::string& subset) {
  ProjectConfig cfg = load_config(common, input.empty());
  if (!input.empty()) {
    CorpusSource src;
    src.path = input;
    src.name = fs::path(input).stem().string();
    src.adapter = adapter_from_string(adapter.empty() ? "generic_jsonl" : adapter);
    cfg.corpora = {src};
  }
  if (cfg.corpora.empty()) throw ValidationError("ingest: no corpora configured (use --input or the config file)");

  RunManifest manifest("ingest", args_);
  Corpus merged;
  std::string log;
  std::unordered_set<std::string> ids;
  for (auto src : cfg.corpora) {
    if (min_level) src.min_level = min_level;
    if (max_level) src.max_level = max_level;
    if (max_malformed) src.load.max_malformed = *max_malformed;
    if (!subset.empty()) src.load.olympiad_subset = subset;
    LoadReport report;
    Corpus c = load_benchmark(src.path, src.adapter, src.load, &report);
    manifest.input(src.path);
    log += "[" + std::string(to_string(src.adapter)) + "] " + src.path.string() + "\n" + report.to_log();
    if (src.min_level || src.max_level) {
      FilterResult f = filter_difficulty(c, src.min_level.value_or(1), src.max_level.value_or(5));
      log += "  difficulty filter [" + std::to_string(src.min_level.value_or(1)) + "," +
             std::to_string(src.max_level.value_or(5)) + "]: kept " + std::to_string(f.corpus.size()) +
             ", missing difficulty " + std::to_string(f.missing_difficulty) + "\n";
      c = std::move(f.corpus);
    }
    for (auto& r : c.records) {
      if (!ids.insert(r.id).second) throw ValidationError("ingest: duplicate id across corpora: " + r.id);
      merged.records.push_back(std::move(r));
    }
  }
  const fs::path corpus_out = cfg.output_dir / "corpus.jsonl";
  const fs::path log_out = cfg.output_dir / "ingest.log";
  save_corpus(merged, corpus_out);
  write_file_atomic(log_out, log);
  manifest.output(corpus_out);
  manifest.output(log_out);
  manifest.note("records", merged.size());
  finish(manifest, cfg);
  out_ << "ingested " << merged.size() << " records -> " << corpus_out.string() << '\n';
  return kExitOk;
}

int Runner::cmd_distill(const CommonFlags& common, const EndpointFlags& ep, const std::string& corpus_path) {
  ProjectConfig cfg = load_config(common, false);
  apply_endpoint(cfg.teacher, ep);
  const fs::path corpus_file = corpus_path.empty() ? cfg.output_dir / "corpus.jsonl" : fs::path(corpus_path);
  Corpus corpus = load_corpus(corpus_file);
  PromptTemplate tmpl =
      pick_template(cfg, ep.template_name.empty() ? cfg.teacher_template : ep.template_name, cfg.teacher.model);

  RunManifest manifest("distill", args_);
  manifest.input(corpus_file);
  DistillOptions options;
  options.batch.checkpoint = cfg.output_dir / "distill.checkpoint.jsonl";
  options.batch.on_progress = [&](std::size_t done, std::size_t total) {
    if (done == total || done % 50 == 0) err_ << "distill: " << done << "/" << total << '\n';
  };
  BatchStats stats;
  std::vector<TrajectoryRecord> trajectories;
  try {
    trajectories = distill(corpus, cfg.teacher, cfg.distill_profile, tmpl, options, &stats);
  } catch (const BatchFailure& e) {
    err_ << "distill: " << e.what() << '\n';
    return kExitTotalFailure;
  }

  const fs::path traj_out = cfg.output_dir / "trajectories.jsonl";
  const fs::path gen_out = cfg.output_dir / "generations_distill.jsonl";
  const fs::path tally_out = cfg.output_dir / "distill_tallies.jsonl";
  save_trajectories(trajectories, traj_out);
  std::vector<GenerationResult> generations;
  std::map<std::string, SampleTally> tallies;
  for (const auto& t : trajectories) {
    GenerationResult g;
    g.record_id = t.problem_id;
    g.sample_index = t.sample_index;
    g.text = t.completion;
    g.finish_reason = t.finish_reason;
    g.completion_tokens = t.completion_tokens;
    if (t.finish_reason == FinishReason::kError) g.error_detail = "generation failed";
    generations.push_back(std::move(g));
    auto& tally = tallies[t.problem_id];
    if (tally.problem_id.empty()) {
      tally = SampleTally{t.problem_id, 0, 0};
    }
    ++tally.n;
    if (t.verdict && t.verdict->is_correct) ++tally.c;
  }
  save_generations(generations, gen_out);
  std::vector<json> tally_rows;
  for (const auto& [id, t] : tallies) tally_rows.push_back(t.to_json());
  write_file_atomic(tally_out, to_jsonl(tally_rows));

  for (const auto& p : {traj_out, gen_out, tally_out}) manifest.output(p);
  manifest.note("template", to_string(tmpl.id()));
  manifest.note("profile", cfg.distill_profile.to_json());
  manifest.note("errored_records", stats.errored_records);
  finish(manifest, cfg);
  out_ << "distilled " << trajectories.size() << " trajectories (" << stats.resumed << " resumed, "
       << stats.errored_records << " errored) -> " << traj_out.string() << '\n';
  return stats.errored_records > 0 ? kExitPartial : kExitOk;
}

int Runner::cmd_partition(const CommonFlags& common, const std::string& trajectories) {
  ProjectConfig cfg = load_config(common, false);
  const fs::path in = trajectories.empty() ? cfg.output_dir / "trajectories.jsonl" : fs::path(trajectories);
  PartitionSet p = partition(load_trajectories(in));
  const fs::path out = cfg.output_dir / "partition.json";
  write_file_atomic(out, p.summary().dump(2) + "\n");
  RunManifest manifest("partition", args_);
  manifest.input(in);
  manifest.output(out);
  finish(manifest, cfg);
  out_ << "D=" << p.all.size() << " D_p=" << p.positive.size() << " D_n=" << p.negative.size() << '\n';
  return kExitOk;
}

int Runner::cmd_emit_sft(const CommonFlags& common, const std::string& trajectories,
                         const std::vector<std::string>& variants) {
  ProjectConfig cfg = load_config(common, false);
  const fs::path in = trajectories.empty() ? cfg.output_dir / "trajectories.jsonl" : fs::path(trajectories);
  PartitionSet p = partition(load_trajectories(in));
  for (const auto& name : variants) {
    const SftVariant v = sft_variant_from_string(name);
    const fs::path out = cfg.output_dir / ("sft_" + std::string(to_string(v)) + ".jsonl");
    EmissionStats stats = emit_sft(p, v, out);
    RunManifest manifest("emit-sft-" + std::string(to_string(v)), args_);
    manifest.input(in);
    manifest.output(out);
    manifest.note("examples", stats.examples);
    manifest.note("skipped_empty", stats.skipped_empty);
    finish(manifest, cfg);
    out_ << to_string(v) << ": " << stats.examples << " examples -> " << out.string() << '\n';
  }
  return kExitOk;
}

int Runner::cmd_emit_config(const CommonFlags& common, const std::string& preset, const std::string& dataset,
                            std::optional<double> lr, std::optional<int> epochs) {
  ProjectConfig cfg = load_config(common, false);
  TrainingConfig tc = preset.empty() ? cfg.training : TrainingConfig::preset(preset);
  tc.seed = cfg.seed;
  if (lr) tc.learning_rate = *lr;
  if (epochs) tc.epochs = *epochs;
  fs::path data = dataset.empty() ? fs::path("sft_w2sr_p.jsonl") : fs::path(dataset);
  // Paths inside the output directory are written relative to it.
  if (auto rel = fs::absolute(data).lexically_relative(fs::absolute(cfg.output_dir));
      !rel.empty() && *rel.begin() != "..") {
    data = rel;
  }
  const fs::path out = cfg.output_dir / "train_config.txt";
  emit_training_config(tc, data, out);
  RunManifest manifest("emit-config", args_);
  manifest.output(out);
  finish(manifest, cfg);
  out_ << "training config -> " << out.string() << '\n';
  return kExitOk;
}

int Runner::cmd_eval(const CommonFlags& common, const EndpointFlags& ep, const std::string& corpus_path,
                     std::optional<int> k) {
  ProjectConfig cfg = load_config(common, false);
  apply_endpoint(cfg.student, ep);
  if (k) cfg.eval_profile.n_samples = *k;
  const fs::path corpus_file = corpus_path.empty() ? cfg.output_dir / "corpus.jsonl" : fs::path(corpus_path);
  Corpus corpus = load_corpus(corpus_file);
  PromptTemplate tmpl =
      pick_template(cfg, ep.template_name.empty() ? cfg.student_template : ep.template_name, cfg.student.model);

  BatchOptions batch;
  batch.checkpoint = cfg.output_dir / "eval.checkpoint.jsonl";
  BatchStats stats;
  std::vector<GenerationResult> generations;
  try {
    generations = generate_batch(corpus, cfg.student, cfg.eval_profile, tmpl, batch, &stats);
  } catch (const BatchFailure& e) {
    err_ << "eval: " << e.what() << '\n';
    return kExitTotalFailure;
  }

  std::map<std::string, const ProblemRecord*> problems;
  for (const auto& p : corpus.records) problems[p.id] = &p;
  std::vector<TrajectoryRecord> graded;
  std::map<std::string, SampleTally> tallies;
  for (const auto& g : generations) {
    graded.push_back(make_trajectory(*problems.at(g.record_id), g, cfg.student.model, tmpl));
    auto& t = tallies[g.record_id];
    t.problem_id = g.record_id;
    t.n = 0;
  }
  for (const auto& t : graded) {
    auto& tally = tallies[t.problem_id];
    ++tally.n;
    if (t.verdict->is_correct) ++tally.c;
  }
  std::vector<SampleTally> tally_list;
  std::vector<json> tally_rows;
  for (const auto& [id, t] : tallies) {
    tally_list.push_back(t);
    tally_rows.push_back(t.to_json());
  }

  const fs::path gen_out = cfg.output_dir / "eval_generations.jsonl";
  const fs::path graded_out = cfg.output_dir / "eval_graded.jsonl";
  const fs::path tally_out = cfg.output_dir / "eval_tallies.jsonl";
  const fs::path summary_out = cfg.output_dir / "eval_summary.json";
  save_generations(generations, gen_out);
  save_trajectories(graded, graded_out);
  write_file_atomic(tally_out, to_jsonl(tally_rows));
  const int n = cfg.eval_profile.n_samples;
  json summary{{"problems", corpus.size()},
               {"n_samples", n},
               {"errored_records", stats.errored_records},
               {"pass_at_1", pass_at_k(tally_list, 1)},
               {"pass_at_n", pass_at_k(tally_list, n)},
               {"length", length_stats(generations).to_json()}};
  write_file_atomic(summary_out, summary.dump(2) + "\n");

  RunManifest manifest("eval", args_);
  manifest.input(corpus_file);
  for (const auto& p : {gen_out, graded_out, tally_out, summary_out}) manifest.output(p);
  manifest.note("template", to_string(tmpl.id()));
  manifest.note("profile", cfg.eval_profile.to_json());
  finish(manifest, cfg);
  out_ << "pass@1 " << format_fixed2(100.0 * summary["pass_at_1"].get<double>()) << "  pass@" << n << " "
       << format_fixed2(100.0 * summary["pass_at_n"].get<double>()) << '\n';
  return stats.errored_records > 0 ? kExitPartial : kExitOk;
}

int Runner::cmd_pass_at_k(const CommonFlags& common, const std::string& tallies_path, long long k) {
  ProjectConfig cfg = load_config(common, false);
  auto tallies = load_tallies(tallies_path);
  const double value = pass_at_k(tallies, k);
  const fs::path out = cfg.output_dir / ("metrics_pass_at_" + std::to_string(k) + ".json");
  write_file_atomic(out, json{{"k", k}, {"problems", tallies.size()}, {"pass_at_k", value}}.dump(2) + "\n");
  RunManifest manifest("metrics-pass-at-" + std::to_string(k), args_);
  manifest.input(tallies_path);
  manifest.output(out);
  finish(manifest, cfg);
  out_ << format_fixed2(100.0 * value) << '\n';
  return kExitOk;
}

int Runner::cmd_rgr(const CommonFlags& common, double weak, double w2s, double strong) {
  const RgrValue value = rgr(RgrInputs{weak, w2s, strong});
  out_ << format_rgr(value) << '\n';
  if (!common.config.empty() || !common.output_dir.empty()) {
    ProjectConfig cfg = load_config(common, false);
    const fs::path out = cfg.output_dir / "metrics_rgr.json";
    json j{{"weak", weak}, {"w2s", w2s}, {"strong", strong}, {"rgr", value ? json(*value) : json("inapplicable")}};
    write_file_atomic(out, j.dump(2) + "\n");
    RunManifest manifest("metrics-rgr", args_);
    manifest.output(out);
    finish(manifest, cfg);
  }
  return kExitOk;
}

int Runner::cmd_lengths(const CommonFlags& common, const std::string& generations_path) {
  ProjectConfig cfg = load_config(common, false);
  const fs::path in = generations_path.empty() ? cfg.output_dir / "generations_distill.jsonl" : fs::path(generations_path);
  auto generations = load_generations(in);
  LengthStats stats = length_stats(generations);
  const fs::path out = cfg.output_dir / "metrics_lengths.json";
  write_file_atomic(out, stats.to_json().dump(2) + "\n");
  RunManifest manifest("metrics-lengths", args_);
  manifest.input(in);
  manifest.output(out);
  finish(manifest, cfg);
  out_ << format_fixed2(stats.mean_tokens) << " (" << to_string(stats.source) << ", n=" << stats.count << ")\n";
  return kExitOk;
}

int Runner::cmd_report(const CommonFlags& common, const std::string& rows_path) {
  ProjectConfig cfg = load_config(common, false);
  std::vector<ReportRow> rows;
  for (const auto& j : read_jsonl(rows_path)) rows.push_back(ReportRow::from_json(j));
  Report report = build_report(rows);
  const fs::path md = cfg.output_dir / "report.md";
  const fs::path csv = cfg.output_dir / "report.csv";
  write_report(report, md, csv);
  for (const auto& w : report.warnings) err_ << "warning: " << w << '\n';
  RunManifest manifest("report", args_);
  manifest.input(rows_path);
  manifest.output(md);
  manifest.output(csv);
  manifest.note("warnings", report.warnings);
  finish(manifest, cfg);
  out_ << report.markdown;
  return kExitOk;
}

int Runner::cmd_mock_serve(const std::string& script, int port, const std::string& host, const std::string& log,
                           const std::string& ready_file) {
  MockServer::Options options;
  options.host = host;
  options.port = port;
  if (!log.empty()) options.log_path = log;
  MockServer server(ResponseScript::load(script), options);
  g_stop_requested = false;
  auto previous_int = std::signal(SIGINT, handle_stop_signal);
  auto previous_term = std::signal(SIGTERM, handle_stop_signal);
  server.start();
  out_ << "mock server listening on " << server.base_url() << std::endl;
  if (!ready_file.empty()) write_file_atomic(ready_file, server.base_url() + "\n");
  while (!g_stop_requested) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  std::signal(SIGINT, previous_int);
  std::signal(SIGTERM, previous_term);
  server.stop();
  out_ << "served " << server.requests().size() << " requests" << std::endl;
  return kExitOk;
}

int Runner::cmd_replay(const std::string& manifest_path) {
  const json m = json::parse(read_file(manifest_path));
  const auto argv = m.at("argv").get<std::vector<std::string>>();
  if (!argv.empty() && argv.front() == "replay") throw ValidationError("replay: manifest records a replay");
  const fs::path previous = fs::current_path();
  fs::current_path(m.at("cwd").get<std::string>());
  int code = kExitOk;
  try {
    code = run_cli(argv, out_, err_);
  } catch (...) {
    fs::current_path(previous);
    throw;
  }
  fs::current_path(previous);
  if (code != kExitOk) return code;
  std::size_t mismatched = 0;
  for (const auto& o : m.at("outputs")) {
    const std::string path = o.at("path").get<std::string>();
    const bool same = fs::exists(path) && sha256_hex(read_file(path)) == o.at("sha256").get<std::string>();
    out_ << (same ? "identical  " : "DIFFERENT  ") << path << '\n';
    if (!same) ++mismatched;
  }
  return mismatched == 0 ? kExitOk : kExitPartial;
}

int Runner::run() {
  CLI::App app{"w2sr: weak-to-strong reasoning distillation and evaluation toolkit", "w2sr"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  CommonFlags common;

  std::string input, adapter, subset;
  std::optional<int> min_level, max_level;
  std::optional<std::size_t> max_malformed;
  auto* ingest = app.add_subcommand("ingest", "Load benchmark files into out/corpus.jsonl");
  add_common(ingest, common);
  ingest->add_option("--input", input, "Benchmark file (overrides the configured corpora)")->check(CLI::ExistingFile);
  ingest->add_option("--adapter", adapter, "math, math500, olympiadbench, minerva, amc23, gpqa_diamond, generic_jsonl");
  ingest->add_option("--min-level", min_level, "Minimum difficulty (1-5)")->check(CLI::Range(1, 5));
  ingest->add_option("--max-level", max_level, "Maximum difficulty (1-5)")->check(CLI::Range(1, 5));
  ingest->add_option("--max-malformed", max_malformed, "Malformed records tolerated");
  ingest->add_option("--olympiad-subset", subset, "OlympiadBench subset to keep");

  EndpointFlags teacher_flags;
  std::string corpus_path;
  auto* distill_cmd = app.add_subcommand("distill", "Generate and grade teacher trajectories");
  add_common(distill_cmd, common);
  add_endpoint(distill_cmd, teacher_flags, "teacher");
  distill_cmd->add_option("--corpus", corpus_path, "Corpus file (default: <out>/corpus.jsonl)");

  std::string trajectories;
  auto* partition_cmd = app.add_subcommand("partition", "Split trajectories into all / correct / incorrect sets");
  add_common(partition_cmd, common);
  partition_cmd->add_option("--trajectories", trajectories, "Trajectory file (default: <out>/trajectories.jsonl)");

  std::vector<std::string> variants;
  auto* emit_sft_cmd = app.add_subcommand("emit-sft", "Write SFT JSONL for one or more variants");
  add_common(emit_sft_cmd, common);
  emit_sft_cmd->add_option("--trajectories", trajectories, "Trajectory file (default: <out>/trajectories.jsonl)");
  emit_sft_cmd->add_option("--variant", variants, "w2sr, w2sr_p or w2sr_n (repeatable)")
      ->required()
      ->check(CLI::IsMember({"w2sr", "w2sr_p", "w2sr_n", "w2sr-p", "w2sr-n"}));

  std::string preset, dataset;
  std::optional<double> lr;
  std::optional<int> epochs;
  auto* emit_config_cmd = app.add_subcommand("emit-config", "Write the key=value training config");
  add_common(emit_config_cmd, common);
  emit_config_cmd->add_option("--preset", preset, "default, epochs5 or epochs10");
  emit_config_cmd->add_option("--dataset", dataset, "SFT dataset path recorded in the config");
  emit_config_cmd->add_option("--learning-rate", lr, "Learning rate override");
  emit_config_cmd->add_option("--epochs", epochs, "Epoch override");

  EndpointFlags student_flags;
  std::optional<int> k_samples;
  auto* eval_cmd = app.add_subcommand("eval", "Sample the student, grade, and tally");
  add_common(eval_cmd, common);
  add_endpoint(eval_cmd, student_flags, "student");
  eval_cmd->add_option("--corpus", corpus_path, "Corpus file (default: <out>/corpus.jsonl)");
  eval_cmd->add_option("-k,--samples", k_samples, "Samples per problem")->check(CLI::PositiveNumber);

  auto* metrics = app.add_subcommand("metrics", "Pass@k, RGR and length statistics");
  metrics->require_subcommand(1);
  std::string tallies_path;
  long long k = 1;
  auto* pass_cmd = metrics->add_subcommand("pass-at-k", "Pass@k over a tally file");
  add_common(pass_cmd, common);
  pass_cmd->add_option("--tallies", tallies_path, "JSONL {problem_id, n, c}")->required()->check(CLI::ExistingFile);
  pass_cmd->add_option("-k,--k", k, "k")->check(CLI::PositiveNumber);
  double weak = 0, w2s = 0, strong = 0;
  auto* rgr_cmd = metrics->add_subcommand("rgr", "Reasoning Gap Recovered from three Pass@1 percentages");
  add_common(rgr_cmd, common);
  rgr_cmd->add_option("--weak", weak, "Weak teacher Pass@1 (%)")->required();
  rgr_cmd->add_option("--w2s", w2s, "Weak-to-strong student Pass@1 (%)")->required();
  rgr_cmd->add_option("--strong", strong, "RL-trained student Pass@1 (%)")->required();
  std::string generations_path;
  auto* lengths_cmd = metrics->add_subcommand("lengths", "Mean response length");
  add_common(lengths_cmd, common);
  lengths_cmd->add_option("--generations", generations_path, "GenerationResult JSONL");

  std::string rows_path;
  auto* report_cmd = app.add_subcommand("report", "Render report.md and report.csv");
  add_common(report_cmd, common);
  report_cmd->add_option("--rows", rows_path, "JSONL {benchmark, method, pass_at_1, weak?, strong?, rgr?, mean_length?}")
      ->required()
      ->check(CLI::ExistingFile);

  std::string script, host = "127.0.0.1", log_path, ready_file;
  int port = 8089;
  auto* mock_cmd = app.add_subcommand("mock-serve", "Serve a response script until interrupted");
  mock_cmd->add_option("--script", script, "Response script JSONL")->required()->check(CLI::ExistingFile);
  mock_cmd->add_option("--port", port, "Port (0 picks a free one)");
  mock_cmd->add_option("--host", host, "Bind address");
  mock_cmd->add_option("--log", log_path, "Request log written on shutdown");
  mock_cmd->add_option("--ready-file", ready_file, "Written with the base URL once listening");

  std::string manifest_path;
  auto* replay_cmd = app.add_subcommand("replay", "Rerun a recorded subcommand and compare its outputs");
  replay_cmd->add_option("manifest", manifest_path, "Manifest JSON")->required()->check(CLI::ExistingFile);

  std::vector<const char*> argv{"w2sr"};
  for (const auto& a : args_) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out_, err_);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out_, err_);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out_, err_);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out_, err_);
    return kExitUsage;
  }

  try {
    if (ingest->parsed()) return cmd_ingest(common, input, adapter, min_level, max_level, max_malformed, subset);
    if (distill_cmd->parsed()) return cmd_distill(common, teacher_flags, corpus_path);
    if (partition_cmd->parsed()) return cmd_partition(common, trajectories);
    if (emit_sft_cmd->parsed()) return cmd_emit_sft(common, trajectories, variants);
    if (emit_config_cmd->parsed()) return cmd_emit_config(common, preset, dataset, lr, epochs);
    if (eval_cmd->parsed()) return cmd_eval(common, student_flags, corpus_path, k_samples);
    if (pass_cmd->parsed()) return cmd_pass_at_k(common, tallies_path, k);
    if (rgr_cmd->parsed()) return cmd_rgr(common, weak, w2s, strong);
    if (lengths_cmd->parsed()) return cmd_lengths(common, generations_path);
    if (report_cmd->parsed()) return cmd_report(common, rows_path);
    if (mock_cmd->parsed()) return cmd_mock_serve(script, port, host, log_path, ready_file);
    if (replay_cmd->parsed()) return cmd_replay(manifest_path);
  } catch (const ValidationError& e) {
    err_ << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const IoError& e) {
    err_ << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const json::exception& e) {
    err_ << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    err_ << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  err_ << app.help();
  return kExitUsage;
}

}  // namespace

ProjectConfig ProjectConfig::from_json(const json& j, const fs::path& base_dir) {
  ProjectConfig c;
  if (j.contains("output_dir")) c.output_dir = resolve(base_dir, j["output_dir"].get<std::string>());
  c.seed = j.value("seed", c.seed);
  for (const auto& src : j.value("corpora", json::array())) {
    CorpusSource s;
    s.path = resolve(base_dir, src.at("path").get<std::string>());
    s.adapter = adapter_from_string(src.value("adapter", "generic_jsonl"));
    s.name = src.value("name", s.path.stem().string());
    if (src.contains("min_level")) s.min_level = src["min_level"].get<int>();
    if (src.contains("max_level")) s.max_level = src["max_level"].get<int>();
    s.load.max_malformed = src.value("max_malformed", std::size_t{0});
    if (src.contains("olympiad_subset")) s.load.olympiad_subset = src["olympiad_subset"].get<std::string>();
    c.corpora.push_back(std::move(s));
  }
  if (j.contains("teacher")) c.teacher = EndpointConfig::from_json(j["teacher"]);
  if (j.contains("student")) c.student = EndpointConfig::from_json(j["student"]);
  if (j.contains("profiles")) {
    const json& p = j["profiles"];
    if (p.contains("distill")) c.distill_profile.apply_overrides(p["distill"]);
    if (p.contains("eval")) c.eval_profile.apply_overrides(p["eval"]);
  }
  if (j.contains("templates")) {
    const json& t = j["templates"];
    c.teacher_template = t.value("teacher", c.teacher_template);
    c.student_template = t.value("student", c.student_template);
    c.strict_templates = t.value("strict", false);
    if (t.contains("dir")) c.template_dir = resolve(base_dir, t["dir"].get<std::string>());
  }
  if (j.contains("training")) {
    const json& t = j["training"];
    c.training = TrainingConfig::preset(t.value("preset", "default"));
    c.training.learning_rate = t.value("learning_rate", c.training.learning_rate);
    c.training.epochs = t.value("epochs", c.training.epochs);
    c.training.global_batch_size = t.value("global_batch_size", c.training.global_batch_size);
    c.training.optimizer = t.value("optimizer", c.training.optimizer);
    c.training.lr_scheduler = t.value("lr_scheduler", c.training.lr_scheduler);
    c.training.max_seq_len = t.value("max_seq_len", c.training.max_seq_len);
  }
  c.training.seed = c.seed;
  return c;
}

ProjectConfig ProjectConfig::load(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ValidationError("config " + path.string() + ": " + e.what());
  }
  return from_json(j, path.parent_path());
}

void ProjectConfig::validate() const {
  for (const auto& c : corpora) {
    if (!fs::exists(c.path)) throw ValidationError("config: corpus file not found: " + c.path.string());
  }
  if (template_dir && !fs::is_directory(*template_dir)) {
    throw ValidationError("config: template dir not found: " + template_dir->string());
  }
  distill_profile.validate();
  eval_profile.validate();
  training.validate();
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  return Runner(args, out, err).run();
}

}  // namespace w2sr
