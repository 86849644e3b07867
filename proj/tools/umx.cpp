// umx: unified-memory side-channel toolkit.
//
// Pipeline: gen-models -> simulate -> score / train -> extract -> eval/bench.
// Every command echoes the resolved config digest; identical inputs, config
// and seed reproduce identical output files.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "umx/config.hpp"
#include "umx/evaluate.hpp"
#include "umx/extract.hpp"
#include "umx/stats.hpp"

namespace fs = std::filesystem;
using namespace umx;

namespace {

// Files created by the running command; removed if it fails so no partial
// outputs survive.
std::vector<fs::path> g_created;

void note_created(const fs::path& p) { g_created.push_back(p); }

void cleanup_partial() {
  for (const auto& p : g_created) {
    std::error_code ec;
    fs::remove(p, ec);
  }
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot open for write: " + path.string());
  note_created(path);
  out << content;
}

std::vector<fs::path> list_files(const std::string& dir, const std::string& ext) {
  if (!fs::is_directory(dir)) throw Error("not a directory: " + dir);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ext)
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  return files;
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

struct CommonOpts {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool noiseless = false;

  RunConfig resolve() const {
    RunConfig cfg;
    if (!config_path.empty()) cfg = load_run_config(config_path);
    if (seed_set) cfg.seed = seed;
    if (noiseless) cfg.noise = NoiseProfile::zero();
    return cfg;
  }
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool with_noiseless = false) {
  cmd->add_option("--config", opts.config_path, "run config JSON");
  auto* seed_opt = cmd->add_option("--seed", opts.seed, "root seed");
  seed_opt->each([&opts](const std::string&) { opts.seed_set = true; });
  if (with_noiseless)
    cmd->add_flag("--noiseless", opts.noiseless, "disable hint noise");
}

void echo_config(const RunConfig& cfg) {
  std::cout << "umx " << kVersion << " config " << config_digest(cfg) << "\n";
}

std::string csv_provenance(const RunConfig& cfg) {
  return "# umx " + std::string(kVersion) + " config " + config_digest(cfg) + "\n";
}

std::vector<Trace> load_trace_dir(const std::string& dir) {
  std::vector<Trace> traces;
  for (const auto& p : list_files(dir, ".jsonl")) traces.push_back(load_trace(p.string()));
  if (traces.empty()) throw Error("no .jsonl traces in " + dir);
  return traces;
}

int cmd_gen_models(const CommonOpts& common, int count, const std::string& out_dir) {
  RunConfig cfg = common.resolve();
  echo_config(cfg);
  fs::create_directories(out_dir);
  for (int i = 0; i < count; ++i) {
    const std::uint64_t child = rng::derive_seed(cfg.seed, "gen-models", static_cast<std::uint64_t>(i));
    const ModelSpec m = generate_random_model(cfg.corpus, child);
    const ValidationReport rep = validate_model(m);
    if (!rep.ok()) throw Error("generated model invalid:\n" + rep.to_string());
    char name[32];
    std::snprintf(name, sizeof(name), "model_%04d.json", i);
    write_file(fs::path(out_dir) / name, to_json(m).dump(2) + "\n");
  }
  std::cout << "wrote " << count << " models to " << out_dir << "\n";
  return 0;
}

int cmd_simulate(const CommonOpts& common, const std::string& model_path, int runs,
                 const std::string& out_dir) {
  RunConfig cfg = common.resolve();
  echo_config(cfg);
  const ModelSpec m = load_model(model_path);
  const ValidationReport rep = validate_model(m);
  if (!rep.ok()) throw ValidationError("model invalid:\n" + rep.to_string());
  const KernelSequence seq = lower_to_kernels(m);
  fs::create_directories(out_dir);
  for (int i = 0; i < runs; ++i) {
    const Trace tr = simulate_run(seq, cfg.mem, cfg.noise,
                                  rng::derive_seed(cfg.seed, "simulate", static_cast<std::uint64_t>(i)));
    char name[32];
    std::snprintf(name, sizeof(name), "trace_%04d.jsonl", i);
    write_file(fs::path(out_dir) / name, trace_to_string(tr));
  }
  std::cout << "wrote " << runs << " traces to " << out_dir << "\n";
  return 0;
}

int cmd_score(const CommonOpts& common, const std::string& trace_dir, const std::string& out_csv) {
  RunConfig cfg = common.resolve();
  echo_config(cfg);
  const std::vector<Trace> traces = load_trace_dir(trace_dir);
  if (traces.size() < 2) throw Error("need >= 2 runs to score consistency");
  const ArchESReport rep = score_report(traces);
  write_file(out_csv, csv_provenance(cfg) + archs_report_csv(rep));
  std::cout << "ranking:";
  for (Hint h : rep.ranking()) std::cout << " " << to_string(h);
  std::cout << "\n";
  return 0;
}

int cmd_train(const CommonOpts& common, const std::string& trace_dir, const std::string& hints,
              const std::string& out_ckpt, int epochs_override) {
  RunConfig cfg = common.resolve();
  if (common.seed_set) cfg.train.seed = common.seed;
  if (epochs_override >= 0) cfg.train.epochs = epochs_override;
  echo_config(cfg);
  const std::vector<Trace> corpus = load_trace_dir(trace_dir);
  const HintSet hs = hint_set(hints);
  TrainResult res = train_classifier(corpus, hs, cfg.train);
  if (out_ckpt.find('/') != std::string::npos)
    fs::create_directories(fs::path(out_ckpt).parent_path());
  note_created(out_ckpt);
  res.classifier.save(out_ckpt);
  std::printf("trained %s on %zu traces: final loss %.4f, token accuracy %.4f (%d held out)\n",
              hints.c_str(), corpus.size(), res.report.final_loss, res.report.token_accuracy,
              res.report.holdout_traces);
  return 0;
}

int cmd_extract(const CommonOpts& common, const std::string& trace_path, const std::string& ckpt,
                const std::string& out_json, const std::string& hints) {
  RunConfig cfg = common.resolve();
  echo_config(cfg);
  const SequenceClassifier clf = SequenceClassifier::load(ckpt);
  if (!hints.empty() && hints != clf.hints().id)
    throw HintMismatch("checkpoint was trained for " + clf.hints().id + ", requested " + hints);
  const Trace tr = load_trace(trace_path);
  const ExtractionResult res = extract(clf, tr);
  if (!out_json.empty()) write_file(out_json, to_json(res).dump(2) + "\n");
  std::cout << "predicted";
  for (LayerType t : res.sequence) std::cout << " " << to_string(t);
  std::cout << "\n";
  return 0;
}

std::vector<LayerType> sequence_from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  std::vector<LayerType> seq;
  if (j.is_object() && j.contains("sequence")) {  // extraction result
    for (const auto& t : j.at("sequence")) seq.push_back(layer_type_from_string(t.get<std::string>()));
  } else {  // model spec
    for (const auto& l : model_from_json(j).layers) seq.push_back(l.type);
  }
  return seq;
}

int cmd_eval(const CommonOpts& common, const std::string& pred_path, const std::string& truth_path) {
  RunConfig cfg = common.resolve();
  echo_config(cfg);
  const std::vector<LayerType> pred = sequence_from_file(pred_path);
  const std::vector<LayerType> truth = sequence_from_file(truth_path);
  std::printf("%g\n", lsa(pred, truth));
  return 0;
}

int cmd_bench(const CommonOpts& common, const std::string& models, const std::string& hints,
              const std::string& ckpt_dir, int runs, const std::string& out_prefix) {
  RunConfig cfg = common.resolve();
  echo_config(cfg);
  const std::vector<std::string> suite =
      models == "all" ? benchmark_names() : split_csv(models);
  const std::vector<std::string> sets = split_csv(hints);
  std::map<std::string, SequenceClassifier> clf;
  for (const auto& hs : sets) {
    const fs::path p = fs::path(ckpt_dir) / ("ckpt_" + hs + ".json");
    if (!fs::exists(p)) throw MissingCheckpoint("missing checkpoint: " + p.string());
    clf.emplace(hs, SequenceClassifier::load(p.string()));
  }
  const BenchmarkReport rep = run_benchmark(suite, sets, clf, runs, cfg.mem, cfg.noise, cfg.seed);
  write_file(out_prefix + "_runs.csv", csv_provenance(cfg) + benchmark_runs_csv(rep));
  write_file(out_prefix + "_summary.csv",
             csv_provenance(cfg) + benchmark_summary_csv(rep, suite));
  std::cout << benchmark_summary_csv(rep, suite);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"unified-memory DNN extraction toolkit"};
  app.require_subcommand(1);

  CommonOpts common;

  auto* gen = app.add_subcommand("gen-models", "generate a random model corpus");
  int gen_count = 10;
  std::string gen_out;
  gen->add_option("--count", gen_count, "number of models");
  gen->add_option("--out", gen_out, "output directory")->required();
  add_common(gen, common);

  auto* sim = app.add_subcommand("simulate", "simulate UM traces for a model");
  std::string sim_model, sim_out;
  int sim_runs = 10;
  sim->add_option("--model", sim_model, "model spec JSON")->required();
  sim->add_option("--runs", sim_runs, "number of runs");
  sim->add_option("--out", sim_out, "output directory")->required();
  add_common(sim, common, true);

  auto* score = app.add_subcommand("score", "rank hint effectiveness from traces");
  std::string score_traces, score_out;
  score->add_option("--traces", score_traces, "trace directory")->required();
  score->add_option("--out", score_out, "output CSV")->required();
  add_common(score, common);

  auto* train = app.add_subcommand("train", "train a sequence classifier");
  std::string train_traces, train_hints = "s5", train_out;
  int train_epochs = -1;
  train->add_option("--traces", train_traces, "corpus trace directory")->required();
  train->add_option("--hints", train_hints, "hint set id (s1..s5)");
  train->add_option("--out", train_out, "checkpoint path")->required();
  train->add_option("--epochs", train_epochs, "override epochs");
  add_common(train, common);

  auto* extract_cmd = app.add_subcommand("extract", "extract a layer sequence from a trace");
  std::string ex_trace, ex_ckpt, ex_out, ex_hints;
  extract_cmd->add_option("--trace", ex_trace, "trace JSONL")->required();
  extract_cmd->add_option("--ckpt", ex_ckpt, "classifier checkpoint")->required();
  extract_cmd->add_option("--out", ex_out, "result JSON");
  extract_cmd->add_option("--hints", ex_hints, "expected hint set (cross-check)");
  add_common(extract_cmd, common);

  auto* eval_cmd = app.add_subcommand("eval", "LSA of a prediction against ground truth");
  std::string ev_pred, ev_truth;
  eval_cmd->add_option("--pred", ev_pred, "extraction result or model JSON")->required();
  eval_cmd->add_option("--truth", ev_truth, "model JSON")->required();
  add_common(eval_cmd, common);

  auto* bench = app.add_subcommand("bench", "benchmark extraction across models and hint sets");
  std::string b_models = "all", b_hints = "s1,s2,s3,s4,s5", b_ckpts, b_out = "bench";
  int b_runs = 10;
  bench->add_option("--models", b_models, "comma list or 'all'");
  bench->add_option("--hints", b_hints, "comma list of hint sets");
  bench->add_option("--ckpt-dir", b_ckpts, "directory with ckpt_<hs>.json")->required();
  bench->add_option("--runs", b_runs, "runs per model");
  bench->add_option("--out", b_out, "output CSV prefix");
  add_common(bench, common, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) return cmd_gen_models(common, gen_count, gen_out);
    if (sim->parsed()) return cmd_simulate(common, sim_model, sim_runs, sim_out);
    if (score->parsed()) return cmd_score(common, score_traces, score_out);
    if (train->parsed()) return cmd_train(common, train_traces, train_hints, train_out, train_epochs);
    if (extract_cmd->parsed()) return cmd_extract(common, ex_trace, ex_ckpt, ex_out, ex_hints);
    if (eval_cmd->parsed()) return cmd_eval(common, ev_pred, ev_truth);
    if (bench->parsed()) return cmd_bench(common, b_models, b_hints, b_ckpts, b_runs, b_out);
  } catch (const std::exception& e) {
    cleanup_partial();
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
