#include "seqslu/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "seqslu/annotation.hpp"
#include "seqslu/checkpoint.hpp"
#include "seqslu/config.hpp"
#include "seqslu/corpus.hpp"
#include "seqslu/errors.hpp"
#include "seqslu/evaluation.hpp"
#include "seqslu/gradient_suite.hpp"
#include "seqslu/training.hpp"

namespace seqslu {
namespace {

namespace fs = std::filesystem;

struct Streams {
  std::ostream& out;
  std::ostream& err;
  bool quiet = false;

  void log(const std::string& msg) const {
    if (!quiet) err << msg << std::endl;
  }
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path.string());
  f << text;
}

void apply_overrides(RunConfig& cfg, const std::vector<std::string>& sets) {
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + s + "'");
    apply_setting(cfg, s.substr(0, eq), s.substr(eq + 1));
  }
}

std::string format_hypothesis(VocabLevel level, const std::vector<std::string>& symbols) {
  return level == VocabLevel::kChars ? join(symbols, "") : join(symbols, " ");
}

struct GenArgs {
  uint64_t seed = 7;
  int dialogs = 200;
  std::string out;
};

int cmd_gen_data(const GenArgs& a, const Streams& io) {
  if (a.dialogs < 1) throw std::invalid_argument("gen-data: --dialogs must be at least 1");
  const Manifest m = generate_corpus(a.seed, a.dialogs, a.out);
  write_text(fs::path(a.out) / "run_config.txt",
             "seed = " + std::to_string(a.seed) + "\ndialogs = " + std::to_string(a.dialogs) + "\n");
  io.out << "wrote " << m.train.size() << " train, " << m.dev.size() << " dev, " << m.test.size()
         << " test utterances to " << a.out << "\n";
  return kExitOk;
}

struct TrainArgs {
  std::string stage = "all";
  std::string manifest;
  std::string config;
  std::string out;
  std::string init;
  std::optional<std::string> variant;
  std::optional<uint64_t> seed;
  bool no_incremental = false;
  bool no_curriculum = false;
  std::vector<std::string> sets;
};

int cmd_train(const TrainArgs& a, const Streams& io) {
  RunConfig cfg;
  if (!a.config.empty()) load_config_file(a.config, cfg);
  if (a.stage != "all") cfg.plan.stages = {parse_stage_kind(a.stage)};
  if (!a.manifest.empty()) cfg.manifest = a.manifest;
  if (!a.out.empty()) cfg.out = a.out;
  if (!a.init.empty()) cfg.plan.init_checkpoint = a.init;
  if (a.variant) cfg.plan.variant = parse_slu_variant(*a.variant);
  if (a.seed) cfg.seed = *a.seed;
  if (a.no_incremental) cfg.plan.no_incremental = true;
  if (a.no_curriculum) cfg.schedule.no_curriculum = true;
  apply_overrides(cfg, a.sets);
  if (cfg.manifest.empty()) throw std::invalid_argument("train: --manifest is required");
  if (cfg.out.empty()) throw std::invalid_argument("train: --out is required");
  cfg.model.validate();
  cfg.schedule.validate();

  fs::create_directories(cfg.out);
  const std::string snapshot = serialize_config(cfg);
  write_text(fs::path(cfg.out) / "run_config.txt", snapshot);
  const Manifest data = read_corpus(cfg.manifest);
  const PipelineResult r = run_pipeline(cfg.plan, data, cfg.model, cfg.schedule, cfg.seed, cfg.out,
                                        [&](const std::string& m) { io.log(m); });
  for (size_t k = 0; k < r.checkpoints.size(); ++k) {
    write_text(r.checkpoints[k].parent_path() / "run_config.txt", snapshot);
    const StageResult& s = r.stages[k];
    io.out << r.checkpoints[k].string() << " best_epoch=" << s.best_epoch
           << " best_dev_error=" << s.metrics[static_cast<size_t>(s.best_epoch)].dev_error << "\n";
  }
  return kExitOk;
}

struct DecodeArgs {
  std::string checkpoint, manifest, out;
};

int cmd_decode(const DecodeArgs& a, const Streams& io) {
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  const Stage<float> stage = restore_stage(ck);
  const std::vector<Utterance> utts = read_manifest(a.manifest);
  if (ck.stats.mean.size() != static_cast<size_t>(ck.config.spec_dim)) {
    throw DataError(a.checkpoint + ": feature statistics do not match the model input size");
  }
  const std::vector<Example> examples =
      make_examples(utts, load_features(utts, fs::path(a.manifest).parent_path()), ck.stats, ck.vocabs);

  std::ofstream f(a.out, std::ios::binary);
  if (!f) throw DataError("cannot write " + a.out);
  for (const auto& ex : examples) {
    nlohmann::ordered_json j;
    j["id"] = ex.id;
    j["hypothesis"] = format_hypothesis(stage.level(), decode_symbols(stage, ck.vocabs, ex));
    if (stage.has_concept_decoder()) j["concepts"] = decode_concepts(stage, ck.vocabs, ex);
    f << j.dump() << "\n";
  }
  io.log("decoded " + std::to_string(examples.size()) + " utterances");
  return kExitOk;
}

struct EvalArgs {
  std::string hyp, ref_manifest, metric = "wer", out;
};

int cmd_eval(const EvalArgs& a, const Streams& io) {
  if (a.metric != "wer" && a.metric != "cer") {
    throw std::invalid_argument("eval: unknown metric '" + a.metric + "' (expected wer or cer)");
  }
  struct Hyp {
    std::string text;
    std::optional<std::vector<std::string>> concepts;
  };
  std::map<std::string, Hyp> hyps;
  std::ifstream in(a.hyp, std::ios::binary);
  if (!in) throw DataError("cannot open hypotheses " + a.hyp);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (split_whitespace(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      Hyp h{j.at("hypothesis").get<std::string>(), std::nullopt};
      if (j.contains("concepts")) h.concepts = j.at("concepts").get<std::vector<std::string>>();
      hyps[j.at("id").get<std::string>()] = std::move(h);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(a.hyp + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }

  std::vector<ScoredItem> items;
  for (const auto& u : read_manifest(a.ref_manifest)) {
    ScoredItem it{u.id, {}, {}};
    auto h = hyps.find(u.id);
    if (a.metric == "wer") {
      it.ref = u.transcript;
      if (h != hyps.end()) it.hyp = split_whitespace(h->second.text);
    } else {
      it.ref = concept_labels(u.chunks);
      if (h != hyps.end()) {
        it.hyp = h->second.concepts ? *h->second.concepts : extract_concepts(split_whitespace(h->second.text));
      }
    }
    items.push_back(std::move(it));
  }
  const auto report = score_report(a.metric, items);
  if (!a.out.empty()) write_text(a.out, report.dump(2) + "\n");
  io.out << report.dump(2) << "\n";
  io.log(a.metric + " = " + report.at("corpus_rate").dump());
  return kExitOk;
}

struct GradArgs {
  int seeds = 20;
  uint64_t seed = 1;
  std::vector<std::string> cases;
};

int cmd_gradcheck(const GradArgs& a, const Streams& io) {
  if (a.seeds < 1) throw std::invalid_argument("gradcheck: --seeds must be at least 1");
  std::vector<std::string> names = a.cases.empty() ? gradient_case_names() : a.cases;
  bool all_pass = true;
  for (const auto& name : names) {
    double worst = 0.0;
    size_t skipped = 0;
    bool pass = true;
    for (int s = 0; s < a.seeds; ++s) {
      const GradientCase c = run_gradient_case(name, derive_seed(a.seed, static_cast<uint64_t>(s)));
      worst = std::max(worst, c.report.max_rel_error);
      skipped += c.report.skipped;
      pass = pass && c.report.pass;
    }
    all_pass = all_pass && pass;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-32s seeds=%d max_rel_error=%.3e skipped=%zu %s", name.c_str(), a.seeds,
                  worst, skipped, pass ? "PASS" : "FAIL");
    io.out << buf << "\n";
  }
  return all_pass ? kExitOk : kExitNumerical;
}

struct ParamsArgs {
  std::string config;
  std::string manifest;
  std::vector<std::string> sets;
};

int cmd_params(const ParamsArgs& a, const Streams& io) {
  RunConfig cfg;
  if (!a.config.empty()) load_config_file(a.config, cfg);
  apply_overrides(cfg, a.sets);
  if (!a.manifest.empty()) build_vocabs(read_corpus(a.manifest).train).apply_sizes(cfg.model);
  const ModelConfig& m = cfg.model;
  const std::pair<std::string, int64_t> rows[] = {
      {"basic", count_params(m, StageKind::kBasic)},
      {"sequential", count_params(m, StageKind::kSequential)},
      {"basic_two_stage", count_params(m, StageKind::kBasicTwoStage)},
      {"two_stage", count_params(m, StageKind::kTwoStage)},
      {"slu_base", count_params(m, StageKind::kSlu, SluVariant::kBase)},
      {"slu_tune", count_params(m, StageKind::kSlu, SluVariant::kTune)},
      {"slu_xt", count_params(m, StageKind::kSlu, SluVariant::kXt)},
  };
  for (const auto& [name, n] : rows) io.out << name << " " << n << "\n";
  return kExitOk;
}

int cmd_validate(const std::string& manifest, const Streams& io) {
  std::vector<fs::path> files;
  if (fs::is_directory(manifest)) {
    for (const char* split : {"train", "dev", "test"}) {
      if (fs::exists(fs::path(manifest) / (std::string(split) + ".jsonl"))) {
        files.push_back(fs::path(manifest) / (std::string(split) + ".jsonl"));
      }
    }
    if (files.empty()) throw DataError("no manifests in " + manifest);
  } else {
    files.emplace_back(manifest);
  }
  size_t problems = 0;
  for (const auto& f : files) {
    const auto p = validate_manifest(f);
    for (const auto& msg : p) io.out << f.string() << ": " << msg << "\n";
    problems += p.size();
    if (p.empty()) io.out << f.string() << ": ok\n";
  }
  return problems == 0 ? kExitOk : kExitData;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  const char* level = std::getenv("SEQSLU_LOG");
  Streams io{out, err, level != nullptr && std::string(level) == "quiet"};

  CLI::App app{"End-to-end spoken language understanding on raw audio", "seqslu"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate the synthetic hotel-reservation corpus");
  gen_cmd->add_option("--seed", gen.seed, "Corpus seed")->capture_default_str();
  gen_cmd->add_option("--dialogs", gen.dialogs, "Number of dialogs")->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train one stage or the whole incremental chain");
  train_cmd->add_option("--stage", train.stage, "all, basic, sequential, basic_two_stage, two_stage or slu")
      ->capture_default_str();
  train_cmd->add_option("--manifest", train.manifest, "Corpus directory or train.jsonl");
  train_cmd->add_option("--config", train.config, "key = value configuration file");
  train_cmd->add_option("--out", train.out, "Output directory");
  train_cmd->add_option("--init", train.init, "Trained predecessor checkpoint for a single stacked stage");
  train_cmd->add_option("--variant", train.variant, "SLU variant: base, tune or xt");
  train_cmd->add_option("--seed", train.seed, "Run seed");
  train_cmd->add_flag("--no-incremental", train.no_incremental, "Start every stage from random parameters");
  train_cmd->add_flag("--no-curriculum", train.no_curriculum, "Shuffle utterances instead of sorting by length");
  train_cmd->add_option("--set", train.sets, "Override a configuration key (key=value)");

  DecodeArgs dec;
  auto* dec_cmd = app.add_subcommand("decode", "Greedy decoding of a manifest");
  dec_cmd->add_option("--checkpoint", dec.checkpoint)->required();
  dec_cmd->add_option("--manifest", dec.manifest)->required();
  dec_cmd->add_option("--out", dec.out, "JSON-lines hypotheses")->required();

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Score hypotheses against a manifest");
  eval_cmd->add_option("--hyp", ev.hyp)->required();
  eval_cmd->add_option("--ref-manifest", ev.ref_manifest)->required();
  eval_cmd->add_option("--metric", ev.metric, "wer or cer")->capture_default_str();
  eval_cmd->add_option("--out", ev.out, "Also write the report here");

  GradArgs grad;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every layer and stage");
  grad_cmd->add_option("--seeds", grad.seeds)->capture_default_str();
  grad_cmd->add_option("--seed", grad.seed)->capture_default_str();
  grad_cmd->add_option("--case", grad.cases, "Restrict to these cases");

  ParamsArgs params;
  auto* params_cmd = app.add_subcommand("params", "Parameter counts of every stage kind");
  params_cmd->add_option("--config", params.config);
  params_cmd->add_option("--manifest", params.manifest, "Take vocabulary sizes from this corpus");
  params_cmd->add_option("--set", params.sets);

  std::string validate_path;
  auto* val_cmd = app.add_subcommand("validate", "Check a manifest and its audio");
  val_cmd->add_option("--manifest", validate_path)->required();

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    if (!rev.empty()) rev.pop_back();  // program name
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen_cmd) return cmd_gen_data(gen, io);
    if (*train_cmd) return cmd_train(train, io);
    if (*dec_cmd) return cmd_decode(dec, io);
    if (*eval_cmd) return cmd_eval(ev, io);
    if (*grad_cmd) return cmd_gradcheck(grad, io);
    if (*params_cmd) return cmd_params(params, io);
    if (*val_cmd) return cmd_validate(validate_path, io);
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace seqslu
