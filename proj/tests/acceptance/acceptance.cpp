// Acceptance gate: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "seqslu/annotation.hpp"
#include "seqslu/checkpoint.hpp"
#include "seqslu/cli.hpp"
#include "seqslu/ctc.hpp"
#include "seqslu/evaluation.hpp"
#include "seqslu/gradient_suite.hpp"
#include "seqslu/models.hpp"
#include "seqslu/ops.hpp"
#include "seqslu/training.hpp"

using namespace seqslu;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof(buf), f, ap);
  va_end(ap);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path work_dir() {
  const char* env = std::getenv("SEQSLU_ACCEPTANCE_DIR");
  fs::path p = env ? fs::path(env) : fs::temp_directory_path() / "seqslu_acceptance";
  fs::create_directories(p);
  return p;
}

// The bundled corpus: generator seed 7, 200 dialogs.
const Manifest& bundled_corpus() {
  static const Manifest m = [] {
    const fs::path dir = work_dir() / "corpus";
    fs::remove_all(dir);
    return generate_corpus(7, 200, dir);
  }();
  return m;
}

void log_line(const std::string& s) { std::cerr << "  " << s << "\n"; }

// 1. CTC against exhaustive alignment enumeration.
Outcome ctc_oracle() {
  const auto t0 = Clock::now();
  Rng rng(20240101);
  double worst = 0.0;
  for (int i = 0; i < 500; ++i) {
    const int64_t frames = rng.uniform_int(1, 6);
    const int64_t labels = rng.uniform_int(1, 3);
    const int64_t width = labels + 2;
    Tensor<double> x({frames, width});
    for (auto& v : x.values()) v = rng.uniform(-3.0, 3.0);
    const Tensor<double> lp = log_softmax(constant(x)).value();
    std::vector<int> target;
    do {
      target.clear();
      const int64_t len = rng.uniform_int(0, 3);
      for (int64_t k = 0; k < len; ++k) target.push_back(static_cast<int>(rng.uniform_int(2, width - 1)));
    } while (ctc_min_frames(target) > frames);
    worst = std::max(worst, std::abs(ctc_loss(lp, target).loss - oracle::ctc_brute_force(lp, target)));
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-8 && secs < 10.0, fmt("500 instances, max |loss - brute force| = %.2e, %.2f s", worst, secs)};
}

// 2. Finite-difference gradient suite.
Outcome gradient_suite() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::vector<std::string> failed;
  const auto cases = run_gradient_suite(20, 1, [&](const GradientCase& c) {
    worst = std::max(worst, c.report.max_rel_error);
    if (!c.report.pass) failed.push_back(c.name);
  });
  const double secs = seconds_since(t0);
  std::set<std::string> names;
  for (const auto& c : cases) names.insert(c.name);
  std::string detail = fmt("%zu cases x 20 seeds, max relative error %.2e, %.1f s", names.size(), worst, secs);
  if (!failed.empty()) detail += ", failing: " + failed.front();
  return {failed.empty() && secs < 120.0, detail};
}

// 3. Parameter budget of the default configuration.
Outcome parameter_budget() {
  const ModelConfig cfg;
  int64_t largest = 0;
  for (SluVariant v : {SluVariant::kBase, SluVariant::kTune, SluVariant::kXt}) {
    largest = std::max(largest, count_params(cfg, StageKind::kSlu, v));
  }
  const int64_t xt = count_params(cfg, StageKind::kSlu, SluVariant::kXt);
  return {largest < 9800000 && xt == 9026624,
          fmt("largest stage (slu xt) has %lld parameters, golden 9026624, limit 9800000",
              static_cast<long long>(largest))};
}

// 4. Overfitting 20 utterances: basic chars, then the sequential model on top.
Outcome synthetic_overfit() {
  const auto t0 = Clock::now();
  Manifest small;
  small.dir = bundled_corpus().dir;
  small.train.assign(bundled_corpus().train.begin(), bundled_corpus().train.begin() + 20);
  const PreparedData data = prepare_data(small);
  ModelConfig cfg;
  data.vocabs.apply_sizes(cfg);
  TrainSchedule sched;
  sched.total_epochs = 200;

  Stage<float> basic(cfg, StageKind::kBasic, SluVariant::kBase, 11);
  const StageResult rb = train_stage(basic, data.train, {}, data.vocabs, data.stats, sched, 12);
  int first_ok = -1;
  for (const auto& m : rb.metrics)
    if (first_ok < 0 && m.dev_error <= 5.0) first_ok = m.epoch;
  const double basic_best = rb.metrics.back().best_dev_error;
  log_line(fmt("basic: best train CER %.2f at epoch %d, first <= 5%% at epoch %d, %.0f s", basic_best, rb.best_epoch,
               first_ok, seconds_since(t0)));

  Stage<float> seq = derive_stage(basic, StageKind::kSequential, SluVariant::kBase, 13);
  const StageResult rs = train_stage(seq, data.train, {}, data.vocabs, data.stats, sched, 14);
  const double seq_best = rs.metrics.back().best_dev_error;
  const double secs = seconds_since(t0);
  log_line(fmt("sequential: best train CER %.2f at epoch %d, %.0f s", seq_best, rs.best_epoch, secs));
  return {basic_best <= 5.0 && seq_best <= basic_best && secs < 600.0,
          fmt("20 utterances: basic CER %.2f%% (<= 5%% from epoch %d), sequential %.2f%%, %.0f s", basic_best,
              first_ok, seq_best, secs)};
}

// 5. Incremental chain against the same chain trained from scratch.
Outcome incremental_vs_scratch() {
  const auto t0 = Clock::now();
  const Manifest& corpus = bundled_corpus();
  ModelConfig cfg;
  cfg.lstm_hidden = 128;
  cfg.dec_embed = 64;
  cfg.dec_hidden = 128;
  TrainSchedule sched;
  sched.total_epochs = 10;
  sched.curriculum_switch_epoch = 5;
  StagePlan plan;
  plan.stages = {StageKind::kBasic, StageKind::kSequential, StageKind::kBasicTwoStage, StageKind::kTwoStage};

  const PipelineResult inc = run_pipeline(plan, corpus, cfg, sched, 1, work_dir() / "incremental", log_line);
  plan.no_incremental = true;
  const PipelineResult scratch = run_pipeline(plan, corpus, cfg, sched, 1, work_dir() / "scratch", log_line);
  const double wer_inc = inc.stages.back().metrics.back().best_dev_error;
  const double wer_scratch = scratch.stages.back().metrics.back().best_dev_error;
  const double secs = seconds_since(t0);
  return {wer_inc <= wer_scratch && secs < 3600.0,
          fmt("2-stage dev WER incremental %.2f%% vs from scratch %.2f%% (4 stages x %d epochs each), %.0f s",
              wer_inc, wer_scratch, sched.total_epochs, secs)};
}

// 6. Corpus scorers against an exhaustive edit-distance recursion.
Outcome scorer_oracle() {
  Rng rng(6);
  int mismatches = 0;
  auto seq = [&](int max_len) {
    std::vector<std::string> s;
    const int64_t n = rng.uniform_int(0, max_len);
    for (int64_t i = 0; i < n; ++i) s.push_back(std::string(1, static_cast<char>('a' + rng.uniform_int(0, 4))));
    return s;
  };
  for (int i = 0; i < 200; ++i) {
    std::vector<std::string> hyp = seq(8), ref = seq(8);
    if (ref.empty()) ref.push_back("a");
    const std::vector<std::vector<std::string>> h{hyp}, r{ref};
    const double expected = oracle::pooled_rate(h, r);
    if (levenshtein(hyp, ref).errors() != oracle::edit_cost(hyp, ref)) ++mismatches;
    if (wer(h, r) != expected || cer(h, r) != expected) ++mismatches;
  }
  return {mismatches == 0, fmt("200 random pairs, %d mismatches with the brute-force recursion", mismatches)};
}

// 7. Annotation format round trip and concept extraction.
Outcome format_round_trip() {
  Rng rng(7);
  const Grammar& g = hotel_grammar();
  std::vector<std::string> labels;
  for (const auto& c : g.concepts)
    if (c != kNullConcept) labels.push_back(c);
  int failures = 0;
  for (int i = 0; i < 1000; ++i) {
    Annotation a;
    const int64_t chunks = rng.uniform_int(0, 6);
    for (int64_t c = 0; c < chunks; ++c) {
      ConceptChunk chunk;
      const bool is_null = rng.bernoulli(0.4);
      const int64_t len = is_null ? 1 : rng.uniform_int(1, 3);
      for (int64_t k = 0; k < len; ++k) chunk.tokens.push_back(g.tokens[rng.uniform_int(g.tokens.size())]);
      if (!is_null) chunk.label = labels[rng.uniform_int(labels.size())];
      a.transcript.insert(a.transcript.end(), chunk.tokens.begin(), chunk.tokens.end());
      a.chunks.push_back(chunk);
    }
    const std::string s = serialize_annotation(a);
    if (!(parse_annotation(s) == a)) ++failures;
    if (extract_concepts(split_whitespace(s)) != concept_labels(a.chunks)) ++failures;
  }
  return {failures == 0, fmt("1000 random annotations, %d failures", failures)};
}

// 8. Hand-traced schedules.
Outcome schedule_traces() {
  const TrainSchedule s;
  std::vector<std::string> bad;
  const double lr_expected[][2] = {{0, 0.0005}, {30, 0.00025}, {45, 0.000125}, {60, 0.0}, {90, 0.0}};
  for (const auto& [e, lr] : lr_expected)
    if (std::abs(lr_at_epoch(static_cast<int>(e), s) - lr) > 1e-15) bad.push_back(fmt("lr@%g", e));

  // Warmup epochs 0-4 are predicted, epoch 5 switches to gold; then
  // 30, 29, 29.5, 29.4 leaves two misses after the best 29 and toggles.
  const std::vector<double> h{40, 38, 36, 34, 32, 30, 29, 29.5, 29.4, 29.6, 29.7, 28};
  const char* expected = "PPPPPGGGGPPGG";
  for (int e = 0; e <= 12; ++e) {
    const char got = feedback_mode(e, h, s) == Feedback::kGold ? 'G' : 'P';
    if (got != expected[e]) bad.push_back(fmt("feedback@%d", e));
  }

  TrainSchedule cs;
  cs.curriculum_switch_epoch = 2;
  const std::vector<CurriculumItem> items{{"d2_t1", "d2", 1, 40}, {"d1_t0", "d1", 0, 70}, {"d2_t0", "d2", 0, 10},
                                          {"d1_t1", "d1", 1, 40}, {"d3_t0", "d3", 0, 25}};
  if (curriculum_order(items, 0, cs, 1) != std::vector<size_t>{2, 4, 3, 0, 1}) bad.push_back("curriculum@0");
  if (curriculum_order(items, 2, cs, 1) != std::vector<size_t>{2, 0, 1, 3, 4}) bad.push_back("curriculum@2");
  cs.no_curriculum = true;
  if (curriculum_order(items, 3, cs, 5) != curriculum_order(items, 3, cs, 5)) bad.push_back("shuffle");

  std::string detail = "lr 5 points, feedback 13 epochs, curriculum 3 orders";
  for (const auto& b : bad) detail += ", mismatch " + b;
  return {bad.empty(), detail};
}

// 9. Two identical training commands give byte-identical outputs.
Outcome determinism() {
  const fs::path corpus = work_dir() / "det_corpus";
  fs::remove_all(corpus);
  generate_corpus(11, 10, corpus);
  auto train = [&](const std::string& name) {
    const fs::path out = work_dir() / name;
    fs::remove_all(out);
    std::ostringstream o, e;
    const int code = run_cli({"seqslu", "train", "--manifest", corpus.string(), "--out", out.string(), "--seed", "3",
                              "--set", "stages=basic,sequential,basic_two_stage,two_stage,slu", "--variant", "xt",
                              "--set", "lstm_hidden=32", "--set", "dec_embed=16", "--set", "dec_hidden=32", "--set",
                              "concept_dec_embed=16", "--set", "concept_dec_hidden=32", "--set", "total_epochs=2"},
                             o, e);
    return std::make_pair(code, out);
  };
  const auto [ca, a] = train("det_a");
  const auto [cb, b] = train("det_b");
  if (ca != kExitOk || cb != kExitOk) return {false, fmt("train exit codes %d, %d", ca, cb)};
  int files = 0, differing = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    const std::string name = e.path().filename().string();
    if (name != "model.ckpt" && name != "metrics.csv") continue;
    ++files;
    if (slurp(e.path()) != slurp(b / fs::relative(e.path(), a))) ++differing;
  }
  return {files == 10 && differing == 0, fmt("%d checkpoint and metrics files compared, %d differ", files, differing)};
}

}  // namespace

int main(int argc, char** argv) {
  ::setenv("SEQSLU_LOG", "quiet", 0);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"ctc_oracle", ctc_oracle},
      {"gradient_suite", gradient_suite},
      {"parameter_budget", parameter_budget},
      {"synthetic_overfit", synthetic_overfit},
      {"incremental_vs_scratch", incremental_vs_scratch},
      {"scorer_oracle", scorer_oracle},
      {"format_round_trip", format_round_trip},
      {"schedule_traces", schedule_traces},
      {"determinism", determinism},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << id << "] " << criteria[i].first << ": " << o.detail
              << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
