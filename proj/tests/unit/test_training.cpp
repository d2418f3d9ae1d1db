#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "seqslu/checkpoint.hpp"
#include "seqslu/errors.hpp"
#include "seqslu/training.hpp"

using namespace seqslu;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ModelConfig small_config() {
  ModelConfig c;
  c.conv_channels = 8;
  c.lstm_layers = 1;
  c.lstm_hidden = 8;
  c.dec_embed = 4;
  c.dec_hidden = 8;
  c.concept_dec_embed = 4;
  c.concept_dec_hidden = 8;
  return c;
}

TrainSchedule short_schedule() {
  TrainSchedule s;
  s.total_epochs = 3;
  s.predicted_warmup_epochs = 1;
  s.curriculum_switch_epoch = 2;
  s.batch_size = 4;
  return s;
}

const Manifest& tiny_corpus() {
  static const Manifest m = [] {
    const fs::path dir = fs::temp_directory_path() / "seqslu_training_corpus";
    fs::remove_all(dir);
    return generate_corpus(5, 3, dir);
  }();
  return m;
}

}  // namespace

TEST(LearningRate, LinearDecayToZero) {
  const TrainSchedule s;
  EXPECT_DOUBLE_EQ(lr_at_epoch(0, s), 0.0005);
  EXPECT_DOUBLE_EQ(lr_at_epoch(30, s), 0.00025);
  EXPECT_DOUBLE_EQ(lr_at_epoch(60, s), 0.0);
  EXPECT_DOUBLE_EQ(lr_at_epoch(75, s), 0.0);
  for (int e = 1; e < 80; ++e) EXPECT_LE(lr_at_epoch(e, s), lr_at_epoch(e - 1, s));
}

TEST(Adam, ZeroGradientsLeaveEverythingAlone) {
  Tensor<double> p({3}, 1.5);
  Tensor<double> g({3}, 0.0);
  AdamState<double> st;
  adam_step<double>({&p}, {&g}, st, 0.1, TrainSchedule{});
  EXPECT_EQ(p, Tensor<double>({3}, 1.5));
  EXPECT_EQ(st.m[0], Tensor<double>({3}, 0.0));
  EXPECT_EQ(st.v[0], Tensor<double>({3}, 0.0));
}

TEST(Adam, TwoStepTraceOnASquare) {
  const TrainSchedule s;
  const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  Tensor<double> p({1}, 1.0);
  AdamState<double> st;

  // Expected values traced by hand from the update rule.
  double theta = 1.0, m = 0.0, v = 0.0;
  for (int step = 1; step <= 2; ++step) {
    const double g = 2.0 * theta;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    theta -= lr * (m / (1 - std::pow(b1, step))) / (std::sqrt(v / (1 - std::pow(b2, step))) + eps);

    Tensor<double> grad({1}, 2.0 * p[0]);
    adam_step<double>({&p}, {&grad}, st, lr, s);
    EXPECT_NEAR(p[0], theta, 1e-12);
  }
  // First step moves by almost exactly lr, the second by lr * 1.8947 / 1.9026.
  EXPECT_NEAR(theta, 0.9 - 0.1 * (0.36 / 0.19) / std::sqrt(0.007236 / 0.001999), 1e-8);
  EXPECT_LT(std::abs(theta), 1.0);
}

TEST(Adam, RejectsNonFiniteGradients) {
  Tensor<double> p({1}, 1.0);
  Tensor<double> g({1}, std::nan(""));
  AdamState<double> st;
  EXPECT_THROW(adam_step<double>({&p}, {&g}, st, 0.1, TrainSchedule{}), NumericalError);
}

TEST(FeedbackMode, Warmup) {
  const TrainSchedule s;
  for (int e = 0; e < 5; ++e) EXPECT_EQ(feedback_mode(e, {50, 40, 30, 20, 10}, s), Feedback::kPredicted);
  EXPECT_EQ(feedback_mode(3, {}, s), Feedback::kPredicted);
  EXPECT_EQ(feedback_mode(5, {50, 40, 30, 20, 10}, s), Feedback::kGold);
}

TEST(FeedbackMode, TwoNonImprovingEpochsToggle) {
  const TrainSchedule s;
  // Epochs 5..8 score 30, 29, 29.5, 29.4 after a falling warmup.
  const std::vector<double> h{40, 38, 36, 34, 32, 30, 29, 29.5, 29.4, 29.6, 29.7, 28};
  EXPECT_EQ(feedback_mode(6, h, s), Feedback::kGold);
  EXPECT_EQ(feedback_mode(7, h, s), Feedback::kGold);
  EXPECT_EQ(feedback_mode(8, h, s), Feedback::kGold);
  EXPECT_EQ(feedback_mode(9, h, s), Feedback::kPredicted);   // 29.5, 29.4 both miss 29
  EXPECT_EQ(feedback_mode(10, h, s), Feedback::kPredicted);  // counter restarted, one miss
  EXPECT_EQ(feedback_mode(11, h, s), Feedback::kGold);       // second miss toggles back
  EXPECT_EQ(feedback_mode(12, h, s), Feedback::kGold);
}

TEST(FeedbackMode, ImprovingHistoryStaysGold) {
  const TrainSchedule s;
  std::vector<double> h;
  for (int e = 0; e < 40; ++e) h.push_back(100.0 - e);
  for (int e = 5; e <= 40; ++e) EXPECT_EQ(feedback_mode(e, h, s), Feedback::kGold);
}

TEST(FeedbackMode, IsPure) {
  const TrainSchedule s;
  const std::vector<double> h{9, 8, 7, 6, 5, 5, 5, 5, 5, 5};
  EXPECT_EQ(feedback_mode(10, h, s), feedback_mode(10, h, s));
}

TEST(Curriculum, SortedBeforeTheSwitch) {
  TrainSchedule s;
  s.curriculum_switch_epoch = 3;
  const std::vector<CurriculumItem> items{
      {"b", "d1", 0, 50}, {"a", "d1", 1, 20}, {"c", "d2", 0, 20}, {"d", "d2", 1, 90}, {"e", "d0", 0, 10}};
  const std::vector<size_t> order = curriculum_order(items, 0, s, 1);
  EXPECT_EQ(order, (std::vector<size_t>{4, 1, 2, 0, 3}));
  EXPECT_EQ(make_batches(order, 2).front(), (std::vector<size_t>{4, 1}));
  for (size_t i = 1; i < order.size(); ++i) EXPECT_LE(items[order[i - 1]].frames, items[order[i]].frames);
  EXPECT_EQ(curriculum_order(items, 2, s, 1), order);
}

TEST(Curriculum, DialogsAfterTheSwitch) {
  TrainSchedule s;
  s.curriculum_switch_epoch = 3;
  const std::vector<CurriculumItem> items{
      {"x1", "d1", 1, 5}, {"y0", "d2", 0, 5}, {"x0", "d1", 0, 9}, {"y2", "d2", 2, 1}, {"y1", "d2", 1, 3}};
  EXPECT_EQ(curriculum_order(items, 3, s, 1), (std::vector<size_t>{2, 0, 1, 4, 3}));
}

TEST(Curriculum, SeededShuffleWhenDisabled) {
  TrainSchedule s;
  s.no_curriculum = true;
  std::vector<CurriculumItem> items;
  for (int i = 0; i < 30; ++i) items.push_back({"u" + std::to_string(i), "d", i, 30 - i});
  const auto a = curriculum_order(items, 4, s, 9);
  EXPECT_EQ(a, curriculum_order(items, 4, s, 9));
  EXPECT_NE(a, curriculum_order(items, 5, s, 9));
  std::set<size_t> all(a.begin(), a.end());
  EXPECT_EQ(all.size(), items.size());
}

TEST(Batches, SplitInOrder) {
  const auto b = make_batches({5, 4, 3, 2, 1}, 2);
  ASSERT_EQ(b.size(), 3u);
  EXPECT_EQ(b[2], (std::vector<size_t>{1}));
  EXPECT_THROW(make_batches({1}, 0), std::invalid_argument);
}

TEST(TrainStage, MetricsAndDeterminism) {
  const PreparedData data = prepare_data(tiny_corpus());
  ModelConfig cfg = small_config();
  data.vocabs.apply_sizes(cfg);
  const TrainSchedule sched = short_schedule();
  auto run = [&] {
    Stage<float> stage(cfg, StageKind::kSequential, SluVariant::kBase, 3);
    return train_stage(stage, data.train, data.dev, data.vocabs, data.stats, sched, 4);
  };
  const StageResult a = run(), b = run();
  ASSERT_EQ(a.metrics.size(), 3u);
  for (size_t i = 0; i < a.metrics.size(); ++i) {
    EXPECT_EQ(a.metrics[i].epoch, static_cast<int>(i));
    if (i > 0) EXPECT_LE(a.metrics[i].best_dev_error, a.metrics[i - 1].best_dev_error);
  }
  EXPECT_EQ(a.metrics[0].feedback, Feedback::kPredicted);
  EXPECT_EQ(a.metrics[1].feedback, Feedback::kGold);
  EXPECT_EQ(encode_checkpoint(a.best), encode_checkpoint(b.best));
  EXPECT_EQ(metrics_csv(a.metrics), metrics_csv(b.metrics));
  EXPECT_EQ(metrics_csv(a.metrics).substr(0, metrics_csv(a.metrics).find('\n')),
            "epoch,lr,feedback_mode,train_loss,dev_error,best_dev_error");
}

TEST(Pipeline, EmitsOneCheckpointPerStage) {
  const fs::path out = fs::temp_directory_path() / "seqslu_pipeline";
  fs::remove_all(out);
  TrainSchedule sched = short_schedule();
  sched.total_epochs = 1;
  StagePlan plan;
  const PipelineResult r = run_pipeline(plan, tiny_corpus(), small_config(), sched, 1, out);
  ASSERT_EQ(r.checkpoints.size(), 5u);
  const char* names[] = {"0_basic", "1_sequential", "2_basic_two_stage", "3_two_stage", "4_slu_base"};
  for (size_t k = 0; k < 5; ++k) {
    EXPECT_EQ(r.checkpoints[k], out / names[k] / "model.ckpt");
    EXPECT_TRUE(fs::exists(out / names[k] / "metrics.csv"));
  }
  const Checkpoint last = load_checkpoint(r.checkpoints.back());
  EXPECT_EQ(last.kind, StageKind::kSlu);
  // Hand-off: the encoder of stage 1 starts from stage 0 and is trained further,
  // while the frozen lower stages of the SLU model equal the 2-stage result.
  const Checkpoint two = load_checkpoint(r.checkpoints[3]);
  for (const auto& [name, t] : two.tensors) {
    if (name.rfind("features.", 0) == 0) continue;
    const auto it = std::find_if(last.tensors.begin(), last.tensors.end(), [&](const auto& e) { return e.first == name; });
    ASSERT_NE(it, last.tensors.end()) << name;
    EXPECT_EQ(it->second, t) << name;
  }
}

TEST(Pipeline, StackedStageNeedsAPredecessor) {
  StagePlan plan;
  plan.stages = {StageKind::kTwoStage};
  EXPECT_THROW(run_pipeline(plan, tiny_corpus(), small_config(), short_schedule(), 1,
                            fs::temp_directory_path() / "seqslu_pipeline_missing"),
               std::invalid_argument);
  plan.stages = {StageKind::kBasic, StageKind::kTwoStage};
  EXPECT_THROW(run_pipeline(plan, tiny_corpus(), small_config(), short_schedule(), 1,
                            fs::temp_directory_path() / "seqslu_pipeline_bad"),
               std::invalid_argument);
}

TEST(Pipeline, NoIncrementalStartsFresh) {
  const fs::path a = fs::temp_directory_path() / "seqslu_pipeline_inc";
  const fs::path b = fs::temp_directory_path() / "seqslu_pipeline_scratch";
  fs::remove_all(a);
  fs::remove_all(b);
  TrainSchedule sched = short_schedule();
  sched.total_epochs = 1;
  StagePlan plan;
  plan.stages = {StageKind::kBasic, StageKind::kSequential};
  const PipelineResult inc = run_pipeline(plan, tiny_corpus(), small_config(), sched, 1, a);
  plan.no_incremental = true;
  const PipelineResult scratch = run_pipeline(plan, tiny_corpus(), small_config(), sched, 1, b);
  // Stage 0 is identical; stage 1 differs because its encoder was not handed over.
  EXPECT_EQ(slurp(inc.checkpoints[0]), slurp(scratch.checkpoints[0]));
  EXPECT_NE(slurp(inc.checkpoints[1]), slurp(scratch.checkpoints[1]));
}
