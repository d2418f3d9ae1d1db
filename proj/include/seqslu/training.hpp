#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "seqslu/checkpoint.hpp"
#include "seqslu/corpus.hpp"
#include "seqslu/models.hpp"

namespace seqslu {

struct TrainSchedule {
  double lr0 = 0.0005;
  int total_epochs = 60;
  int predicted_warmup_epochs = 5;
  int plateau_patience = 2;
  int curriculum_switch_epoch = 10;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int batch_size = 8;
  bool no_curriculum = false;

  void validate() const;
  friend bool operator==(const TrainSchedule&, const TrainSchedule&) = default;
};

// lr0 * max(0, 1 - e / total_epochs).
double lr_at_epoch(int epoch, const TrainSchedule& sched);

template <typename T>
struct AdamState {
  std::vector<Tensor<T>> m, v;
  int64_t step = 0;
};

// One bias-corrected Adam update. `grads[i]` may be empty (treated as zero).
// Throws NumericalError on non-finite gradients, std::invalid_argument on
// shape mismatches.
template <typename T>
void adam_step(const std::vector<Tensor<T>*>& params, const std::vector<const Tensor<T>*>& grads,
               AdamState<T>& state, double lr, const TrainSchedule& sched);

// Feedback mode for `epoch` given the dev errors of epochs [0, epoch).
// Predicted during warmup, gold at the switch epoch; afterwards the mode
// toggles whenever `plateau_patience` consecutive post-warmup epochs fail to
// beat the best dev error so far, and the plateau counter restarts.
Feedback feedback_mode(int epoch, const std::vector<double>& dev_history, const TrainSchedule& sched);

struct CurriculumItem {
  std::string id;
  std::string dialog_id;
  int turn_index = 0;
  int64_t frames = 0;
};

// Visiting order (indices into `items`) for one epoch. Before the switch
// epoch: ascending frame count, ties by id. From the switch epoch on: dialogs
// in order of first appearance, turns by turn_index. With no_curriculum: a
// shuffle seeded by (seed, epoch).
std::vector<size_t> curriculum_order(const std::vector<CurriculumItem>& items, int epoch,
                                     const TrainSchedule& sched, uint64_t seed);

// Splits an order into consecutive batches of at most batch_size.
std::vector<std::vector<size_t>> make_batches(const std::vector<size_t>& order, int batch_size);

// A loaded utterance ready for training or decoding.
struct Example {
  std::string id;
  std::string dialog_id;
  int turn_index = 0;
  Tensor<float> features;  // normalized, T x 81
  GoldItems gold;          // empty when the utterance has out-of-vocabulary symbols
  bool has_gold = false;
  std::vector<std::string> ref_chars, ref_tokens, ref_annotation, ref_concepts;
};

// Raw log spectrograms of the utterances (audio paths relative to `dir`).
std::vector<Tensor<float>> load_features(const std::vector<Utterance>& utts, const std::filesystem::path& dir);
std::vector<Example> make_examples(const std::vector<Utterance>& utts, std::vector<Tensor<float>> raw,
                                   const FeatureStats& stats, const VocabSet& vocabs);

// Greedy decoding at the stage's output level (concept labels for XT).
std::vector<std::string> decode_symbols(const Stage<float>& stage, const VocabSet& vocabs, const Example& ex);
std::vector<std::string> decode_concepts(const Stage<float>& stage, const VocabSet& vocabs, const Example& ex);

// Error rate used for model selection: character error for char stages, WER
// for token stages, concept error for SLU stages.
double dev_error(const Stage<float>& stage, const VocabSet& vocabs, const std::vector<Example>& data);

struct EpochMetrics {
  int epoch = 0;
  double lr = 0.0;
  Feedback feedback = Feedback::kPredicted;
  double train_loss = 0.0;
  double dev_error = 0.0;
  double best_dev_error = 0.0;
};

std::string metrics_csv(const std::vector<EpochMetrics>& rows);

struct StageResult {
  Checkpoint best;  // best-on-dev parameters
  std::vector<EpochMetrics> metrics;
  int best_epoch = 0;
};

using Logger = std::function<void(const std::string&)>;

// Optimizes CTC on `train` (plus the concept-only CTC for XT) and keeps the
// best-on-dev parameters; `dev` falls back to `train` when empty. Leaves
// `stage` holding the best parameters. If training diverges, the best
// checkpoint so far is written to `failure_checkpoint` (when non-empty)
// before the NumericalError propagates.
StageResult train_stage(Stage<float>& stage, const std::vector<Example>& train, const std::vector<Example>& dev,
                        const VocabSet& vocabs, const FeatureStats& stats, const TrainSchedule& sched,
                        uint64_t seed, const Logger& log = {},
                        const std::filesystem::path& failure_checkpoint = {});

struct StagePlan {
  std::vector<StageKind> stages{StageKind::kBasic, StageKind::kSequential, StageKind::kBasicTwoStage,
                                StageKind::kTwoStage, StageKind::kSlu};
  SluVariant variant = SluVariant::kBase;
  bool no_incremental = false;
  // Trained predecessor of the first stage; required when that stage is
  // stacked and no_incremental is off.
  std::filesystem::path init_checkpoint;
};

struct PipelineResult {
  std::vector<std::filesystem::path> checkpoints;
  std::vector<StageResult> stages;
};

// Trains the plan's stages in order. Each stage starts from the previous
// stage's best parameters unless no_incremental, writing
// <out>/<k>_<stage>/{model.ckpt,metrics.csv}.
PipelineResult run_pipeline(const StagePlan& plan, const Manifest& data, const ModelConfig& base_cfg,
                            const TrainSchedule& sched, uint64_t seed, const std::filesystem::path& out_dir,
                            const Logger& log = {});

// Shared data preparation: vocabularies and normalization from the train split.
struct PreparedData {
  VocabSet vocabs;
  FeatureStats stats;
  std::vector<Example> train, dev, test;
};
PreparedData prepare_data(const Manifest& data);

}  // namespace seqslu
