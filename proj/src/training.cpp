#include "seqslu/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "seqslu/alignment.hpp"
#include "seqslu/ctc.hpp"
#include "seqslu/errors.hpp"
#include "seqslu/evaluation.hpp"

namespace seqslu {
namespace {

int64_t encoder_frames(const ModelConfig& cfg, int64_t frames) {
  for (int i = 0; i < cfg.conv_layers; ++i) frames = conv1d_output_length(frames, cfg.conv_kernel, cfg.conv_stride, cfg.conv_kernel / 2);
  return frames;
}

void emit(const Logger& log, const std::string& msg) {
  if (log) log(msg);
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

}  // namespace

void TrainSchedule::validate() const {
  if (!(lr0 >= 0.0)) throw std::invalid_argument("schedule: lr0 must be >= 0");
  if (total_epochs < 1) throw std::invalid_argument("schedule: total_epochs must be >= 1");
  if (predicted_warmup_epochs < 0) throw std::invalid_argument("schedule: predicted_warmup_epochs must be >= 0");
  if (plateau_patience < 1) throw std::invalid_argument("schedule: plateau_patience must be >= 1");
  if (curriculum_switch_epoch < 0) throw std::invalid_argument("schedule: curriculum_switch_epoch must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("schedule: batch_size must be >= 1");
  if (!(adam_beta1 >= 0 && adam_beta1 < 1 && adam_beta2 >= 0 && adam_beta2 < 1 && adam_eps > 0)) {
    throw std::invalid_argument("schedule: bad Adam constants");
  }
}

double lr_at_epoch(int epoch, const TrainSchedule& sched) {
  if (epoch < 0) throw std::invalid_argument("lr_at_epoch: negative epoch");
  return sched.lr0 * std::max(0.0, 1.0 - static_cast<double>(epoch) / sched.total_epochs);
}

template <typename T>
void adam_step(const std::vector<Tensor<T>*>& params, const std::vector<const Tensor<T>*>& grads,
               AdamState<T>& state, double lr, const TrainSchedule& sched) {
  if (params.size() != grads.size()) throw std::invalid_argument("adam_step: params/grads count mismatch");
  if (state.m.empty()) {
    for (const auto* p : params) {
      state.m.emplace_back(p->shape());
      state.v.emplace_back(p->shape());
    }
  }
  if (state.m.size() != params.size()) throw std::invalid_argument("adam_step: state does not match params");
  for (size_t i = 0; i < params.size(); ++i) {
    if (params[i]->shape() != state.m[i].shape() || (!grads[i]->empty() && grads[i]->shape() != params[i]->shape())) {
      throw std::invalid_argument("adam_step: shape mismatch for parameter " + std::to_string(i));
    }
    if (!grads[i]->empty() && !grads[i]->all_finite()) {
      throw NumericalError("adam_step: non-finite gradient for parameter " + std::to_string(i));
    }
  }

  ++state.step;
  const double b1 = sched.adam_beta1, b2 = sched.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor<T>& p = *params[i];
    Tensor<T>& m = state.m[i];
    Tensor<T>& v = state.v[i];
    const Tensor<T>* g = grads[i];
    for (int64_t k = 0; k < p.size(); ++k) {
      const double gk = g->empty() ? 0.0 : static_cast<double>((*g)[k]);
      const double mk = b1 * m[k] + (1.0 - b1) * gk;
      const double vk = b2 * v[k] + (1.0 - b2) * gk * gk;
      m[k] = static_cast<T>(mk);
      v[k] = static_cast<T>(vk);
      p[k] = static_cast<T>(p[k] - lr * (mk / c1) / (std::sqrt(vk / c2) + sched.adam_eps));
    }
  }
}

Feedback feedback_mode(int epoch, const std::vector<double>& dev_history, const TrainSchedule& sched) {
  const int warmup = sched.predicted_warmup_epochs;
  if (epoch < warmup) return Feedback::kPredicted;
  Feedback mode = Feedback::kGold;
  double best = std::numeric_limits<double>::infinity();
  int stalled = 0;
  const int seen = std::min<int>(epoch, static_cast<int>(dev_history.size()));
  for (int k = 0; k < seen; ++k) {
    const double err = dev_history[static_cast<size_t>(k)];
    const bool improved = err < best;
    if (improved) best = err;
    if (k < warmup) continue;
    stalled = improved ? 0 : stalled + 1;
    if (stalled >= sched.plateau_patience) {
      mode = mode == Feedback::kGold ? Feedback::kPredicted : Feedback::kGold;
      stalled = 0;
    }
  }
  return mode;
}

std::vector<size_t> curriculum_order(const std::vector<CurriculumItem>& items, int epoch,
                                     const TrainSchedule& sched, uint64_t seed) {
  std::vector<size_t> order(items.size());
  std::iota(order.begin(), order.end(), size_t{0});
  if (sched.no_curriculum) {
    Rng rng(derive_seed(seed, static_cast<uint64_t>(epoch)));
    rng.shuffle(order);
    return order;
  }
  if (epoch < sched.curriculum_switch_epoch) {
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      if (items[a].frames != items[b].frames) return items[a].frames < items[b].frames;
      return items[a].id < items[b].id;
    });
    return order;
  }
  std::map<std::string, size_t> dialog_rank;
  for (const auto& it : items) dialog_rank.emplace(it.dialog_id, dialog_rank.size());
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    const size_t da = dialog_rank.at(items[a].dialog_id), db = dialog_rank.at(items[b].dialog_id);
    if (da != db) return da < db;
    return items[a].turn_index < items[b].turn_index;
  });
  return order;
}

std::vector<std::vector<size_t>> make_batches(const std::vector<size_t>& order, int batch_size) {
  if (batch_size < 1) throw std::invalid_argument("make_batches: batch size must be >= 1");
  std::vector<std::vector<size_t>> out;
  for (size_t i = 0; i < order.size(); i += static_cast<size_t>(batch_size)) {
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), i + batch_size)));
  }
  return out;
}

std::vector<Tensor<float>> load_features(const std::vector<Utterance>& utts, const std::filesystem::path& dir) {
  std::vector<Tensor<float>> out;
  out.reserve(utts.size());
  for (const auto& u : utts) {
    try {
      out.push_back(log_spectrogram(read_wav(dir / u.audio)).frames);
    } catch (const DataError& e) {
      throw DataError(u.id + ": " + e.what());
    }
  }
  return out;
}

std::vector<Example> make_examples(const std::vector<Utterance>& utts, std::vector<Tensor<float>> raw,
                                   const FeatureStats& stats, const VocabSet& vocabs) {
  if (raw.size() != utts.size()) throw std::invalid_argument("make_examples: feature count mismatch");
  std::vector<Example> out;
  out.reserve(utts.size());
  for (size_t i = 0; i < utts.size(); ++i) {
    const Utterance& u = utts[i];
    Example ex;
    ex.id = u.id;
    ex.dialog_id = u.dialog_id;
    ex.turn_index = u.turn_index;
    Spectrogram spec;
    spec.frames = std::move(raw[i]);
    ex.features = normalize(spec, stats).frames;
    try {
      ex.gold = encode_gold(u, vocabs);
      ex.has_gold = true;
    } catch (const std::out_of_range&) {
      ex.has_gold = false;
    }
    ex.ref_chars = target_symbols(u, VocabLevel::kChars);
    ex.ref_tokens = target_symbols(u, VocabLevel::kTokens);
    ex.ref_annotation = target_symbols(u, VocabLevel::kAnnotation);
    ex.ref_concepts = target_symbols(u, VocabLevel::kConcepts);
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<std::string> decode_symbols(const Stage<float>& stage, const VocabSet& vocabs, const Example& ex) {
  NoGradGuard no_grad;
  Rng rng(0);
  const StageOutput<float> out = stage.forward(ex.features, Feedback::kPredicted, nullptr, Phase::kEval, rng);
  return vocabs.at(stage.level()).decode(greedy_decode(out.logp.value()));
}

std::vector<std::string> decode_concepts(const Stage<float>& stage, const VocabSet& vocabs, const Example& ex) {
  if (stage.kind() != StageKind::kSlu) throw std::invalid_argument("decode_concepts: not an SLU stage");
  NoGradGuard no_grad;
  Rng rng(0);
  const StageOutput<float> out = stage.forward(ex.features, Feedback::kPredicted, nullptr, Phase::kEval, rng);
  if (stage.has_concept_decoder()) return vocabs.concepts.decode(greedy_decode(out.concept_logp.value()));
  return extract_concepts(vocabs.annotation.decode(greedy_decode(out.logp.value())));
}

double dev_error(const Stage<float>& stage, const VocabSet& vocabs, const std::vector<Example>& data) {
  EditStats total;
  for (const auto& ex : data) {
    switch (stage.level()) {
      case VocabLevel::kChars: total += levenshtein(decode_symbols(stage, vocabs, ex), ex.ref_chars); break;
      case VocabLevel::kTokens: total += levenshtein(decode_symbols(stage, vocabs, ex), ex.ref_tokens); break;
      default: total += levenshtein(decode_concepts(stage, vocabs, ex), ex.ref_concepts); break;
    }
  }
  return total.rate();
}

std::string metrics_csv(const std::vector<EpochMetrics>& rows) {
  std::ostringstream out;
  out << "epoch,lr,feedback_mode,train_loss,dev_error,best_dev_error\n";
  for (const auto& r : rows) {
    out << r.epoch << ',' << fmt("%.8g", r.lr) << ',' << to_string(r.feedback) << ',' << fmt("%.6f", r.train_loss)
        << ',' << fmt("%.4f", r.dev_error) << ',' << fmt("%.4f", r.best_dev_error) << '\n';
  }
  return out.str();
}

StageResult train_stage(Stage<float>& stage, const std::vector<Example>& train, const std::vector<Example>& dev,
                        const VocabSet& vocabs, const FeatureStats& stats, const TrainSchedule& sched,
                        uint64_t seed, const Logger& log, const std::filesystem::path& failure_checkpoint) {
  sched.validate();
  if (train.empty()) throw std::invalid_argument("train_stage: no training utterances");
  const std::vector<Example>& eval = dev.empty() ? train : dev;
  const VocabLevel level = stage.level();

  std::vector<CurriculumItem> items;
  for (const auto& ex : train) {
    if (!ex.has_gold) throw std::invalid_argument("train_stage: " + ex.id + " has symbols outside the vocabulary");
    items.push_back({ex.id, ex.dialog_id, ex.turn_index, ex.features.rows()});
  }

  auto trainable = stage.trainable();
  std::vector<Tensor<float>*> params;
  std::vector<const Tensor<float>*> grads;
  for (auto& [name, var] : trainable) {
    params.push_back(&var.mutable_value());
    grads.push_back(&var.grad());
  }
  AdamState<float> adam;

  StageResult result;
  std::vector<double> history;
  double best = std::numeric_limits<double>::infinity();
  auto snapshot = [&](int epoch, double err) {
    nlohmann::ordered_json info;
    info["epoch"] = epoch;
    info["dev_error"] = err;
    info["seed"] = seed;
    return make_checkpoint(stage, vocabs, stats, info);
  };

  int skipped = 0;
  for (int epoch = 0; epoch < sched.total_epochs; ++epoch) {
    const double lr = lr_at_epoch(epoch, sched);
    const Feedback mode = feedback_mode(epoch, history, sched);
    const auto batches = make_batches(curriculum_order(items, epoch, sched, seed), sched.batch_size);
    const uint64_t epoch_seed = derive_seed(seed, static_cast<uint64_t>(epoch));

    double loss_sum = 0.0;
    int64_t loss_count = 0;
    try {
      for (const auto& batch : batches) {
        for (auto& [name, var] : trainable) var.zero_grad();
        for (size_t idx : batch) {
          const Example& ex = train[idx];
          const std::vector<int>& target = ex.gold.at(level);
          const int64_t frames = encoder_frames(stage.config(), ex.features.rows());
          if (ctc_min_frames(target) > frames ||
              (stage.has_concept_decoder() && ctc_min_frames(ex.gold.concepts) > frames)) {
            ++skipped;
            continue;
          }
          Rng rng(derive_seed(epoch_seed, idx));
          const StageOutput<float> out = stage.forward(ex.features, mode, &ex.gold, Phase::kTrain, rng);
          Var<float> loss = ctc_loss(out.logp, target);
          if (stage.has_concept_decoder()) loss = add(loss, ctc_loss(out.concept_logp, ex.gold.concepts));
          const float norm = 1.0f / static_cast<float>(frames * static_cast<int64_t>(batch.size()));
          loss_sum += static_cast<double>(loss.value()[0]) / static_cast<double>(frames);
          ++loss_count;
          backward(scale(loss, norm));
        }
        for (size_t i = 0; i < trainable.size(); ++i) grads[i] = &trainable[i].second.grad();
        adam_step(params, grads, adam, lr, sched);
      }
    } catch (const NumericalError& e) {
      if (!failure_checkpoint.empty() && !result.metrics.empty()) save_checkpoint(failure_checkpoint, result.best);
      throw NumericalError(std::string(to_string(stage.kind())) + " epoch " + std::to_string(epoch) +
                           ": training diverged: " + e.what());
    }

    const double err = dev_error(stage, vocabs, eval);
    history.push_back(err);
    if (err < best || result.metrics.empty()) {
      best = err;
      result.best = snapshot(epoch, err);
      result.best_epoch = epoch;
    }
    EpochMetrics m{epoch, lr, mode, loss_count ? loss_sum / static_cast<double>(loss_count) : 0.0, err, best};
    result.metrics.push_back(m);
    emit(log, std::string(to_string(stage.kind())) + " epoch " + std::to_string(epoch) + " lr " +
                  fmt("%.6g", lr) + " " + std::string(to_string(mode)) + " loss " + fmt("%.4f", m.train_loss) +
                  " dev " + fmt("%.2f", err) + " best " + fmt("%.2f", best));
  }
  if (skipped > 0) {
    emit(log, std::to_string(skipped) + " utterance visits skipped: targets longer than the encoder output");
  }

  // Leave the stage at its best-on-dev parameters.
  auto& entries = stage.params().entries();
  for (size_t i = 0; i < entries.size(); ++i) entries[i].var.mutable_value() = result.best.tensors[i].second;
  return result;
}

PreparedData prepare_data(const Manifest& data) {
  PreparedData p;
  p.vocabs = build_vocabs(data.train);
  std::vector<Tensor<float>> train_raw = load_features(data.train, data.dir);
  std::vector<const Tensor<float>*> ptrs;
  for (const auto& t : train_raw) ptrs.push_back(&t);
  p.stats = compute_stats(ptrs);
  p.train = make_examples(data.train, std::move(train_raw), p.stats, p.vocabs);
  p.dev = make_examples(data.dev, load_features(data.dev, data.dir), p.stats, p.vocabs);
  p.test = make_examples(data.test, load_features(data.test, data.dir), p.stats, p.vocabs);
  return p;
}

PipelineResult run_pipeline(const StagePlan& plan, const Manifest& data, const ModelConfig& base_cfg,
                            const TrainSchedule& sched, uint64_t seed, const std::filesystem::path& out_dir,
                            const Logger& log) {
  if (plan.stages.empty()) throw std::invalid_argument("run_pipeline: empty stage plan");
  if (!plan.no_incremental) {
    for (size_t k = 1; k < plan.stages.size(); ++k) {
      if (!transition_allowed(plan.stages[k - 1], plan.stages[k])) {
        throw std::invalid_argument("run_pipeline: cannot stack " + std::string(to_string(plan.stages[k])) +
                                    " on " + std::string(to_string(plan.stages[k - 1])));
      }
    }
  }
  sched.validate();
  const PreparedData prepared = prepare_data(data);
  ModelConfig cfg = base_cfg;
  prepared.vocabs.apply_sizes(cfg);
  cfg.validate();
  std::filesystem::create_directories(out_dir);

  PipelineResult result;
  std::optional<Stage<float>> prev;
  if (!plan.no_incremental && plan.stages.front() != StageKind::kBasic) {
    if (plan.init_checkpoint.empty()) {
      throw std::invalid_argument("run_pipeline: a " + std::string(to_string(plan.stages.front())) +
                                  " stage needs a trained predecessor checkpoint");
    }
    const Checkpoint init = load_checkpoint(plan.init_checkpoint);
    if (!(init.vocabs == prepared.vocabs)) {
      throw DataError(plan.init_checkpoint.string() + ": vocabularies differ from the training manifest");
    }
    if (!transition_allowed(init.kind, plan.stages.front())) {
      throw std::invalid_argument("run_pipeline: cannot stack " + std::string(to_string(plan.stages.front())) +
                                  " on the " + std::string(to_string(init.kind)) + " checkpoint");
    }
    prev.emplace(restore_stage(init));
  }
  for (size_t k = 0; k < plan.stages.size(); ++k) {
    const StageKind kind = plan.stages[k];
    const SluVariant variant = kind == StageKind::kSlu ? plan.variant : SluVariant::kBase;
    std::string name = std::to_string(k) + "_" + std::string(to_string(kind));
    if (kind == StageKind::kSlu) name += "_" + std::string(to_string(variant));
    const std::filesystem::path dir = out_dir / name;
    std::filesystem::create_directories(dir);

    Stage<float> stage = (prev && !plan.no_incremental)
                             ? derive_stage(*prev, kind, variant, derive_seed(seed, 100 + k))
                             : Stage<float>(cfg, kind, variant, derive_seed(seed, 200 + k));
    emit(log, "stage " + name + ": " + std::to_string(stage.params().total_size()) + " parameters");
    StageResult r = train_stage(stage, prepared.train, prepared.dev, prepared.vocabs, prepared.stats, sched,
                                derive_seed(seed, 300 + k), log, dir / "model.ckpt");
    save_checkpoint(dir / "model.ckpt", r.best);
    std::ofstream(dir / "metrics.csv") << metrics_csv(r.metrics);
    result.checkpoints.push_back(dir / "model.ckpt");
    result.stages.push_back(std::move(r));
    prev.emplace(std::move(stage));
  }
  return result;
}

template void adam_step(const std::vector<Tensor<float>*>&, const std::vector<const Tensor<float>*>&,
                        AdamState<float>&, double, const TrainSchedule&);
template void adam_step(const std::vector<Tensor<double>*>&, const std::vector<const Tensor<double>*>&,
                        AdamState<double>&, double, const TrainSchedule&);

}  // namespace seqslu
