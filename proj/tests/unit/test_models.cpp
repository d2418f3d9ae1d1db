#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "seqslu/checkpoint.hpp"
#include "seqslu/ctc.hpp"
#include "seqslu/errors.hpp"
#include "seqslu/gradient_suite.hpp"
#include "seqslu/models.hpp"
#include "seqslu/training.hpp"

using namespace seqslu;

namespace {

Tensor<double> features(int64_t frames, int dim, uint64_t seed) {
  Rng rng(seed);
  Tensor<double> f({frames, dim});
  for (auto& v : f.values()) v = rng.uniform(-2.0, 2.0);
  return f;
}

GoldItems tiny_gold() {
  GoldItems g;
  g.chars = {2, 3, 4};
  g.tokens = {2, 4};
  g.annotation = {3, 5, 2};
  g.concepts = {2, 3};
  return g;
}

void expect_normalized(const Tensor<double>& logp) {
  for (int64_t r = 0; r < logp.rows(); ++r) {
    double s = 0.0;
    for (double v : logp.row(r)) s += std::exp(v);
    EXPECT_NEAR(s, 1.0, 1e-5);
  }
}

// Hand formula for the parameter count, written out per component.
int64_t hand_count(const ModelConfig& c, StageKind kind, SluVariant variant) {
  const int64_t K = c.conv_kernel, C = c.conv_channels, H = c.lstm_hidden, h = H / 2;
  int64_t n = C * c.spec_dim * K + C + 2 * C;
  for (int l = 0; l < c.lstm_layers; ++l) {
    const int64_t in = l == 0 ? C : H;
    n += 2 * (in * 4 * h + h * 4 * h + 4 * h) + 2 * H;
  }
  auto dec = [](int64_t ctx, int64_t emb, int64_t hid, int64_t vocab) {
    return vocab * emb + ctx * 4 * hid + emb * 4 * hid + hid * 4 * hid + 4 * hid + 2 * hid + hid * vocab + vocab;
  };
  switch (kind) {
    case StageKind::kBasic: return n + H * c.char_vocab + c.char_vocab;
    case StageKind::kSequential: return n + dec(H, c.dec_embed, c.dec_hidden, c.char_vocab);
    case StageKind::kBasicTwoStage:
      return n + dec(H, c.dec_embed, c.dec_hidden, c.char_vocab) + c.dec_hidden * c.token_vocab + c.token_vocab;
    case StageKind::kTwoStage:
      return n + dec(H, c.dec_embed, c.dec_hidden, c.char_vocab) +
             dec(c.dec_hidden, c.dec_embed, c.dec_hidden, c.token_vocab);
    case StageKind::kSlu:
      return hand_count(c, StageKind::kTwoStage, variant) +
             dec(c.dec_hidden, c.concept_dec_embed, c.concept_dec_hidden, c.annotation_vocab) +
             (variant == SluVariant::kXt
                  ? dec(c.concept_dec_hidden, c.concept_dec_embed, c.concept_dec_hidden, c.concept_vocab)
                  : 0);
  }
  return 0;
}

const StageKind kAllKinds[] = {StageKind::kBasic, StageKind::kSequential, StageKind::kBasicTwoStage,
                               StageKind::kTwoStage, StageKind::kSlu};

}  // namespace

TEST(CountParams, GoldenDefault) {
  const ModelConfig cfg;
  EXPECT_EQ(count_params(cfg, StageKind::kSlu, SluVariant::kXt), 9026624);
  EXPECT_LT(count_params(cfg, StageKind::kSlu, SluVariant::kXt), 9800000);
  EXPECT_EQ(count_params(cfg, StageKind::kBasic), 689143);
  EXPECT_EQ(count_params(cfg, StageKind::kTwoStage), 2468245);
}

TEST(CountParams, MatchesHandFormulaAndBuiltStages) {
  for (const ModelConfig& cfg : {ModelConfig{}, tiny_model_config()}) {
    for (StageKind k : kAllKinds) {
      for (SluVariant v : {SluVariant::kBase, SluVariant::kXt}) {
        if (k != StageKind::kSlu && v != SluVariant::kBase) continue;
        EXPECT_EQ(count_params(cfg, k, v), hand_count(cfg, k, v)) << to_string(k);
        if (cfg == tiny_model_config()) EXPECT_EQ(Stage<double>(cfg, k, v, 1).params().total_size(), count_params(cfg, k, v));
      }
    }
  }
}

TEST(CountParams, SingleLinearAndMonotonicity) {
  const ModelConfig base;
  // Only the output layer depends on the character inventory.
  ModelConfig wider = base;
  wider.char_vocab += 7;
  EXPECT_EQ(count_params(wider, StageKind::kBasic) - count_params(base, StageKind::kBasic),
            7 * (base.lstm_hidden + 1));

  ModelConfig bigger = base;
  bigger.dec_hidden *= 2;
  for (StageKind k : {StageKind::kSequential, StageKind::kTwoStage, StageKind::kSlu}) {
    EXPECT_GT(count_params(bigger, k), count_params(base, k));
  }
}

TEST(Stage, BasicShapeAndNormalization) {
  ModelConfig cfg = tiny_model_config();
  cfg.conv_kernel = 11;
  Stage<double> s(cfg, StageKind::kBasic, SluVariant::kBase, 3);
  Rng rng(1);
  Var<double> out = basic_forward(s, features(100, cfg.spec_dim, 1), Phase::kEval, rng);
  EXPECT_EQ(out.shape(), (Shape{50, cfg.char_vocab}));
  expect_normalized(out.value());
  EXPECT_THROW(basic_forward(s, Tensor<double>({1, cfg.spec_dim + 1}), Phase::kEval, rng), std::invalid_argument);
}

TEST(Stage, EveryKindProducesValidPosteriors) {
  const ModelConfig cfg = tiny_model_config();
  const GoldItems gold = tiny_gold();
  for (StageKind k : kAllKinds) {
    for (SluVariant v : {SluVariant::kBase, SluVariant::kTune, SluVariant::kXt}) {
      if (k != StageKind::kSlu && v != SluVariant::kBase) continue;
      Stage<double> s(cfg, k, v, 5);
      for (Feedback mode : {Feedback::kPredicted, Feedback::kGold}) {
        Rng rng(2);
        StageOutput<double> out = s.forward(features(16, cfg.spec_dim, 2), mode, &gold, Phase::kTrain, rng);
        EXPECT_EQ(out.logp.rows(), 8);
        expect_normalized(out.logp.value());
        if (s.has_concept_decoder()) {
          EXPECT_EQ(out.concept_logp.cols(), cfg.concept_vocab);
          expect_normalized(out.concept_logp.value());
        }
      }
    }
  }
}

TEST(Stage, GoldModeWithEqualLengthsFeedsShiftedGold) {
  const ModelConfig cfg = tiny_model_config();
  Stage<double> s(cfg, StageKind::kSequential, SluVariant::kBase, 4);
  GoldItems gold;
  gold.chars = {2, 3, 4, 2, 3, 4};  // M equals T' = 6
  Rng rng(0);
  StageOutput<double> out = s.forward(features(12, cfg.spec_dim, 3), Feedback::kGold, &gold, Phase::kEval, rng);
  ASSERT_EQ(out.feedback.size(), 1u);
  EXPECT_EQ(out.feedback[0], (std::vector<int>{kSosId, 2, 3, 4, 2, 3}));
}

TEST(Stage, PredictedModeFeedsPreviousArgmax) {
  const ModelConfig cfg = tiny_model_config();
  Stage<double> s(cfg, StageKind::kSequential, SluVariant::kBase, 4);
  Rng rng(0);
  StageOutput<double> out = s.forward(features(12, cfg.spec_dim, 3), Feedback::kPredicted, nullptr, Phase::kEval, rng);
  const std::vector<int> frames = frame_argmax(out.logp.value());
  ASSERT_EQ(out.feedback[0].size(), frames.size());
  EXPECT_EQ(out.feedback[0][0], kSosId);
  for (size_t t = 1; t < frames.size(); ++t) EXPECT_EQ(out.feedback[0][t], frames[t - 1]);
}

TEST(Stage, GoldModeErrors) {
  const ModelConfig cfg = tiny_model_config();
  Stage<double> s(cfg, StageKind::kSequential, SluVariant::kBase, 4);
  Rng rng(0);
  EXPECT_THROW(s.forward(features(12, cfg.spec_dim, 3), Feedback::kGold, nullptr, Phase::kEval, rng),
               std::invalid_argument);
  GoldItems gold;
  gold.chars = std::vector<int>(7, 2);
  EXPECT_THROW(s.forward(features(12, cfg.spec_dim, 3), Feedback::kGold, &gold, Phase::kEval, rng),
               std::invalid_argument);
}

TEST(Stage, ForwardIsDeterministic) {
  const ModelConfig cfg = tiny_model_config();
  const GoldItems gold = tiny_gold();
  auto run = [&] {
    Stage<double> s(cfg, StageKind::kSlu, SluVariant::kXt, 8);
    Rng rng(4);
    return s.forward(features(14, cfg.spec_dim, 4), Feedback::kPredicted, &gold, Phase::kTrain, rng).logp.value();
  };
  EXPECT_EQ(run(), run());
}

TEST(Stacking, CopiesLowerStageParameters) {
  const ModelConfig cfg = tiny_model_config();
  Stage<double> seq(cfg, StageKind::kSequential, SluVariant::kBase, 1);
  Stage<double> two = stack_two_stage(seq, 2);
  for (const auto& e : seq.params().entries()) {
    ASSERT_TRUE(two.params().contains(e.name)) << e.name;
    EXPECT_EQ(two.params().get(e.name).value(), e.var.value()) << e.name;
  }
  EXPECT_TRUE(two.params().contains("tok_dec.out.weight"));
  Rng rng(0);
  EXPECT_EQ(two.forward(features(12, cfg.spec_dim, 1), Feedback::kPredicted, nullptr, Phase::kEval, rng).logp.cols(),
            cfg.token_vocab);
  EXPECT_THROW(stack_two_stage(Stage<double>(cfg, StageKind::kSlu, SluVariant::kBase, 1), 3), std::invalid_argument);
  EXPECT_THROW(derive_stage(seq, StageKind::kBasic, SluVariant::kBase, 3), std::invalid_argument);
}

TEST(Stacking, BaseVariantPreservesLowerOutputsAtInit) {
  const ModelConfig cfg = tiny_model_config();
  Stage<double> two(cfg, StageKind::kTwoStage, SluVariant::kBase, 6);
  Stage<double> slu = stack_slu(two, SluVariant::kBase, 7);
  const Tensor<double> x = features(14, cfg.spec_dim, 5);
  Rng r1(0), r2(0);
  StageOutput<double> a = two.forward(x, Feedback::kPredicted, nullptr, Phase::kEval, r1);
  StageOutput<double> b = slu.forward(x, Feedback::kPredicted, nullptr, Phase::kEval, r2);
  for (const char* name : {"encoder", "char_dec", "tok_dec"}) EXPECT_EQ(a.state(name).value(), b.state(name).value());
}

TEST(Stacking, BaseFreezesLowerStages) {
  const ModelConfig cfg = tiny_model_config();
  Stage<double> slu(cfg, StageKind::kSlu, SluVariant::kBase, 6);
  const GoldItems gold = tiny_gold();
  Rng rng(1);
  StageOutput<double> out = slu.forward(features(14, cfg.spec_dim, 5), Feedback::kPredicted, &gold, Phase::kTrain, rng);
  backward(ctc_loss(out.logp, gold.annotation));
  for (const auto& e : slu.params().entries()) {
    const bool lower = e.name.rfind("encoder.", 0) == 0 || e.name.rfind("char_dec.", 0) == 0 ||
                       e.name.rfind("tok_dec.", 0) == 0;
    EXPECT_EQ(slu.is_frozen(e.name), lower) << e.name;
    if (lower) {
      EXPECT_FALSE(e.var.has_grad()) << e.name;
    } else {
      EXPECT_TRUE(e.var.has_grad()) << e.name;
    }
  }
  for (const auto& [name, var] : slu.trainable()) EXPECT_FALSE(slu.is_frozen(name));
}

TEST(Stacking, TuneUpdatesLowerStages) {
  const ModelConfig cfg = tiny_model_config();
  Stage<double> slu(cfg, StageKind::kSlu, SluVariant::kTune, 6);
  const GoldItems gold = tiny_gold();
  Rng rng(1);
  StageOutput<double> out = slu.forward(features(14, cfg.spec_dim, 5), Feedback::kPredicted, &gold, Phase::kTrain, rng);
  Var<double> loss = ctc_loss(out.logp, gold.annotation);
  ASSERT_GT(loss.value()[0], 0.0);
  backward(loss);

  const Tensor<double> before = slu.params().get("encoder.conv0.weight").value();
  std::vector<Tensor<double>*> params;
  std::vector<const Tensor<double>*> grads;
  for (auto& e : slu.params().entries()) {
    params.push_back(&e.var.mutable_value());
    grads.push_back(&e.var.grad());
  }
  AdamState<double> state;
  adam_step(params, grads, state, 1e-3, TrainSchedule{});
  EXPECT_NE(slu.params().get("encoder.conv0.weight").value(), before);
}

TEST(Stacking, XtDecodesConceptsOnly) {
  std::vector<Utterance> train(1);
  const Annotation a = parse_annotation("oui < chambre double chambre-type >");
  train[0].transcript = a.transcript;
  train[0].chunks = a.chunks;
  const VocabSet vocabs = build_vocabs(train);
  ModelConfig cfg = tiny_model_config();
  vocabs.apply_sizes(cfg);
  Stage<float> xt(cfg, StageKind::kSlu, SluVariant::kXt, 2);
  Example ex;
  ex.features = Tensor<float>({20, cfg.spec_dim}, 0.3f);
  for (const auto& label : decode_concepts(xt, vocabs, ex)) {
    EXPECT_TRUE(vocabs.concepts.find(label).has_value()) << label;
    EXPECT_NE(label, "<");
    EXPECT_NE(label, ">");
    EXPECT_FALSE(vocabs.tokens.find(label).has_value()) << label;
  }
}

TEST(StageGradients, AllKindsBothModes) {
  for (const auto& name : gradient_case_names()) {
    if (name.rfind("stage_", 0) != 0) continue;
    const GradientCase c = run_gradient_case(name, 21);
    EXPECT_TRUE(c.report.pass) << name << " " << c.report.max_rel_error;
  }
}

TEST(Checkpoint, RoundTrip) {
  ModelConfig cfg = tiny_model_config();
  std::vector<Utterance> train(2);
  for (auto* s : {"oui < deux nombre-chambre >", "< chambre double chambre-type >"}) {
    const Annotation a = parse_annotation(s);
    train[s[0] == 'o' ? 0 : 1].transcript = a.transcript;
    train[s[0] == 'o' ? 0 : 1].chunks = a.chunks;
  }
  const VocabSet vocabs = build_vocabs(train);
  vocabs.apply_sizes(cfg);
  Stage<float> s(cfg, StageKind::kSlu, SluVariant::kXt, 9);
  FeatureStats stats{std::vector<float>(cfg.spec_dim, 0.5f), std::vector<float>(cfg.spec_dim, 2.0f)};
  nlohmann::ordered_json info;
  info["epoch"] = 3;
  const Checkpoint ck = make_checkpoint(s, vocabs, stats, info);
  const std::string bytes = encode_checkpoint(ck);
  const Checkpoint back = decode_checkpoint(bytes);
  EXPECT_EQ(back.config, cfg);
  EXPECT_EQ(back.kind, StageKind::kSlu);
  EXPECT_EQ(back.variant, SluVariant::kXt);
  EXPECT_EQ(back.vocabs, vocabs);
  EXPECT_EQ(back.stats.mean, stats.mean);
  EXPECT_EQ(back.info["epoch"], 3);
  EXPECT_EQ(encode_checkpoint(back), bytes);

  Stage<float> restored = restore_stage(back);
  for (const auto& e : s.params().entries()) EXPECT_EQ(restored.params().get(e.name).value(), e.var.value());

  EXPECT_THROW(decode_checkpoint(bytes.substr(0, bytes.size() / 2)), DataError);
  EXPECT_THROW(decode_checkpoint("not a checkpoint"), DataError);
  Checkpoint broken = back;
  broken.tensors.pop_back();
  EXPECT_THROW(restore_stage(broken), DataError);
}
