#include "seqslu/gradient_suite.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

#include "seqslu/alignment.hpp"
#include "seqslu/ctc.hpp"
#include "seqslu/ops.hpp"

namespace seqslu {
namespace {

using P = std::vector<std::pair<std::string, Var<double>>>;

Tensor<double> random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(std::move(shape));
  for (auto& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

// Values in +-[0.1, 1], away from the relu kink.
Tensor<double> kinkless_tensor(Shape shape, Rng& rng) {
  Tensor<double> t(std::move(shape));
  for (auto& v : t.values()) v = (rng.bernoulli(0.5) ? 1.0 : -1.0) * rng.uniform(0.1, 1.0);
  return t;
}

// Random projection to a scalar so every output element matters.
Var<double> project(const Var<double>& out, uint64_t seed) {
  Rng rng(seed);
  return sum(mul(out, constant(random_tensor(out.shape(), rng))));
}

std::vector<int> random_labels(Rng& rng, int max_len, int vocab) {
  const int len = static_cast<int>(rng.uniform_int(0, max_len));
  std::vector<int> out;
  for (int i = 0; i < len; ++i) out.push_back(static_cast<int>(rng.uniform_int(2, vocab - 1)));
  return out;
}

GradReport check_layer(const std::string& name, uint64_t seed) {
  Rng rng(seed);
  const uint64_t proj = derive_seed(seed, 99);
  auto par = [&](Shape s) { return parameter(random_tensor(std::move(s), rng)); };

  if (name == "matmul") {
    auto a = par({3, 4}), b = par({4, 2});
    return grad_check([=] { return project(matmul(a, b), proj); }, P{{"a", a}, {"b", b}});
  }
  if (name == "add_mul_scale") {
    auto a = par({2, 3}), b = par({2, 3});
    return grad_check([=] { return project(scale(add(mul(a, b), a), 0.7), proj); }, P{{"a", a}, {"b", b}});
  }
  if (name == "linear") {
    auto x = par({3, 4}), w = par({4, 5}), b = par({5});
    return grad_check([=] { return project(linear(x, w, b), proj); }, P{{"x", x}, {"w", w}, {"b", b}});
  }
  if (name == "add_bias") {
    auto x = par({3, 4}), b = par({4});
    return grad_check([=] { return project(add_bias(x, b), proj); }, P{{"x", x}, {"b", b}});
  }
  if (name == "relu") {
    auto x = parameter(kinkless_tensor({3, 4}, rng));
    return grad_check([=] { return project(relu(x), proj); }, P{{"x", x}});
  }
  if (name == "tanh") {
    auto x = par({3, 4});
    return grad_check([=] { return project(tanh(x), proj); }, P{{"x", x}});
  }
  if (name == "sigmoid") {
    auto x = par({3, 4});
    return grad_check([=] { return project(sigmoid(x), proj); }, P{{"x", x}});
  }
  if (name == "log_softmax") {
    auto x = parameter(random_tensor({3, 5}, rng, -3.0, 3.0));
    return grad_check([=] { return project(log_softmax(x), proj); }, P{{"x", x}});
  }
  if (name == "layer_norm") {
    auto x = parameter(random_tensor({3, 6}, rng, -2.0, 2.0)), g = par({6}), b = par({6});
    return grad_check([=] { return project(layer_norm(x, g, b), proj); }, P{{"x", x}, {"gain", g}, {"bias", b}});
  }
  if (name == "dropout") {
    auto x = par({4, 5});
    return grad_check(
        [=] {
          Rng mask(proj);
          return project(dropout(x, 0.5, Phase::kTrain, mask), proj);
        },
        P{{"x", x}});
  }
  if (name == "concat_slice") {
    auto a = par({3, 2}), b = par({3, 4});
    return grad_check([=] { return project(slice_cols(concat_cols(a, b), 1, 5), proj); }, P{{"a", a}, {"b", b}});
  }
  if (name == "select_stack") {
    auto a = par({4, 3});
    return grad_check(
        [=] { return project(stack_rows<double>({select_row(a, 2), select_row(a, 0), select_row(a, 2)}), proj); },
        P{{"a", a}});
  }
  if (name == "conv1d") {
    auto x = par({7, 3}), w = par({4, 3, 3}), b = par({4});
    return grad_check([=] { return project(conv1d(x, w, b, 2, 1), proj); }, P{{"x", x}, {"w", w}, {"b", b}});
  }
  if (name == "lstm_cell") {
    auto g = par({2, 8}), h = par({2, 2}), c = par({2, 2}), wh = par({2, 8});
    return grad_check([=] { return project(lstm_cell(g, h, c, wh), proj); },
                      P{{"gates", g}, {"h", h}, {"c", c}, {"wh", wh}});
  }
  if (name == "window_sum") {
    auto h = par({6, 3});
    const int64_t center = static_cast<int64_t>(rng.uniform_int(0, 5));
    return grad_check([=] { return project(window_sum(h, center, 1), proj); }, P{{"states", h}});
  }
  if (name == "aligned_window_sum") {
    auto h = par({7, 3});
    const int64_t steps = static_cast<int64_t>(rng.uniform_int(1, 9));
    return grad_check([=] { return project(aligned_window_sum(h, steps, 1), proj); }, P{{"states", h}});
  }
  if (name == "ctc_loss") {
    const int64_t frames = static_cast<int64_t>(rng.uniform_int(1, 8));
    std::vector<int> target;
    do target = random_labels(rng, 4, 5);
    while (ctc_min_frames(target) > frames);
    auto x = parameter(random_tensor({frames, 5}, rng, -2.0, 2.0));
    return grad_check([=] { return ctc_loss(log_softmax(x), target); }, P{{"x", x}});
  }
  throw std::invalid_argument("unknown gradient case " + name);
}

struct StageCase {
  StageKind kind;
  SluVariant variant;
  Feedback mode;
};

const std::map<std::string, StageCase>& stage_cases() {
  static const std::map<std::string, StageCase> cases = [] {
    std::map<std::string, StageCase> m;
    m["stage_basic"] = {StageKind::kBasic, SluVariant::kBase, Feedback::kPredicted};
    const std::pair<const char*, Feedback> modes[] = {{"predicted", Feedback::kPredicted}, {"gold", Feedback::kGold}};
    for (const auto& [suffix, mode] : modes) {
      const std::string s = std::string("_") + suffix;
      m["stage_sequential" + s] = {StageKind::kSequential, SluVariant::kBase, mode};
      m["stage_basic_two_stage" + s] = {StageKind::kBasicTwoStage, SluVariant::kBase, mode};
      m["stage_two_stage" + s] = {StageKind::kTwoStage, SluVariant::kBase, mode};
      m["stage_slu_base" + s] = {StageKind::kSlu, SluVariant::kBase, mode};
      m["stage_slu_tune" + s] = {StageKind::kSlu, SluVariant::kTune, mode};
      m["stage_slu_xt" + s] = {StageKind::kSlu, SluVariant::kXt, mode};
    }
    return m;
  }();
  return cases;
}

GradReport check_stage(const StageCase& c, uint64_t seed) {
  const ModelConfig cfg = tiny_model_config();
  Rng rng(seed);
  auto stage = std::make_shared<Stage<double>>(cfg, c.kind, c.variant, derive_seed(seed, 1));
  const int64_t frames = 12;
  const int64_t enc_frames = conv1d_output_length(frames, cfg.conv_kernel, cfg.conv_stride, cfg.conv_kernel / 2);
  Tensor<double> features = random_tensor({frames, cfg.spec_dim}, rng, -2.0, 2.0);

  auto labels = [&](int vocab) {
    std::vector<int> t;
    do t = random_labels(rng, 3, vocab);
    while (ctc_min_frames(t) > enc_frames);
    return t;
  };
  auto gold = std::make_shared<GoldItems>();
  gold->chars = labels(cfg.char_vocab);
  gold->tokens = labels(cfg.token_vocab);
  gold->annotation = labels(cfg.annotation_vocab);
  gold->concepts = labels(cfg.concept_vocab);

  auto feedback = std::make_shared<std::vector<int>>();
  const uint64_t dropout_seed = derive_seed(seed, 2);
  auto f = [=] {
    Rng mask(dropout_seed);
    StageOutput<double> out = stage->forward(features, c.mode, gold.get(), Phase::kTrain, mask);
    feedback->clear();
    for (const auto& fb : out.feedback) feedback->insert(feedback->end(), fb.begin(), fb.end());
    Var<double> loss = ctc_loss(out.logp, gold->at(stage->level()));
    if (stage->has_concept_decoder()) loss = add(loss, ctc_loss(out.concept_logp, gold->concepts));
    return loss;
  };
  GradCheckOptions opts;
  opts.eps = 1e-4;
  opts.stencil = 4;
  opts.discrete_state = [feedback] { return *feedback; };
  opts.max_coords_per_param = 16;
  opts.sample_seed = derive_seed(seed, 3);
  return grad_check(f, stage->trainable(), opts);
}

const std::vector<std::string>& layer_cases() {
  static const std::vector<std::string> names{"matmul",     "add_mul_scale", "linear",       "add_bias",
                                              "relu",       "tanh",          "sigmoid",      "log_softmax",
                                              "layer_norm", "dropout",       "concat_slice", "select_stack",
                                              "conv1d",     "lstm_cell",     "window_sum",   "aligned_window_sum",
                                              "ctc_loss"};
  return names;
}

}  // namespace

ModelConfig tiny_model_config() {
  ModelConfig c;
  c.spec_dim = 6;
  c.conv_layers = 1;
  c.conv_channels = 6;
  c.conv_kernel = 3;
  c.conv_stride = 2;
  c.lstm_layers = 2;
  c.lstm_hidden = 8;
  c.dec_embed = 4;
  c.dec_hidden = 6;
  c.concept_dec_embed = 5;
  c.concept_dec_hidden = 8;
  c.dropout = 0.5;
  c.window_half_width = 1;
  c.char_vocab = 5;
  c.token_vocab = 5;
  c.annotation_vocab = 6;
  c.concept_vocab = 4;
  return c;
}

std::vector<std::string> gradient_case_names() {
  std::vector<std::string> out = layer_cases();
  for (const auto& [name, c] : stage_cases()) out.push_back(name);
  return out;
}

GradientCase run_gradient_case(const std::string& name, uint64_t seed) {
  auto it = stage_cases().find(name);
  GradReport r = it != stage_cases().end() ? check_stage(it->second, seed) : check_layer(name, seed);
  return {name, seed, std::move(r)};
}

std::vector<GradientCase> run_gradient_suite(int n_seeds, uint64_t base_seed,
                                             const std::function<void(const GradientCase&)>& on_case) {
  std::vector<GradientCase> out;
  for (const auto& name : gradient_case_names()) {
    for (int s = 0; s < n_seeds; ++s) {
      out.push_back(run_gradient_case(name, derive_seed(base_seed, static_cast<uint64_t>(s))));
      if (on_case) on_case(out.back());
    }
  }
  return out;
}

}  // namespace seqslu
