#include "seqslu/models.hpp"

#include <cmath>
#include <stdexcept>

#include "seqslu/alignment.hpp"

namespace seqslu {
namespace {

uint64_t fnv1a(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <typename T>
Tensor<T> uniform_init(Shape shape, double bound, uint64_t seed) {
  Tensor<T> t(std::move(shape));
  Rng rng(seed);
  for (auto& v : t.values()) v = static_cast<T>(rng.uniform(-bound, bound));
  return t;
}

int64_t linear_count(int64_t in, int64_t out) { return in * out + out; }

int64_t decoder_count(int64_t context, int64_t embed, int64_t hidden, int64_t vocab) {
  return vocab * embed + (context + embed + hidden) * 4 * hidden + 4 * hidden + 2 * hidden +
         linear_count(hidden, vocab);
}

int64_t encoder_count(const ModelConfig& c) {
  int64_t n = 0;
  for (int i = 0; i < c.conv_layers; ++i) {
    const int64_t cin = i == 0 ? c.spec_dim : c.conv_channels;
    n += int64_t(c.conv_channels) * cin * c.conv_kernel + c.conv_channels + 2 * c.conv_channels;
  }
  const int64_t h = c.lstm_hidden / 2;
  for (int l = 0; l < c.lstm_layers; ++l) {
    const int64_t in = l == 0 ? c.conv_channels : c.lstm_hidden;
    n += 2 * (in * 4 * h + h * 4 * h + 4 * h) + 2 * int64_t(c.lstm_hidden);
  }
  return n;
}

bool is_lower_of_slu(std::string_view name) {
  return name.starts_with("encoder.") || name.starts_with("char_dec.") || name.starts_with("tok_dec.");
}

}  // namespace

void ModelConfig::validate() const {
  auto positive = [](int v, const char* what) {
    if (v < 1) throw std::invalid_argument(std::string("model config: ") + what + " must be positive");
  };
  positive(spec_dim, "spec_dim");
  positive(conv_layers, "conv_layers");
  positive(conv_channels, "conv_channels");
  positive(conv_kernel, "conv_kernel");
  positive(conv_stride, "conv_stride");
  positive(lstm_layers, "lstm_layers");
  positive(dec_embed, "dec_embed");
  positive(dec_hidden, "dec_hidden");
  positive(concept_dec_embed, "concept_dec_embed");
  positive(concept_dec_hidden, "concept_dec_hidden");
  if (lstm_hidden < 2 || lstm_hidden % 2 != 0) {
    throw std::invalid_argument("model config: lstm_hidden must be a positive even number");
  }
  if (dec_hidden < 2 || concept_dec_hidden < 2 || conv_channels < 2) {
    throw std::invalid_argument("model config: normalized layers need at least 2 units");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("model config: dropout must be in [0, 1)");
  if (window_half_width < 0) throw std::invalid_argument("model config: window_half_width must be >= 0");
  for (int v : {char_vocab, token_vocab, annotation_vocab, concept_vocab}) {
    if (v < 3) throw std::invalid_argument("model config: vocabularies need BLANK, SOS and one symbol");
  }
}

std::string_view to_string(StageKind kind) {
  switch (kind) {
    case StageKind::kBasic: return "basic";
    case StageKind::kSequential: return "sequential";
    case StageKind::kBasicTwoStage: return "basic_two_stage";
    case StageKind::kTwoStage: return "two_stage";
    case StageKind::kSlu: return "slu";
  }
  return "?";
}

std::string_view to_string(SluVariant variant) {
  switch (variant) {
    case SluVariant::kBase: return "base";
    case SluVariant::kTune: return "tune";
    case SluVariant::kXt: return "xt";
  }
  return "?";
}

std::string_view to_string(Feedback mode) { return mode == Feedback::kGold ? "gold" : "predicted"; }

StageKind parse_stage_kind(std::string_view s) {
  for (auto k : {StageKind::kBasic, StageKind::kSequential, StageKind::kBasicTwoStage, StageKind::kTwoStage,
                 StageKind::kSlu}) {
    if (s == to_string(k)) return k;
  }
  throw std::invalid_argument("unknown stage kind '" + std::string(s) + "'");
}

SluVariant parse_slu_variant(std::string_view s) {
  for (auto v : {SluVariant::kBase, SluVariant::kTune, SluVariant::kXt}) {
    if (s == to_string(v)) return v;
  }
  throw std::invalid_argument("unknown SLU variant '" + std::string(s) + "' (expected base, tune or xt)");
}

VocabLevel output_level(StageKind kind) {
  switch (kind) {
    case StageKind::kBasic:
    case StageKind::kSequential: return VocabLevel::kChars;
    case StageKind::kBasicTwoStage:
    case StageKind::kTwoStage: return VocabLevel::kTokens;
    case StageKind::kSlu: return VocabLevel::kAnnotation;
  }
  return VocabLevel::kChars;
}

const std::vector<int>& GoldItems::at(VocabLevel level) const {
  switch (level) {
    case VocabLevel::kChars: return chars;
    case VocabLevel::kTokens: return tokens;
    case VocabLevel::kAnnotation: return annotation;
    case VocabLevel::kConcepts: return concepts;
  }
  return chars;
}

// ---- ParamStore ----

template <typename T>
Var<T>& ParamStore<T>::add(std::string name, Tensor<T> init) {
  if (contains(name)) throw std::logic_error("duplicate parameter " + name);
  entries_.push_back({std::move(name), parameter(std::move(init))});
  return entries_.back().var;
}

template <typename T>
Var<T>* ParamStore<T>::find(std::string_view name) {
  for (auto& e : entries_)
    if (e.name == name) return &e.var;
  return nullptr;
}

template <typename T>
const Var<T>* ParamStore<T>::find(std::string_view name) const {
  for (const auto& e : entries_)
    if (e.name == name) return &e.var;
  return nullptr;
}

template <typename T>
const Var<T>& ParamStore<T>::get(std::string_view name) const {
  const Var<T>* v = find(name);
  if (!v) throw std::out_of_range("no parameter named " + std::string(name));
  return *v;
}

template <typename T>
int64_t ParamStore<T>::total_size() const {
  int64_t n = 0;
  for (const auto& e : entries_) n += e.var.value().size();
  return n;
}

template <typename T>
const Var<T>& StageOutput<T>::state(std::string_view name) const {
  for (const auto& [n, v] : states)
    if (n == name) return v;
  throw std::out_of_range("stage output has no state " + std::string(name));
}

// ---- Stage ----

template <typename T>
Stage<T>::Stage(const ModelConfig& cfg, StageKind kind, SluVariant variant, uint64_t init_seed)
    : cfg_(cfg), kind_(kind), variant_(variant) {
  cfg_.validate();
  build(init_seed);
  apply_freezing();
}

template <typename T>
void Stage<T>::add_linear(const std::string& prefix, int in, int out, uint64_t seed) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  params_.add(prefix + ".weight", uniform_init<T>({in, out}, bound, derive_seed(seed, fnv1a(prefix + ".weight"))));
  params_.add(prefix + ".bias", uniform_init<T>({out}, bound, derive_seed(seed, fnv1a(prefix + ".bias"))));
}

template <typename T>
void Stage<T>::add_decoder(const std::string& prefix, int context_dim, int embed, int hidden, int vocab,
                           uint64_t seed) {
  auto s = [&](const std::string& n) { return derive_seed(seed, fnv1a(prefix + n)); };
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  // The context is a sum over 2w + 1 frames.
  const double ctx_bound = 1.0 / std::sqrt(static_cast<double>(context_dim) * (2 * cfg_.window_half_width + 1));
  params_.add(prefix + ".embed", uniform_init<T>({vocab, embed}, 1.0, s(".embed")));
  params_.add(prefix + ".lstm.wx_ctx", uniform_init<T>({context_dim, 4 * hidden}, ctx_bound, s(".lstm.wx_ctx")));
  params_.add(prefix + ".lstm.wx_emb",
              uniform_init<T>({embed, 4 * hidden}, 1.0 / std::sqrt(static_cast<double>(embed)), s(".lstm.wx_emb")));
  params_.add(prefix + ".lstm.wh", uniform_init<T>({hidden, 4 * hidden}, bound, s(".lstm.wh")));
  Tensor<T> bias = uniform_init<T>({4 * hidden}, bound, s(".lstm.bias"));
  for (int j = hidden; j < 2 * hidden; ++j) bias[j] += T(1);  // forget gate
  params_.add(prefix + ".lstm.bias", std::move(bias));
  params_.add(prefix + ".norm.gain", Tensor<T>({hidden}, T(1)));
  params_.add(prefix + ".norm.bias", Tensor<T>({hidden}));
  add_linear(prefix + ".out", hidden, vocab, seed);
}

template <typename T>
void Stage<T>::build(uint64_t seed) {
  const ModelConfig& c = cfg_;
  for (int i = 0; i < c.conv_layers; ++i) {
    const std::string p = "encoder.conv" + std::to_string(i);
    const int cin = i == 0 ? c.spec_dim : c.conv_channels;
    const double bound = 1.0 / std::sqrt(static_cast<double>(cin * c.conv_kernel));
    params_.add(p + ".weight", uniform_init<T>({c.conv_channels, cin, c.conv_kernel}, bound,
                                               derive_seed(seed, fnv1a(p + ".weight"))));
    params_.add(p + ".bias", uniform_init<T>({c.conv_channels}, bound, derive_seed(seed, fnv1a(p + ".bias"))));
    params_.add(p + ".norm.gain", Tensor<T>({c.conv_channels}, T(1)));
    params_.add(p + ".norm.bias", Tensor<T>({c.conv_channels}));
  }
  const int h = c.lstm_hidden / 2;
  for (int l = 0; l < c.lstm_layers; ++l) {
    const std::string p = "encoder.lstm" + std::to_string(l);
    const int in = l == 0 ? c.conv_channels : c.lstm_hidden;
    const double bound = 1.0 / std::sqrt(static_cast<double>(h));
    for (const char* dir : {".fwd", ".bwd"}) {
      const std::string q = p + dir;
      params_.add(q + ".wx", uniform_init<T>({in, 4 * h}, 1.0 / std::sqrt(static_cast<double>(in)),
                                             derive_seed(seed, fnv1a(q + ".wx"))));
      params_.add(q + ".wh", uniform_init<T>({h, 4 * h}, bound, derive_seed(seed, fnv1a(q + ".wh"))));
      Tensor<T> bias = uniform_init<T>({4 * h}, bound, derive_seed(seed, fnv1a(q + ".bias")));
      for (int j = h; j < 2 * h; ++j) bias[j] += T(1);
      params_.add(q + ".bias", std::move(bias));
    }
    params_.add(p + ".norm.gain", Tensor<T>({c.lstm_hidden}, T(1)));
    params_.add(p + ".norm.bias", Tensor<T>({c.lstm_hidden}));
  }

  switch (kind_) {
    case StageKind::kBasic:
      add_linear("char_head", c.lstm_hidden, c.char_vocab, seed);
      break;
    case StageKind::kSequential:
      add_decoder("char_dec", c.lstm_hidden, c.dec_embed, c.dec_hidden, c.char_vocab, seed);
      break;
    case StageKind::kBasicTwoStage:
      add_decoder("char_dec", c.lstm_hidden, c.dec_embed, c.dec_hidden, c.char_vocab, seed);
      add_linear("tok_head", c.dec_hidden, c.token_vocab, seed);
      break;
    case StageKind::kTwoStage:
    case StageKind::kSlu:
      add_decoder("char_dec", c.lstm_hidden, c.dec_embed, c.dec_hidden, c.char_vocab, seed);
      add_decoder("tok_dec", c.dec_hidden, c.dec_embed, c.dec_hidden, c.token_vocab, seed);
      if (kind_ == StageKind::kSlu) {
        add_decoder("slu_dec", c.dec_hidden, c.concept_dec_embed, c.concept_dec_hidden, c.annotation_vocab, seed);
        if (variant_ == SluVariant::kXt) {
          add_decoder("xt_dec", c.concept_dec_hidden, c.concept_dec_embed, c.concept_dec_hidden, c.concept_vocab,
                      seed);
        }
      }
      break;
  }
}

template <typename T>
bool Stage<T>::is_frozen(std::string_view name) const {
  return kind_ == StageKind::kSlu && variant_ != SluVariant::kTune && is_lower_of_slu(name);
}

template <typename T>
void Stage<T>::apply_freezing() {
  for (auto& e : params_.entries()) e.var.set_requires_grad(!is_frozen(e.name));
}

template <typename T>
std::vector<std::pair<std::string, Var<T>>> Stage<T>::trainable() const {
  std::vector<std::pair<std::string, Var<T>>> out;
  for (const auto& e : params_.entries())
    if (!is_frozen(e.name)) out.emplace_back(e.name, e.var);
  return out;
}

template <typename T>
Var<T> Stage<T>::run_lstm_direction(const std::string& prefix, const Var<T>& x, bool reverse) const {
  const Var<T>& wh = params_.get(prefix + ".wh");
  const int64_t h = wh.rows();
  const int64_t n = x.rows();
  Var<T> gates = linear(x, params_.get(prefix + ".wx"), params_.get(prefix + ".bias"));
  Var<T> hs = constant(Tensor<T>({1, h}));
  Var<T> cs = constant(Tensor<T>({1, h}));
  std::vector<Var<T>> outs(static_cast<size_t>(n));
  for (int64_t k = 0; k < n; ++k) {
    const int64_t t = reverse ? n - 1 - k : k;
    Var<T> hc = lstm_cell(select_row(gates, t), hs, cs, wh);
    hs = slice_cols(hc, 0, h);
    cs = slice_cols(hc, h, 2 * h);
    outs[static_cast<size_t>(t)] = hs;
  }
  return stack_rows(outs);
}

template <typename T>
Var<T> Stage<T>::encode(const Var<T>& input, Phase phase, Rng& rng) const {
  const ModelConfig& c = cfg_;
  Var<T> x = input;
  for (int i = 0; i < c.conv_layers; ++i) {
    const std::string p = "encoder.conv" + std::to_string(i);
    x = conv1d(x, params_.get(p + ".weight"), params_.get(p + ".bias"), c.conv_stride, c.conv_kernel / 2);
    x = relu(x);
    x = layer_norm(x, params_.get(p + ".norm.gain"), params_.get(p + ".norm.bias"));
    x = dropout(x, c.dropout, phase, rng);
  }
  for (int l = 0; l < c.lstm_layers; ++l) {
    const std::string p = "encoder.lstm" + std::to_string(l);
    Var<T> fwd = run_lstm_direction(p + ".fwd", x, false);
    Var<T> bwd = run_lstm_direction(p + ".bwd", x, true);
    x = concat_cols(fwd, bwd);
    x = layer_norm(x, params_.get(p + ".norm.gain"), params_.get(p + ".norm.bias"));
    x = dropout(x, c.dropout, phase, rng);
  }
  return x;
}

template <typename T>
typename Stage<T>::DecoderResult Stage<T>::run_decoder(const std::string& prefix, const Var<T>& inputs,
                                                       Feedback mode, const std::vector<int>* gold, Phase phase,
                                                       Rng& rng) const {
  const int64_t n = inputs.rows();
  if (mode == Feedback::kGold) {
    if (!gold) throw std::invalid_argument(prefix + ": gold feedback requested without gold items");
    if (static_cast<int64_t>(gold->size()) > n) {
      throw std::invalid_argument(prefix + ": " + std::to_string(gold->size()) + " gold items exceed " +
                                  std::to_string(n) + " frames");
    }
  }
  const Var<T>& embed = params_.get(prefix + ".embed");
  const Var<T>& wh = params_.get(prefix + ".lstm.wh");
  const Var<T>& gain = params_.get(prefix + ".norm.gain");
  const Var<T>& nbias = params_.get(prefix + ".norm.bias");
  const Var<T>& out_w = params_.get(prefix + ".out.weight");
  const Var<T>& out_b = params_.get(prefix + ".out.bias");
  const int64_t h = wh.rows();

  // Frame-synchronous: one decoding step per input frame, so the ratio
  // alignment maps step t to frame t.
  Var<T> context = aligned_window_sum(inputs, n, cfg_.window_half_width);
  Var<T> ctx_gates = linear(context, params_.get(prefix + ".lstm.wx_ctx"), params_.get(prefix + ".lstm.bias"));
  Var<T> emb_gates = matmul(embed, params_.get(prefix + ".lstm.wx_emb"));

  DecoderResult res;
  res.feedback.reserve(static_cast<size_t>(n));
  Var<T> hs = constant(Tensor<T>({1, h}));
  Var<T> cs = constant(Tensor<T>({1, h}));
  std::vector<Var<T>> ys(static_cast<size_t>(n)), outs;
  int prev = kSosId;
  for (int64_t t = 0; t < n; ++t) {
    if (mode == Feedback::kGold) {
      const auto m = static_cast<int64_t>(gold->size());
      const int64_t g = gold_feedback_index(t, m, n);
      prev = (m == 0 || g == 0) ? kSosId : (*gold)[static_cast<size_t>(g - 1)];
    }
    res.feedback.push_back(prev);
    Var<T> gates = add(select_row(ctx_gates, t), select_row(emb_gates, prev));
    Var<T> hc = lstm_cell(gates, hs, cs, wh);
    hs = slice_cols(hc, 0, h);
    cs = slice_cols(hc, h, 2 * h);
    Var<T> y = dropout(layer_norm(hs, gain, nbias), cfg_.dropout, phase, rng);
    ys[static_cast<size_t>(t)] = y;
    if (mode == Feedback::kPredicted) {
      Var<T> o = log_softmax(linear(y, out_w, out_b));
      prev = static_cast<int>(argmax_row(o.value(), 0));
      outs.push_back(o);
    }
  }
  res.states = stack_rows(ys);
  res.logp = mode == Feedback::kPredicted ? stack_rows(outs) : log_softmax(linear(res.states, out_w, out_b));
  return res;
}

template <typename T>
StageOutput<T> Stage<T>::forward(const Tensor<T>& features, Feedback mode, const GoldItems* gold, Phase phase,
                                 Rng& rng) const {
  if (features.rows() < 1) throw std::invalid_argument("forward: empty input");
  if (features.cols() != cfg_.spec_dim) {
    throw std::invalid_argument("forward: expected " + std::to_string(cfg_.spec_dim) + " features per frame, got " +
                                std::to_string(features.cols()));
  }
  if (mode == Feedback::kGold && !gold) throw std::invalid_argument("forward: gold mode needs gold items");

  StageOutput<T> out;
  Var<T> enc = encode(constant(features), phase, rng);
  out.states.emplace_back("encoder", enc);
  if (kind_ == StageKind::kBasic) {
    out.logp = log_softmax(linear(enc, params_.get("char_head.weight"), params_.get("char_head.bias")));
    return out;
  }

  auto level_gold = [&](VocabLevel level) { return gold ? &gold->at(level) : nullptr; };
  auto run = [&](const std::string& name, const Var<T>& in, VocabLevel level) {
    DecoderResult r = run_decoder(name, in, mode, level_gold(level), phase, rng);
    out.states.emplace_back(name, r.states);
    out.feedback.push_back(std::move(r.feedback));
    return r;
  };

  DecoderResult chars = run("char_dec", enc, VocabLevel::kChars);
  switch (kind_) {
    case StageKind::kSequential:
      out.logp = chars.logp;
      break;
    case StageKind::kBasicTwoStage:
      out.logp = log_softmax(linear(chars.states, params_.get("tok_head.weight"), params_.get("tok_head.bias")));
      break;
    case StageKind::kTwoStage:
    case StageKind::kSlu: {
      DecoderResult toks = run("tok_dec", chars.states, VocabLevel::kTokens);
      if (kind_ == StageKind::kTwoStage) {
        out.logp = toks.logp;
        break;
      }
      DecoderResult slu = run("slu_dec", toks.states, VocabLevel::kAnnotation);
      out.logp = slu.logp;
      if (variant_ == SluVariant::kXt) out.concept_logp = run("xt_dec", slu.states, VocabLevel::kConcepts).logp;
      break;
    }
    case StageKind::kBasic:
      break;
  }
  return out;
}

template <typename T>
template <typename U>
Stage<U> Stage<T>::convert() const {
  Stage<U> s(cfg_, kind_, variant_, 0);
  for (auto& e : s.params_.entries()) e.var.mutable_value() = params_.get(e.name).value().template cast<U>();
  return s;
}

// ---- free functions ----

template <typename T>
Var<T> basic_forward(const Stage<T>& stage, const Tensor<T>& features, Phase phase, Rng& rng) {
  if (stage.kind() != StageKind::kBasic) throw std::invalid_argument("basic_forward: stage is not a basic model");
  return stage.forward(features, Feedback::kPredicted, nullptr, phase, rng).logp;
}

template <typename T>
Var<T> sequential_forward(const Stage<T>& stage, const Tensor<T>& features, Feedback mode, const GoldItems* gold,
                          Phase phase, Rng& rng) {
  if (stage.kind() != StageKind::kSequential) {
    throw std::invalid_argument("sequential_forward: stage is not a sequential model");
  }
  return stage.forward(features, mode, gold, phase, rng).logp;
}

bool transition_allowed(StageKind from, StageKind to) {
  switch (to) {
    case StageKind::kBasic: return false;
    case StageKind::kSequential: return from == StageKind::kBasic;
    case StageKind::kBasicTwoStage: return from == StageKind::kSequential;
    case StageKind::kTwoStage: return from == StageKind::kSequential || from == StageKind::kBasicTwoStage;
    case StageKind::kSlu: return from == StageKind::kTwoStage;
  }
  return false;
}

template <typename T>
Stage<T> derive_stage(const Stage<T>& prev, StageKind next, SluVariant variant, uint64_t init_seed) {
  if (!transition_allowed(prev.kind(), next)) {
    throw std::invalid_argument("cannot stack a " + std::string(to_string(next)) + " stage on a " +
                                std::string(to_string(prev.kind())) + " stage");
  }
  Stage<T> out(prev.config(), next, variant, init_seed);
  for (auto& e : out.params().entries()) {
    const Var<T>* src = prev.params().find(e.name);
    if (src && src->shape() == e.var.shape()) e.var.mutable_value() = src->value();
  }
  return out;
}

template <typename T>
Stage<T> stack_two_stage(const Stage<T>& char_stage, uint64_t init_seed) {
  if (output_level(char_stage.kind()) != VocabLevel::kChars || char_stage.kind() == StageKind::kBasic) {
    throw std::invalid_argument("stack_two_stage: needs a character-level sequential stage");
  }
  return derive_stage(char_stage, StageKind::kTwoStage, SluVariant::kBase, init_seed);
}

template <typename T>
Stage<T> stack_slu(const Stage<T>& two_stage, SluVariant variant, uint64_t init_seed) {
  if (two_stage.kind() != StageKind::kTwoStage) {
    throw std::invalid_argument("stack_slu: needs a token-level 2-stage model");
  }
  return derive_stage(two_stage, StageKind::kSlu, variant, init_seed);
}

int64_t count_params(const ModelConfig& c, StageKind kind, SluVariant variant) {
  c.validate();
  const int64_t enc = encoder_count(c);
  const int64_t char_dec = decoder_count(c.lstm_hidden, c.dec_embed, c.dec_hidden, c.char_vocab);
  const int64_t tok_dec = decoder_count(c.dec_hidden, c.dec_embed, c.dec_hidden, c.token_vocab);
  switch (kind) {
    case StageKind::kBasic: return enc + linear_count(c.lstm_hidden, c.char_vocab);
    case StageKind::kSequential: return enc + char_dec;
    case StageKind::kBasicTwoStage: return enc + char_dec + linear_count(c.dec_hidden, c.token_vocab);
    case StageKind::kTwoStage: return enc + char_dec + tok_dec;
    case StageKind::kSlu: {
      int64_t n = enc + char_dec + tok_dec +
                  decoder_count(c.dec_hidden, c.concept_dec_embed, c.concept_dec_hidden, c.annotation_vocab);
      if (variant == SluVariant::kXt) {
        n += decoder_count(c.concept_dec_hidden, c.concept_dec_embed, c.concept_dec_hidden, c.concept_vocab);
      }
      return n;
    }
  }
  return 0;
}

template class ParamStore<float>;
template class ParamStore<double>;
template struct StageOutput<float>;
template struct StageOutput<double>;
template class Stage<float>;
template class Stage<double>;
template Stage<double> Stage<float>::convert<double>() const;
template Stage<float> Stage<double>::convert<float>() const;
template Stage<float> Stage<float>::convert<float>() const;
template Stage<double> Stage<double>::convert<double>() const;

#define SEQSLU_INSTANTIATE_MODELS(T)                                                                    \
  template Var<T> basic_forward(const Stage<T>&, const Tensor<T>&, Phase, Rng&);                        \
  template Var<T> sequential_forward(const Stage<T>&, const Tensor<T>&, Feedback, const GoldItems*, Phase, \
                                     Rng&);                                                             \
  template Stage<T> derive_stage(const Stage<T>&, StageKind, SluVariant, uint64_t);                     \
  template Stage<T> stack_two_stage(const Stage<T>&, uint64_t);                                         \
  template Stage<T> stack_slu(const Stage<T>&, SluVariant, uint64_t);

SEQSLU_INSTANTIATE_MODELS(float)
SEQSLU_INSTANTIATE_MODELS(double)

}  // namespace seqslu
