#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "seqslu/autodiff.hpp"
#include "seqslu/ops.hpp"
#include "seqslu/vocab.hpp"

namespace seqslu {

// Layer sizes. Vocabulary sizes include BLANK and SOS.
struct ModelConfig {
  int spec_dim = 81;
  int conv_layers = 1;
  int conv_channels = 81;
  int conv_kernel = 11;
  int conv_stride = 2;
  int lstm_layers = 2;
  // Width of each bidirectional layer's output; each direction has half.
  int lstm_hidden = 256;
  int dec_embed = 150;
  int dec_hidden = 300;
  int concept_dec_embed = 300;
  int concept_dec_hidden = 600;
  double dropout = 0.5;
  int window_half_width = 1;

  // Sizes of the bundled synthetic corpus inventories.
  int char_vocab = 25;
  int token_vocab = 52;
  int annotation_vocab = 65;
  int concept_vocab = 14;

  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

enum class StageKind { kBasic, kSequential, kBasicTwoStage, kTwoStage, kSlu };
enum class SluVariant { kBase, kTune, kXt };
enum class Feedback { kPredicted, kGold };

std::string_view to_string(StageKind kind);
std::string_view to_string(SluVariant variant);
std::string_view to_string(Feedback mode);
StageKind parse_stage_kind(std::string_view s);
SluVariant parse_slu_variant(std::string_view s);

// Output level of the stage's top decoder or head.
VocabLevel output_level(StageKind kind);

// Gold label ids per level; only the levels a stage decodes are read.
struct GoldItems {
  std::vector<int> chars, tokens, annotation, concepts;

  const std::vector<int>& at(VocabLevel level) const;
};

template <typename T>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Var<T> var;
  };

  Var<T>& add(std::string name, Tensor<T> init);
  bool contains(std::string_view name) const { return find(name) != nullptr; }
  const Var<T>& get(std::string_view name) const;
  Var<T>* find(std::string_view name);
  const Var<T>* find(std::string_view name) const;
  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<Entry>& entries() { return entries_; }
  int64_t total_size() const;

 private:
  std::vector<Entry> entries_;
};

template <typename T>
struct StageOutput {
  Var<T> logp;          // N' x V at the stage's output level
  Var<T> concept_logp;  // XT concept decoder; undefined for other stages
  // Per-decoder realized feedback items (predicted or gold), bottom-up.
  std::vector<std::vector<int>> feedback;
  // Post-normalization states of each component, keyed "encoder",
  // "char_dec", "tok_dec", "slu_dec", "xt_dec".
  std::vector<std::pair<std::string, Var<T>>> states;

  const Var<T>& state(std::string_view name) const;
};

// One trainable model of the incremental chain: encoder plus the heads and
// decoders its kind stacks on top.
template <typename T>
class Stage {
 public:
  Stage(const ModelConfig& cfg, StageKind kind, SluVariant variant = SluVariant::kBase,
        uint64_t init_seed = 0);

  StageKind kind() const { return kind_; }
  SluVariant variant() const { return variant_; }
  const ModelConfig& config() const { return cfg_; }
  VocabLevel level() const { return output_level(kind_); }
  bool has_concept_decoder() const { return kind_ == StageKind::kSlu && variant_ == SluVariant::kXt; }

  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }
  // Parameters whose gradients are computed (frozen lower stages excluded).
  std::vector<std::pair<std::string, Var<T>>> trainable() const;
  bool is_frozen(std::string_view name) const;

  // features: T x spec_dim (normalized). `gold` is required when mode is gold.
  StageOutput<T> forward(const Tensor<T>& features, Feedback mode, const GoldItems* gold, Phase phase,
                         Rng& rng) const;

  // Copy of this stage in another precision.
  template <typename U>
  Stage<U> convert() const;

 private:
  template <typename U>
  friend class Stage;

  void build(uint64_t init_seed);
  void add_decoder(const std::string& prefix, int context_dim, int embed, int hidden, int vocab, uint64_t seed);
  void add_linear(const std::string& prefix, int in, int out, uint64_t seed);
  void apply_freezing();

  Var<T> encode(const Var<T>& x, Phase phase, Rng& rng) const;
  Var<T> run_lstm_direction(const std::string& prefix, const Var<T>& x, bool reverse) const;
  struct DecoderResult {
    Var<T> states;
    Var<T> logp;
    std::vector<int> feedback;
  };
  DecoderResult run_decoder(const std::string& prefix, const Var<T>& inputs, Feedback mode,
                            const std::vector<int>* gold, Phase phase, Rng& rng) const;

  ModelConfig cfg_;
  StageKind kind_;
  SluVariant variant_;
  ParamStore<T> params_;
};

// Encoder + linear + log-softmax over characters.
template <typename T>
Var<T> basic_forward(const Stage<T>& stage, const Tensor<T>& features, Phase phase, Rng& rng);

// Encoder + frame-synchronous character decoder with prediction feedback.
template <typename T>
Var<T> sequential_forward(const Stage<T>& stage, const Tensor<T>& features, Feedback mode,
                          const GoldItems* gold, Phase phase, Rng& rng);

// Builds `next` on top of `prev`: every parameter `next` shares with `prev`
// is copied, the rest is freshly initialized from `init_seed`. Throws
// std::invalid_argument for transitions outside the incremental chain.
template <typename T>
Stage<T> derive_stage(const Stage<T>& prev, StageKind next, SluVariant variant, uint64_t init_seed);

// Token-level sequential decoder stacked on a trained character stage.
template <typename T>
Stage<T> stack_two_stage(const Stage<T>& char_stage, uint64_t init_seed);

// Concept decoder (plus the concept-only XT decoder) stacked on a 2-stage model.
template <typename T>
Stage<T> stack_slu(const Stage<T>& two_stage, SluVariant variant, uint64_t init_seed);

// Analytic parameter count.
int64_t count_params(const ModelConfig& cfg, StageKind kind, SluVariant variant = SluVariant::kBase);

bool transition_allowed(StageKind from, StageKind to);

}  // namespace seqslu
