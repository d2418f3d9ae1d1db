#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "seqslu/audio.hpp"
#include "seqslu/corpus.hpp"
#include "seqslu/models.hpp"

namespace seqslu {

inline constexpr uint32_t kCheckpointVersion = 1;

struct VocabSet {
  Vocab chars{VocabLevel::kChars, {}};
  Vocab tokens{VocabLevel::kTokens, {}};
  Vocab annotation{VocabLevel::kAnnotation, {}};
  Vocab concepts{VocabLevel::kConcepts, {}};

  const Vocab& at(VocabLevel level) const;
  // Copies the four inventory sizes into `cfg`.
  void apply_sizes(ModelConfig& cfg) const;
  friend bool operator==(const VocabSet&, const VocabSet&) = default;
};

VocabSet build_vocabs(const std::vector<Utterance>& train);

// Gold ids at every level. Throws std::out_of_range on symbols outside the
// vocabularies.
GoldItems encode_gold(const Utterance& u, const VocabSet& vocabs);

nlohmann::ordered_json config_to_json(const ModelConfig& cfg);
ModelConfig config_from_json(const nlohmann::json& j);

// Everything needed to rebuild and run a trained stage.
struct Checkpoint {
  ModelConfig config;
  StageKind kind = StageKind::kBasic;
  SluVariant variant = SluVariant::kBase;
  VocabSet vocabs;
  FeatureStats stats;
  nlohmann::ordered_json info = nlohmann::ordered_json::object();
  std::vector<std::pair<std::string, Tensor<float>>> tensors;
};

Checkpoint make_checkpoint(const Stage<float>& stage, const VocabSet& vocabs, const FeatureStats& stats,
                           nlohmann::ordered_json info = nlohmann::ordered_json::object());
Stage<float> restore_stage(const Checkpoint& ckpt);

// Layout: "SEQSLUCK" magic, u32 version, u64 header length, JSON header,
// then per tensor u32 name length, name, u32 rank, i64 dims, f32 data.
// Everything little-endian.
std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
// Throws DataError on malformed files.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace seqslu
