#include "seqslu/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "seqslu/errors.hpp"

namespace seqslu {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[8] = {'S', 'E', 'Q', 'S', 'L', 'U', 'C', 'K'};

template <typename V>
void put(std::string& out, V v) {
  char buf[sizeof(V)];
  std::memcpy(buf, &v, sizeof(V));
  out.append(buf, sizeof(V));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename V>
  V get() {
    V v;
    std::memcpy(&v, take(sizeof(V)), sizeof(V));
    return v;
  }
  std::string str(size_t n) { return std::string(take(n), n); }
  const char* take(size_t n) {
    if (n > bytes_.size() - pos_) throw DataError("checkpoint: truncated file");
    const char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  size_t pos_ = 0;
};

nlohmann::ordered_json vocab_json(const Vocab& v) {
  // Reserved entries are implied.
  return std::vector<std::string>(v.symbols().begin() + 2, v.symbols().end());
}

}  // namespace

const Vocab& VocabSet::at(VocabLevel level) const {
  switch (level) {
    case VocabLevel::kChars: return chars;
    case VocabLevel::kTokens: return tokens;
    case VocabLevel::kAnnotation: return annotation;
    case VocabLevel::kConcepts: return concepts;
  }
  return chars;
}

void VocabSet::apply_sizes(ModelConfig& cfg) const {
  cfg.char_vocab = chars.size();
  cfg.token_vocab = tokens.size();
  cfg.annotation_vocab = annotation.size();
  cfg.concept_vocab = concepts.size();
}

VocabSet build_vocabs(const std::vector<Utterance>& train) {
  return {build_vocab(train, VocabLevel::kChars), build_vocab(train, VocabLevel::kTokens),
          build_vocab(train, VocabLevel::kAnnotation), build_vocab(train, VocabLevel::kConcepts)};
}

GoldItems encode_gold(const Utterance& u, const VocabSet& vocabs) {
  GoldItems g;
  g.chars = vocabs.chars.encode(target_symbols(u, VocabLevel::kChars));
  g.tokens = vocabs.tokens.encode(target_symbols(u, VocabLevel::kTokens));
  g.annotation = vocabs.annotation.encode(target_symbols(u, VocabLevel::kAnnotation));
  g.concepts = vocabs.concepts.encode(target_symbols(u, VocabLevel::kConcepts));
  return g;
}

nlohmann::ordered_json config_to_json(const ModelConfig& c) {
  return {{"spec_dim", c.spec_dim},
          {"conv_layers", c.conv_layers},
          {"conv_channels", c.conv_channels},
          {"conv_kernel", c.conv_kernel},
          {"conv_stride", c.conv_stride},
          {"lstm_layers", c.lstm_layers},
          {"lstm_hidden", c.lstm_hidden},
          {"dec_embed", c.dec_embed},
          {"dec_hidden", c.dec_hidden},
          {"concept_dec_embed", c.concept_dec_embed},
          {"concept_dec_hidden", c.concept_dec_hidden},
          {"dropout", c.dropout},
          {"window_half_width", c.window_half_width},
          {"char_vocab", c.char_vocab},
          {"token_vocab", c.token_vocab},
          {"annotation_vocab", c.annotation_vocab},
          {"concept_vocab", c.concept_vocab}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  j.at("spec_dim").get_to(c.spec_dim);
  j.at("conv_layers").get_to(c.conv_layers);
  j.at("conv_channels").get_to(c.conv_channels);
  j.at("conv_kernel").get_to(c.conv_kernel);
  j.at("conv_stride").get_to(c.conv_stride);
  j.at("lstm_layers").get_to(c.lstm_layers);
  j.at("lstm_hidden").get_to(c.lstm_hidden);
  j.at("dec_embed").get_to(c.dec_embed);
  j.at("dec_hidden").get_to(c.dec_hidden);
  j.at("concept_dec_embed").get_to(c.concept_dec_embed);
  j.at("concept_dec_hidden").get_to(c.concept_dec_hidden);
  j.at("dropout").get_to(c.dropout);
  j.at("window_half_width").get_to(c.window_half_width);
  j.at("char_vocab").get_to(c.char_vocab);
  j.at("token_vocab").get_to(c.token_vocab);
  j.at("annotation_vocab").get_to(c.annotation_vocab);
  j.at("concept_vocab").get_to(c.concept_vocab);
  c.validate();
  return c;
}

Checkpoint make_checkpoint(const Stage<float>& stage, const VocabSet& vocabs, const FeatureStats& stats,
                           nlohmann::ordered_json info) {
  Checkpoint ck;
  ck.config = stage.config();
  ck.kind = stage.kind();
  ck.variant = stage.variant();
  ck.vocabs = vocabs;
  ck.stats = stats;
  ck.info = std::move(info);
  for (const auto& e : stage.params().entries()) ck.tensors.emplace_back(e.name, e.var.value());
  return ck;
}

Stage<float> restore_stage(const Checkpoint& ck) {
  Stage<float> stage(ck.config, ck.kind, ck.variant);
  auto& entries = stage.params().entries();
  if (entries.size() != ck.tensors.size()) {
    throw DataError("checkpoint: expected " + std::to_string(entries.size()) + " tensors for a " +
                    std::string(to_string(ck.kind)) + " stage, found " + std::to_string(ck.tensors.size()));
  }
  for (size_t i = 0; i < entries.size(); ++i) {
    const auto& [name, t] = ck.tensors[i];
    if (name != entries[i].name || t.shape() != entries[i].var.shape()) {
      throw DataError("checkpoint: tensor '" + name + "' " + shape_str(t.shape()) + " does not match '" +
                      entries[i].name + "' " + shape_str(entries[i].var.shape()));
    }
    entries[i].var.mutable_value() = t;
  }
  return stage;
}

std::string encode_checkpoint(const Checkpoint& ck) {
  nlohmann::ordered_json header;
  header["format_version"] = kCheckpointVersion;
  header["stage"] = to_string(ck.kind);
  header["variant"] = to_string(ck.variant);
  header["config"] = config_to_json(ck.config);
  header["vocab"] = {{"chars", vocab_json(ck.vocabs.chars)},
                     {"tokens", vocab_json(ck.vocabs.tokens)},
                     {"annotation", vocab_json(ck.vocabs.annotation)},
                     {"concepts", vocab_json(ck.vocabs.concepts)}};
  header["info"] = ck.info;
  const std::string text = header.dump();

  std::string out(kMagic, sizeof(kMagic));
  put<uint32_t>(out, kCheckpointVersion);
  put<uint64_t>(out, text.size());
  out += text;

  auto put_tensor = [&](const std::string& name, const Tensor<float>& t) {
    put<uint32_t>(out, static_cast<uint32_t>(name.size()));
    out += name;
    put<uint32_t>(out, static_cast<uint32_t>(t.rank()));
    for (int64_t d : t.shape()) put<int64_t>(out, d);
    out.append(reinterpret_cast<const char*>(t.data()), static_cast<size_t>(t.size()) * sizeof(float));
  };
  auto stats_tensor = [](const std::vector<float>& v) {
    return v.empty() ? Tensor<float>() : Tensor<float>({static_cast<int64_t>(v.size())}, v);
  };
  put<uint32_t>(out, static_cast<uint32_t>(ck.tensors.size() + 2));
  put_tensor("features.mean", stats_tensor(ck.stats.mean));
  put_tensor("features.stddev", stats_tensor(ck.stats.stddev));
  for (const auto& [name, t] : ck.tensors) put_tensor(name, t);
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  Reader in(bytes);
  if (std::memcmp(in.take(sizeof(kMagic)), kMagic, sizeof(kMagic)) != 0) {
    throw DataError("checkpoint: bad magic, not a checkpoint file");
  }
  const auto version = in.get<uint32_t>();
  if (version != kCheckpointVersion) {
    throw DataError("checkpoint: unsupported format version " + std::to_string(version));
  }
  const auto header_len = in.get<uint64_t>();
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(in.str(static_cast<size_t>(header_len)));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint: bad header: ") + e.what());
  }

  Checkpoint ck;
  try {
    ck.kind = parse_stage_kind(header.at("stage").get<std::string>());
    ck.variant = parse_slu_variant(header.at("variant").get<std::string>());
    ck.config = config_from_json(header.at("config"));
    const auto& v = header.at("vocab");
    ck.vocabs = {Vocab(VocabLevel::kChars, v.at("chars").get<std::vector<std::string>>()),
                 Vocab(VocabLevel::kTokens, v.at("tokens").get<std::vector<std::string>>()),
                 Vocab(VocabLevel::kAnnotation, v.at("annotation").get<std::vector<std::string>>()),
                 Vocab(VocabLevel::kConcepts, v.at("concepts").get<std::vector<std::string>>())};
    ck.info = header.at("info");
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint: bad header: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("checkpoint: bad header: ") + e.what());
  }

  const auto count = in.get<uint32_t>();
  for (uint32_t i = 0; i < count; ++i) {
    std::string name = in.str(in.get<uint32_t>());
    const auto rank = in.get<uint32_t>();
    if (rank > 8) throw DataError("checkpoint: tensor '" + name + "' has rank " + std::to_string(rank));
    Shape shape;
    int64_t n = rank == 0 ? 0 : 1;
    for (uint32_t d = 0; d < rank; ++d) {
      const auto dim = in.get<int64_t>();
      if (dim < 1 || dim > (int64_t(1) << 32)) throw DataError("checkpoint: bad extent in '" + name + "'");
      shape.push_back(dim);
      n *= dim;
    }
    std::vector<float> data(static_cast<size_t>(n));
    std::memcpy(data.data(), in.take(data.size() * sizeof(float)), data.size() * sizeof(float));
    if (name == "features.mean") {
      ck.stats.mean = std::move(data);
    } else if (name == "features.stddev") {
      ck.stats.stddev = std::move(data);
    } else {
      ck.tensors.emplace_back(std::move(name), Tensor<float>(std::move(shape), std::move(data)));
    }
  }
  if (!in.done()) throw DataError("checkpoint: trailing bytes");
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  const std::string bytes = encode_checkpoint(ck);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write checkpoint " + path.string());
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw DataError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  try {
    return decode_checkpoint(ss.str());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace seqslu
