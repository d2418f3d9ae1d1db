#include "seqslu/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "seqslu/errors.hpp"
#include "seqslu/rng.hpp"

namespace seqslu {
namespace {

using ojson = nlohmann::ordered_json;

struct Slot {
  std::string label;
  std::vector<std::string> options;
};

// Concept slots and their surface forms.
const std::vector<Slot>& slots() {
  static const std::vector<Slot> s = {
      {"reponse", {"oui", "non"}},
      {"command-tache", {"reserver", "annuler", "modifier"}},
      {"nombre-chambre", {"une chambre", "deux chambres", "trois chambres"}},
      {"chambre-type", {"chambre double", "chambre simple", "double", "simple"}},
      {"sejour-nbnuit", {"une nuit", "deux nuits", "trois nuits"}},
      {"temps-jour", {"lundi", "mardi", "jeudi", "samedi", "dimanche"}},
      {"temps-mois", {"mai", "juin", "juillet", "aout"}},
      {"localisation-ville", {"paris", "lyon", "nice", "lille", "nantes"}},
      {"nombre-personne", {"deux personnes", "trois personnes", "quatre personnes"}},
      {"paiement-montant", {"cent euros", "deux cents euros"}},
      {"objet", {"hotel"}},
  };
  return s;
}

// User-turn templates: {slot}, [optional null word], bare null word.
const std::vector<std::string>& templates() {
  static const std::vector<std::string> t = {
      "[bonjour] je voudrais {command-tache} {nombre-chambre}",
      "{reponse} [merci]",
      "{reponse} {chambre-type}",
      "pour {sejour-nbnuit} a {localisation-ville}",
      "le {temps-jour} [en] {temps-mois}",
      "dans un {objet} a {localisation-ville}",
      "{chambre-type} pour {nombre-personne}",
      "quel est le prix",
      "avec {nombre-chambre} pour {sejour-nbnuit}",
      "est ce possible pour {paiement-montant}",
      "je voudrais {command-tache} le {temps-jour}",
      "{reponse} {localisation-ville} en {temps-mois}",
      "merci",
  };
  return t;
}

const Slot& find_slot(const std::string& name) {
  for (const auto& s : slots())
    if (s.label == name) return s;
  throw std::logic_error("grammar references unknown slot " + name);
}

std::vector<ConceptChunk> expand_template(const std::string& tmpl, Rng& rng) {
  std::vector<ConceptChunk> chunks;
  for (const auto& el : split_whitespace(tmpl)) {
    if (el.front() == '{') {
      const Slot& slot = find_slot(el.substr(1, el.size() - 2));
      const auto& surface = slot.options[rng.uniform_int(slot.options.size())];
      chunks.push_back({split_whitespace(surface), slot.label});
    } else if (el.front() == '[') {
      if (rng.bernoulli(0.5)) chunks.push_back({{el.substr(1, el.size() - 2)}, std::string(kNullConcept)});
    } else {
      chunks.push_back({{el}, std::string(kNullConcept)});
    }
  }
  return chunks;
}

std::string pad_number(int v, int width) {
  std::string s = std::to_string(v);
  return std::string(static_cast<size_t>(std::max(0, width - static_cast<int>(s.size()))), '0') + s;
}

}  // namespace

// ---- manifest I/O ----

std::string manifest_line(const Utterance& u) {
  ojson j;
  j["id"] = u.id;
  j["dialog_id"] = u.dialog_id;
  j["turn_index"] = u.turn_index;
  j["audio"] = u.audio;
  j["transcript"] = join(u.transcript);
  j["annotation"] = u.annotation();
  return j.dump();
}

void write_manifest(const std::filesystem::path& path, const std::vector<Utterance>& utts) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write manifest " + path.string());
  for (const auto& u : utts) out << manifest_line(u) << '\n';
  if (!out) throw DataError("failed writing manifest " + path.string());
}

std::vector<Utterance> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open manifest " + path.string());
  std::vector<Utterance> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (split_whitespace(line).empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    try {
      const auto j = nlohmann::json::parse(line);
      Utterance u;
      u.id = j.at("id").get<std::string>();
      u.dialog_id = j.at("dialog_id").get<std::string>();
      u.turn_index = j.at("turn_index").get<int>();
      u.audio = j.at("audio").get<std::string>();
      const auto transcript = split_whitespace(j.at("transcript").get<std::string>());
      Annotation a = parse_annotation(j.at("annotation").get<std::string>());
      if (a.transcript != transcript) throw DataError("annotation does not match transcript");
      if (u.turn_index < 0) throw DataError("negative turn_index");
      u.transcript = std::move(a.transcript);
      u.chunks = std::move(a.chunks);
      out.push_back(std::move(u));
    } catch (const DataError& e) {
      throw DataError(where + ": " + e.what());
    } catch (const std::exception& e) {
      throw DataError(where + ": " + e.what());
    }
  }
  return out;
}

std::vector<std::string> validate_manifest(const std::filesystem::path& path) {
  std::vector<std::string> problems;
  std::vector<Utterance> utts;
  try {
    utts = read_manifest(path);
  } catch (const DataError& e) {
    problems.emplace_back(e.what());
    return problems;
  }
  std::set<std::string> ids;
  for (const auto& u : utts) {
    if (!ids.insert(u.id).second) problems.push_back(u.id + ": duplicate id");
    try {
      const AudioWave w = read_wav(path.parent_path() / u.audio);
      (void)log_spectrogram(w);
    } catch (const std::exception& e) {
      problems.push_back(u.id + ": " + e.what());
    }
  }
  return problems;
}

// ---- vocabularies ----

std::vector<std::string> target_symbols(const Utterance& u, VocabLevel level) {
  switch (level) {
    case VocabLevel::kChars: {
      std::vector<std::string> out;
      for (char c : join(u.transcript)) out.emplace_back(1, c);
      return out;
    }
    case VocabLevel::kTokens: return u.transcript;
    case VocabLevel::kConcepts: return concept_labels(u.chunks);
    case VocabLevel::kAnnotation: return split_whitespace(u.annotation());
  }
  return {};
}

Vocab build_vocab(const std::vector<Utterance>& train, VocabLevel level) {
  if (train.empty()) throw std::invalid_argument("cannot build a vocabulary from an empty training split");
  std::set<std::string> symbols;
  for (const auto& u : train) {
    if (level == VocabLevel::kConcepts) {
      for (const auto& c : u.chunks) symbols.insert(c.label);
    } else {
      for (auto& s : target_symbols(u, level)) symbols.insert(std::move(s));
    }
  }
  return Vocab(level, std::vector<std::string>(symbols.begin(), symbols.end()));
}

Vocab build_vocab(const std::filesystem::path& train_manifest, VocabLevel level) {
  return build_vocab(read_manifest(train_manifest), level);
}

// ---- synthesis ----

std::pair<double, double> char_frequencies(char c) {
  if (c < 'a' || c > 'z') {
    throw std::invalid_argument(std::string("cannot synthesize character '") + c + "'");
  }
  const int k = c - 'a';
  // 5 x 6 grid of distinct (low, high) pairs on the 100 Hz analysis grid.
  return {500.0 + 300.0 * (k / 6), 3000.0 + 400.0 * (k % 6)};
}

std::vector<int> synthesis_char_durations(const std::vector<std::string>& transcript, uint64_t seed,
                                          const SynthesisConfig& cfg) {
  Rng rng(seed);
  std::vector<int> out;
  for (const auto& tok : transcript)
    for (size_t i = 0; i < tok.size(); ++i)
      out.push_back(static_cast<int>(rng.uniform_int(cfg.char_min_samples, cfg.char_max_samples)));
  return out;
}

AudioWave synthesize_audio(const std::vector<std::string>& transcript, uint64_t seed,
                           const SynthesisConfig& cfg) {
  for (const auto& tok : transcript)
    for (char c : tok) (void)char_frequencies(c);
  const std::vector<int> durations = synthesis_char_durations(transcript, seed, cfg);

  AudioWave wave;
  wave.sample_rate = cfg.sample_rate;
  size_t k = 0;
  for (size_t t = 0; t < transcript.size(); ++t) {
    if (t > 0) wave.samples.insert(wave.samples.end(), static_cast<size_t>(cfg.gap_samples), 0.0f);
    for (char c : transcript[t]) {
      const auto [f1, f2] = char_frequencies(c);
      const int n = durations[k++];
      const int fade = std::min(cfg.fade_samples, n / 2);
      for (int i = 0; i < n; ++i) {
        double env = 1.0;
        if (i < fade) env = 0.5 - 0.5 * std::cos(std::numbers::pi * i / fade);
        if (n - 1 - i < fade) env = std::min(env, 0.5 - 0.5 * std::cos(std::numbers::pi * (n - 1 - i) / fade));
        const double ts = static_cast<double>(i) / cfg.sample_rate;
        const double v = cfg.tone_amplitude * (std::sin(2 * std::numbers::pi * f1 * ts) +
                                               std::sin(2 * std::numbers::pi * f2 * ts));
        wave.samples.push_back(static_cast<float>(env * v));
      }
    }
  }
  // Chord power is 2 * a^2 / 2.
  const double noise_std = cfg.tone_amplitude * std::pow(10.0, -cfg.snr_db / 20.0);
  Rng noise(derive_seed(seed, 1));
  for (auto& s : wave.samples) s = static_cast<float>(std::clamp(s + noise_std * noise.normal(), -1.0, 1.0));
  return wave;
}

const Grammar& hotel_grammar() {
  static const Grammar g = [] {
    std::set<std::string> concepts{std::string(kNullConcept)}, tokens;
    for (const auto& s : slots()) {
      concepts.insert(s.label);
      for (const auto& o : s.options)
        for (auto& t : split_whitespace(o)) tokens.insert(std::move(t));
    }
    for (const auto& t : templates()) {
      for (const auto& el : split_whitespace(t)) {
        if (el.front() == '{') continue;
        tokens.insert(el.front() == '[' ? el.substr(1, el.size() - 2) : el);
      }
    }
    return Grammar{{concepts.begin(), concepts.end()}, {tokens.begin(), tokens.end()}};
  }();
  return g;
}

Manifest read_corpus(const std::filesystem::path& dir_or_train) {
  Manifest m;
  m.dir = std::filesystem::is_directory(dir_or_train) ? dir_or_train : dir_or_train.parent_path();
  const auto train = std::filesystem::is_directory(dir_or_train) ? m.split_path("train") : dir_or_train;
  m.train = read_manifest(train);
  if (std::filesystem::exists(m.split_path("dev"))) m.dev = read_manifest(m.split_path("dev"));
  if (std::filesystem::exists(m.split_path("test"))) m.test = read_manifest(m.split_path("test"));
  return m;
}

Manifest generate_corpus(uint64_t seed, int n_dialogs, const std::filesystem::path& out_dir,
                         const SynthesisConfig& cfg) {
  if (n_dialogs < 1) throw std::invalid_argument("n_dialogs must be at least 1");
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "wav", ec);
  if (ec) throw DataError("cannot create output directory " + out_dir.string() + ": " + ec.message());

  Rng grammar_rng(seed);
  std::vector<std::vector<Utterance>> dialogs(static_cast<size_t>(n_dialogs));
  uint64_t utt_index = 0;
  for (int d = 0; d < n_dialogs; ++d) {
    const std::string dialog_id = "dlg" + pad_number(d, 4);
    const int turns = static_cast<int>(grammar_rng.uniform_int(3, 8));
    for (int t = 0; t < turns; ++t) {
      const auto& tmpl = templates()[grammar_rng.uniform_int(templates().size())];
      Utterance u;
      u.dialog_id = dialog_id;
      u.turn_index = t;
      u.id = dialog_id + "_t" + pad_number(t, 2);
      u.audio = "wav/" + u.id + ".wav";
      u.chunks = expand_template(tmpl, grammar_rng);
      for (const auto& c : u.chunks) u.transcript.insert(u.transcript.end(), c.tokens.begin(), c.tokens.end());
      const AudioWave wave = synthesize_audio(u.transcript, derive_seed(seed, 1000 + utt_index++), cfg);
      write_wav(out_dir / u.audio, wave);
      dialogs[static_cast<size_t>(d)].push_back(std::move(u));
    }
  }

  std::vector<int> order(static_cast<size_t>(n_dialogs));
  for (int d = 0; d < n_dialogs; ++d) order[static_cast<size_t>(d)] = d;
  Rng split_rng(derive_seed(seed, 7));
  split_rng.shuffle(order);
  const int n_train = std::max(1, static_cast<int>(std::lround(0.8 * n_dialogs)));
  const int n_dev = std::min(n_dialogs - n_train, static_cast<int>(std::lround(0.1 * n_dialogs)));
  std::vector<int> split_of(static_cast<size_t>(n_dialogs));
  for (int i = 0; i < n_dialogs; ++i) {
    split_of[static_cast<size_t>(order[static_cast<size_t>(i)])] = i < n_train ? 0 : (i < n_train + n_dev ? 1 : 2);
  }

  Manifest m;
  m.dir = out_dir;
  for (int d = 0; d < n_dialogs; ++d) {
    auto& dst = split_of[static_cast<size_t>(d)] == 0 ? m.train : (split_of[static_cast<size_t>(d)] == 1 ? m.dev : m.test);
    for (auto& u : dialogs[static_cast<size_t>(d)]) dst.push_back(std::move(u));
  }
  write_manifest(m.split_path("train"), m.train);
  write_manifest(m.split_path("dev"), m.dev);
  write_manifest(m.split_path("test"), m.test);
  return m;
}

}  // namespace seqslu
