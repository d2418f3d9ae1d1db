#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "seqslu/annotation.hpp"
#include "seqslu/audio.hpp"
#include "seqslu/vocab.hpp"

namespace seqslu {

// One annotated user turn. `audio` is relative to the manifest's directory.
struct Utterance {
  std::string id;
  std::string dialog_id;
  int turn_index = 0;
  std::string audio;
  std::vector<std::string> transcript;
  std::vector<ConceptChunk> chunks;

  std::string annotation() const { return serialize_annotation(transcript, chunks); }
};

// JSON-lines manifest, one utterance per line:
// {"id","dialog_id","turn_index","audio","transcript","annotation"}
std::vector<Utterance> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const std::vector<Utterance>& utts);
std::string manifest_line(const Utterance& u);

// Checks every record: annotation parses and matches the transcript, audio
// exists and decodes. Returns one message per problem (empty when valid).
std::vector<std::string> validate_manifest(const std::filesystem::path& path);

// Symbol sequence of an utterance at a given output level. Chars include the
// space between tokens; concepts are the non-null labels.
std::vector<std::string> target_symbols(const Utterance& u, VocabLevel level);

// Sorted inventory from the training utterances only. For the concept level
// the inventory includes "null". Throws std::invalid_argument on an empty set.
Vocab build_vocab(const std::vector<Utterance>& train, VocabLevel level);
Vocab build_vocab(const std::filesystem::path& train_manifest, VocabLevel level);

// ---- synthetic hotel-reservation corpus ----

struct SynthesisConfig {
  int sample_rate = kDefaultSampleRate;
  int char_min_samples = 960;    // 60 ms
  int char_max_samples = 1600;   // 100 ms
  int gap_samples = 480;         // 30 ms between tokens
  int fade_samples = 80;         // raised-cosine edges of each character
  double tone_amplitude = 0.25;  // per sine
  double snr_db = 20.0;
};

// Character -> (low, high) chord frequencies in Hz. Only 'a'..'z'.
std::pair<double, double> char_frequencies(char c);

// Per-character durations drawn for (transcript, seed), in samples.
std::vector<int> synthesis_char_durations(const std::vector<std::string>& transcript, uint64_t seed,
                                          const SynthesisConfig& cfg = {});

// Each character is a two-sine chord of 60-100 ms; tokens are separated by
// 30 ms gaps; white Gaussian noise at 20 dB below the chord power covers the
// whole signal. Throws std::invalid_argument on characters outside a-z.
AudioWave synthesize_audio(const std::vector<std::string>& transcript, uint64_t seed,
                           const SynthesisConfig& cfg = {});

struct Grammar {
  std::vector<std::string> concepts;  // including null
  std::vector<std::string> tokens;
};
const Grammar& hotel_grammar();

struct Manifest {
  std::filesystem::path dir;
  std::vector<Utterance> train, dev, test;

  std::filesystem::path split_path(std::string_view split) const { return dir / (std::string(split) + ".jsonl"); }
};

// Reads a corpus from its directory or from its train.jsonl; missing dev or
// test manifests give empty splits.
Manifest read_corpus(const std::filesystem::path& dir_or_train);

// Writes <out_dir>/{train,dev,test}.jsonl and <out_dir>/wav/*.wav.
// Dialogs hold 3-8 user turns and are split 80/10/10 by dialog.
Manifest generate_corpus(uint64_t seed, int n_dialogs, const std::filesystem::path& out_dir,
                         const SynthesisConfig& cfg = {});

}  // namespace seqslu
