#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "seqslu/models.hpp"
#include "seqslu/training.hpp"

namespace seqslu {

// Everything a command needs to reproduce a run.
struct RunConfig {
  ModelConfig model;
  TrainSchedule schedule;
  StagePlan plan;
  uint64_t seed = 1;
  std::string manifest;
  std::string out;
};

// One "key = value" setting, e.g. "lstm_hidden = 128" or
// "stages = basic,sequential". Throws std::invalid_argument on unknown keys
// or malformed values.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);

// Plain text: one "key = value" per line, '#' starts a comment.
void load_config_file(const std::filesystem::path& path, RunConfig& cfg);
void parse_config_text(const std::string& text, RunConfig& cfg, const std::string& source = "config");

// Complete snapshot in the same format; parse_config_text reads it back.
std::string serialize_config(const RunConfig& cfg);

}  // namespace seqslu
