#include "seqslu/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "seqslu/annotation.hpp"
#include "seqslu/errors.hpp"

namespace seqslu {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename V>
V parse_number(const std::string& key, const std::string& value) {
  V out{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw std::invalid_argument("config: bad value '" + value + "' for " + key);
  }
  return out;
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    const double d = std::stod(value, &pos);
    if (pos == value.size()) return d;
  } catch (const std::exception&) {
  }
  throw std::invalid_argument("config: bad value '" + value + "' for " + key);
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw std::invalid_argument("config: bad boolean '" + value + "' for " + key);
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
  ModelConfig& m = cfg.model;
  TrainSchedule& s = cfg.schedule;
  auto as_int = [&] { return parse_number<int>(key, value); };

  if (key == "spec_dim") m.spec_dim = as_int();
  else if (key == "conv_layers") m.conv_layers = as_int();
  else if (key == "conv_channels") m.conv_channels = as_int();
  else if (key == "conv_kernel") m.conv_kernel = as_int();
  else if (key == "conv_stride") m.conv_stride = as_int();
  else if (key == "lstm_layers") m.lstm_layers = as_int();
  else if (key == "lstm_hidden") m.lstm_hidden = as_int();
  else if (key == "dec_embed") m.dec_embed = as_int();
  else if (key == "dec_hidden") m.dec_hidden = as_int();
  else if (key == "concept_dec_embed") m.concept_dec_embed = as_int();
  else if (key == "concept_dec_hidden") m.concept_dec_hidden = as_int();
  else if (key == "dropout") m.dropout = parse_double(key, value);
  else if (key == "window_half_width") m.window_half_width = as_int();
  else if (key == "lr0") s.lr0 = parse_double(key, value);
  else if (key == "total_epochs") s.total_epochs = as_int();
  else if (key == "predicted_warmup_epochs") s.predicted_warmup_epochs = as_int();
  else if (key == "plateau_patience") s.plateau_patience = as_int();
  else if (key == "curriculum_switch_epoch") s.curriculum_switch_epoch = as_int();
  else if (key == "adam_beta1") s.adam_beta1 = parse_double(key, value);
  else if (key == "adam_beta2") s.adam_beta2 = parse_double(key, value);
  else if (key == "adam_eps") s.adam_eps = parse_double(key, value);
  else if (key == "batch_size") s.batch_size = as_int();
  else if (key == "no_curriculum") s.no_curriculum = parse_bool(key, value);
  else if (key == "no_incremental") cfg.plan.no_incremental = parse_bool(key, value);
  else if (key == "variant") cfg.plan.variant = parse_slu_variant(value);
  else if (key == "init_checkpoint") cfg.plan.init_checkpoint = value;
  else if (key == "stages") {
    cfg.plan.stages.clear();
    std::string item;
    std::istringstream in(value);
    while (std::getline(in, item, ',')) cfg.plan.stages.push_back(parse_stage_kind(trim(item)));
    if (cfg.plan.stages.empty()) throw std::invalid_argument("config: empty stage list");
  } else if (key == "seed") cfg.seed = parse_number<uint64_t>(key, value);
  else if (key == "manifest") cfg.manifest = value;
  else if (key == "out") cfg.out = value;
  else throw std::invalid_argument("config: unknown key '" + key + "'");
}

void parse_config_text(const std::string& text, RunConfig& cfg, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = source + ":" + std::to_string(line_no) + ": ";
    if (eq == std::string::npos) throw std::invalid_argument(where + "expected key = value");
    try {
      apply_setting(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(where + e.what());
    }
  }
}

void load_config_file(const std::filesystem::path& path, RunConfig& cfg) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  parse_config_text(ss.str(), cfg, path.string());
}

std::string serialize_config(const RunConfig& cfg) {
  const ModelConfig& m = cfg.model;
  const TrainSchedule& s = cfg.schedule;
  std::vector<std::string> stages;
  for (StageKind k : cfg.plan.stages) stages.emplace_back(to_string(k));
  std::ostringstream o;
  o << "# model\n"
    << "spec_dim = " << m.spec_dim << "\n"
    << "conv_layers = " << m.conv_layers << "\n"
    << "conv_channels = " << m.conv_channels << "\n"
    << "conv_kernel = " << m.conv_kernel << "\n"
    << "conv_stride = " << m.conv_stride << "\n"
    << "lstm_layers = " << m.lstm_layers << "\n"
    << "lstm_hidden = " << m.lstm_hidden << "\n"
    << "dec_embed = " << m.dec_embed << "\n"
    << "dec_hidden = " << m.dec_hidden << "\n"
    << "concept_dec_embed = " << m.concept_dec_embed << "\n"
    << "concept_dec_hidden = " << m.concept_dec_hidden << "\n"
    << "dropout = " << num(m.dropout) << "\n"
    << "window_half_width = " << m.window_half_width << "\n"
    << "# schedule\n"
    << "lr0 = " << num(s.lr0) << "\n"
    << "total_epochs = " << s.total_epochs << "\n"
    << "predicted_warmup_epochs = " << s.predicted_warmup_epochs << "\n"
    << "plateau_patience = " << s.plateau_patience << "\n"
    << "curriculum_switch_epoch = " << s.curriculum_switch_epoch << "\n"
    << "adam_beta1 = " << num(s.adam_beta1) << "\n"
    << "adam_beta2 = " << num(s.adam_beta2) << "\n"
    << "adam_eps = " << num(s.adam_eps) << "\n"
    << "batch_size = " << s.batch_size << "\n"
    << "no_curriculum = " << (s.no_curriculum ? "true" : "false") << "\n"
    << "# plan\n"
    << "stages = " << join(stages, ",") << "\n"
    << "variant = " << to_string(cfg.plan.variant) << "\n"
    << "no_incremental = " << (cfg.plan.no_incremental ? "true" : "false") << "\n";
  if (!cfg.plan.init_checkpoint.empty()) o << "init_checkpoint = " << cfg.plan.init_checkpoint.string() << "\n";
  o << "seed = " << cfg.seed << "\n";
  if (!cfg.manifest.empty()) o << "manifest = " << cfg.manifest << "\n";
  if (!cfg.out.empty()) o << "out = " << cfg.out << "\n";
  return o.str();
}

}  // namespace seqslu
