#include "aga/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "aga/errors.hpp"

namespace aga {

std::string to_string(Extractor extractor) { return extractor == Extractor::kCnn ? "cnn" : "lstm"; }

Extractor parse_extractor(const std::string& text) {
  if (text == "cnn") return Extractor::kCnn;
  if (text == "lstm") return Extractor::kLstm;
  throw ConfigError("extractor", "expected cnn or lstm, got '" + text + "'");
}

std::string format_double(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key, "expected a number, got '" + value + "'");
  }
}

std::uint64_t to_unsigned(const std::string& key, const std::string& value) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ConfigError(key, "expected a non-negative integer, got '" + value + "'");
  }
  return v;
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError(key, "expected true or false, got '" + value + "'");
}

std::vector<std::size_t> to_list(const std::string& key, const std::string& value) {
  std::vector<std::size_t> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_unsigned(key, trim(item)));
  if (out.empty()) throw ConfigError(key, "expected a comma-separated list");
  return out;
}

std::string join(const std::vector<std::size_t>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(items[i]);
  }
  return out;
}

}  // namespace

std::size_t ModelConfig::feature_dim() const {
  return extractor == Extractor::kCnn ? filters * windows.size() : hidden;
}

void ModelConfig::validate() const {
  if (embed_dim == 0) throw ConfigError("embed_dim", "must be positive");
  if (extractor == Extractor::kCnn) {
    if (windows.empty()) throw ConfigError("windows", "needs at least one window size");
    for (std::size_t w : windows) {
      if (w == 0) throw ConfigError("windows", "window sizes must be positive");
    }
    if (filters == 0) throw ConfigError("filters", "must be positive");
  } else if (hidden == 0) {
    throw ConfigError("hidden", "must be positive");
  }
  if (classes < 2) throw ConfigError("classes", "need at least two classes");
  if (vocab_size < 2) throw ConfigError("vocab_size", "must include pad and unk");
  if (!(epsilon >= 0.0 && epsilon <= 0.5)) throw ConfigError("epsilon", "must lie in [0, 0.5]");
  if (activation != "relu" && activation != "tanh") throw ConfigError("activation", "expected relu or tanh");
  if (head_layers == 0) throw ConfigError("head_layers", "must be at least 1");
  if (!(dropout.beta >= 0.0 && dropout.beta < 1.0)) throw ConfigError("beta", "must lie in [0, 1)");
  if (!(dropout.c_sup >= 1.0)) throw ConfigError("c_sup", "must be >= 1");
}

void TrainConfig::validate() const {
  if (!(lr >= 0.0)) throw ConfigError("lr", "must be non-negative");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) throw ConfigError("adam_beta1", "must lie in [0, 1)");
  if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) throw ConfigError("adam_beta2", "must lie in [0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps", "must be positive");
  if (epochs == 0) throw ConfigError("epochs", "must be positive");
  if (batch_size == 0) throw ConfigError("batch_size", "must be positive");
  if (seeds == 0) throw ConfigError("seeds", "must be positive");
}

void apply_setting(RunConfig& config, const std::string& key, const std::string& raw) {
  const std::string value = trim(raw);
  ModelConfig& m = config.model;
  TrainConfig& t = config.train;
  if (key == "extractor") m.extractor = parse_extractor(value);
  else if (key == "embed_dim") m.embed_dim = to_unsigned(key, value);
  else if (key == "max_len") m.max_len = to_unsigned(key, value);
  else if (key == "windows") m.windows = to_list(key, value);
  else if (key == "filters") m.filters = to_unsigned(key, value);
  else if (key == "hidden") m.hidden = to_unsigned(key, value);
  else if (key == "classes") m.classes = to_unsigned(key, value);
  else if (key == "vocab_size") m.vocab_size = to_unsigned(key, value);
  else if (key == "epsilon") m.epsilon = to_double(key, value);
  else if (key == "gi") m.gi = to_bool(key, value);
  else if (key == "activation") m.activation = value;
  else if (key == "head_layers") m.head_layers = to_unsigned(key, value);
  else if (key == "freeze_embeddings") m.freeze_embeddings = to_bool(key, value);
  else if (key == "dropout") {
    try {
      m.dropout.kind = parse_dropout_kind(value);
    } catch (const ContractError&) {
      throw ConfigError(key, "expected vanilla, leaky or none, got '" + value + "'");
    }
  } else if (key == "beta") m.dropout.beta = to_double(key, value);
  else if (key == "c_sup") m.dropout.c_sup = to_double(key, value);
  else if (key == "seed") m.seed = to_unsigned(key, value);
  else if (key == "lr") t.lr = to_double(key, value);
  else if (key == "adam_beta1") t.adam_beta1 = to_double(key, value);
  else if (key == "adam_beta2") t.adam_beta2 = to_double(key, value);
  else if (key == "adam_eps") t.adam_eps = to_double(key, value);
  else if (key == "epochs") t.epochs = to_unsigned(key, value);
  else if (key == "batch_size") t.batch_size = to_unsigned(key, value);
  else if (key == "folds") t.folds = to_unsigned(key, value);
  else if (key == "seeds") t.seeds = to_unsigned(key, value);
  else if (key == "paired_ttest") t.paired_ttest = to_bool(key, value);
  else if (key == "embedding_file") t.embedding_file = value;
  else throw ConfigError(key, "unknown key");
}

Settings parse_settings(const std::string& text, const std::string& source) {
  Settings out;
  std::stringstream ss(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    const std::string body = trim(line);
    if (body.empty() || body[0] == '#') continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ParseError(source, line_no, "expected key=value");
    out.emplace_back(trim(body.substr(0, eq)), trim(body.substr(eq + 1)));
  }
  return out;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config", "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  for (const auto& [key, value] : parse_settings(buf.str(), path.string())) apply_setting(base, key, value);
  return base;
}

Settings model_settings(const ModelConfig& m) {
  return {
      {"extractor", to_string(m.extractor)},
      {"embed_dim", std::to_string(m.embed_dim)},
      {"max_len", std::to_string(m.max_len)},
      {"windows", join(m.windows)},
      {"filters", std::to_string(m.filters)},
      {"hidden", std::to_string(m.hidden)},
      {"classes", std::to_string(m.classes)},
      {"vocab_size", std::to_string(m.vocab_size)},
      {"epsilon", format_double(m.epsilon)},
      {"gi", m.gi ? "true" : "false"},
      {"activation", m.activation},
      {"head_layers", std::to_string(m.head_layers)},
      {"freeze_embeddings", m.freeze_embeddings ? "true" : "false"},
      {"dropout", to_string(m.dropout.kind)},
      {"beta", format_double(m.dropout.beta)},
      {"c_sup", format_double(m.dropout.c_sup)},
      {"seed", std::to_string(m.seed)},
  };
}

Settings run_settings(const RunConfig& config) {
  Settings out = model_settings(config.model);
  const TrainConfig& t = config.train;
  out.emplace_back("lr", format_double(t.lr));
  out.emplace_back("adam_beta1", format_double(t.adam_beta1));
  out.emplace_back("adam_beta2", format_double(t.adam_beta2));
  out.emplace_back("adam_eps", format_double(t.adam_eps));
  out.emplace_back("epochs", std::to_string(t.epochs));
  out.emplace_back("batch_size", std::to_string(t.batch_size));
  out.emplace_back("folds", std::to_string(t.folds));
  out.emplace_back("seeds", std::to_string(t.seeds));
  out.emplace_back("paired_ttest", t.paired_ttest ? "true" : "false");
  out.emplace_back("embedding_file", t.embedding_file);
  return out;
}

std::string format_settings(const Settings& settings) {
  std::string out;
  for (const auto& [key, value] : settings) out += key + "=" + value + "\n";
  return out;
}

ModelConfig model_config_from(const Settings& settings) {
  RunConfig config;
  for (const auto& [key, value] : settings) apply_setting(config, key, value);
  return config.model;
}

}  // namespace aga
