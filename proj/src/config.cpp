// SPDX-License-Identifier: Apache-2.0
#include "prefguide/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "prefguide/error.hpp"

namespace prefguide {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) {
    return {};
  }
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
  throw ParameterError("invalid value for " + std::string(key) + ": '" + std::string(value) + "'");
}

double parse_double(std::string_view key, std::string_view text) {
  text = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    bad_value(key, text);
  }
  return v;
}

std::uint64_t parse_uint(std::string_view key, std::string_view text) {
  text = trim(text);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    bad_value(key, text);
  }
  return v;
}

std::vector<double> parse_list(std::string_view key, std::string_view text) {
  std::vector<double> out;
  text = trim(text);
  if (text.empty()) {
    return out;
  }
  std::size_t start = 0;
  while (true) {
    const auto comma = text.find(',', start);
    out.push_back(parse_double(key, text.substr(start, comma - start)));
    if (comma == std::string_view::npos) {
      break;
    }
    start = comma + 1;
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view text) {
  text = trim(text);
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  bad_value(key, text);
}

std::string format_list(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out += ",";
    out += format_double(values[i]);
  }
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::vector<double> parse_double_list(std::string_view text) {
  return parse_list("list", text);
}

void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value) {
  value = trim(value);
  if (key == "vocab.min_freq") {
    cfg.vocab_min_freq = parse_uint(key, value);
    if (cfg.vocab_min_freq == 0) bad_value(key, value);
  } else if (key == "vocab.max_size") {
    cfg.vocab_max_size = parse_uint(key, value);
    if (cfg.vocab_max_size < kNumSpecials) bad_value(key, value);
  } else if (key == "synth.per_dim") {
    cfg.synth_per_dim = parse_uint(key, value);
  } else if (key == "synth.eval_fraction") {
    cfg.synth_eval_fraction = parse_double(key, value);
    if (!(cfg.synth_eval_fraction > 0.0 && cfg.synth_eval_fraction < 1.0)) bad_value(key, value);
  } else if (key == "synth.seed") {
    cfg.synth_seed = parse_uint(key, value);
  } else if (key == "lm.order") {
    cfg.lm.order = parse_uint(key, value);
  } else if (key == "lm.k") {
    cfg.lm.k = parse_double(key, value);
  } else if (key == "lm.lambdas") {
    cfg.lm.lambdas = parse_list(key, value);
  } else if (key == "clf.lr") {
    cfg.clf.lr = parse_double(key, value);
  } else if (key == "clf.lr_grid") {
    cfg.clf_lr_grid = parse_list(key, value);
  } else if (key == "clf.epochs") {
    cfg.clf.epochs = parse_uint(key, value);
  } else if (key == "clf.batch_size") {
    cfg.clf.batch_size = parse_uint(key, value);
    if (cfg.clf.batch_size == 0) bad_value(key, value);
  } else if (key == "clf.l2") {
    cfg.clf.l2 = parse_double(key, value);
  } else if (key == "clf.seed") {
    cfg.clf.seed = parse_uint(key, value);
  } else if (key == "clf.feature_budget") {
    cfg.clf.feature_budget = parse_uint(key, value);
  } else if (key == "decode.strategy") {
    cfg.decode.strategy = parse_strategy(value);
  } else if (key == "decode.temperature") {
    cfg.decode.temperature = parse_double(key, value);
    if (!(cfg.decode.temperature > 0.0)) bad_value(key, value);
  } else if (key == "decode.top_k") {
    cfg.decode.top_k = parse_uint(key, value);
    if (cfg.decode.top_k == 0) bad_value(key, value);
  } else if (key == "decode.max_tokens") {
    cfg.decode.max_tokens = parse_uint(key, value);
    if (cfg.decode.max_tokens == 0) bad_value(key, value);
  } else if (key == "decode.seed") {
    cfg.decode.seed = parse_uint(key, value);
  } else if (key == "decode.allow_opposites") {
    cfg.decode.allow_opposites = parse_bool(key, value);
  } else if (key == "sweep.grid") {
    cfg.sweep_grid = parse_list(key, value);
    if (cfg.sweep_grid.empty()) bad_value(key, value);
  } else if (key == "sweep.multi_grid") {
    cfg.sweep_multi_grid = parse_list(key, value);
    if (cfg.sweep_multi_grid.empty()) bad_value(key, value);
  } else if (key == "sweep.subset_size") {
    cfg.sweep_subset_size = parse_uint(key, value);
    if (cfg.sweep_subset_size < kMinNormPool) bad_value(key, value);
  } else if (key == "eval.prompts") {
    cfg.eval_prompts = parse_uint(key, value);
    if (cfg.eval_prompts == 0) bad_value(key, value);
  } else if (key == "judge.tau") {
    cfg.judge_tau = parse_double(key, value);
    if (!(cfg.judge_tau >= 0.0)) bad_value(key, value);
  } else {
    throw ParameterError("unknown config key: " + std::string(key));
  }
}

RunConfig parse_config(std::istream& in) {
  RunConfig cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view(line);
    if (const auto hash = view.find('#'); hash != std::string_view::npos) {
      view = view.substr(0, hash);
    }
    view = trim(view);
    if (view.empty()) {
      continue;
    }
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) {
      throw ParameterError("config line " + std::to_string(line_no) + " has no '='");
    }
    apply_setting(cfg, trim(view.substr(0, eq)), view.substr(eq + 1));
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error("cannot open config: " + path.string());
  }
  return parse_config(in);
}

std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& cfg) {
  return {
      {"vocab.min_freq", std::to_string(cfg.vocab_min_freq)},
      {"vocab.max_size", std::to_string(cfg.vocab_max_size)},
      {"synth.per_dim", std::to_string(cfg.synth_per_dim)},
      {"synth.eval_fraction", format_double(cfg.synth_eval_fraction)},
      {"synth.seed", std::to_string(cfg.synth_seed)},
      {"lm.order", std::to_string(cfg.lm.order)},
      {"lm.k", format_double(cfg.lm.k)},
      {"lm.lambdas", format_list(cfg.lm.lambdas)},
      {"clf.lr", format_double(cfg.clf.lr)},
      {"clf.lr_grid", format_list(cfg.clf_lr_grid)},
      {"clf.epochs", std::to_string(cfg.clf.epochs)},
      {"clf.batch_size", std::to_string(cfg.clf.batch_size)},
      {"clf.l2", format_double(cfg.clf.l2)},
      {"clf.seed", std::to_string(cfg.clf.seed)},
      {"clf.feature_budget", std::to_string(cfg.clf.feature_budget)},
      {"decode.strategy", std::string(strategy_name(cfg.decode.strategy))},
      {"decode.temperature", format_double(cfg.decode.temperature)},
      {"decode.top_k", std::to_string(cfg.decode.top_k)},
      {"decode.max_tokens", std::to_string(cfg.decode.max_tokens)},
      {"decode.seed", std::to_string(cfg.decode.seed)},
      {"decode.allow_opposites", cfg.decode.allow_opposites ? "true" : "false"},
      {"sweep.grid", format_list(cfg.sweep_grid)},
      {"sweep.multi_grid", format_list(cfg.sweep_multi_grid)},
      {"sweep.subset_size", std::to_string(cfg.sweep_subset_size)},
      {"eval.prompts", std::to_string(cfg.eval_prompts)},
      {"judge.tau", format_double(cfg.judge_tau)},
  };
}

std::string format_config(const RunConfig& cfg) {
  std::ostringstream out;
  for (const auto& [key, value] : config_entries(cfg)) {
    out << key << " = " << value << "\n";
  }
  return out.str();
}

}  // namespace prefguide
