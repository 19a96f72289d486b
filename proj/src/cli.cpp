// SPDX-License-Identifier: Apache-2.0
#include "prefguide/cli.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>

#include <CLI11.hpp>

#include "prefguide/engine.hpp"
#include "prefguide/error.hpp"
#include "prefguide/service.hpp"

namespace prefguide {

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

// Bad arguments detected after CLI11 accepted the command line.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string data_dir = default_data_dir().string();
};

RunConfig resolve_config(const CommonOptions& common) {
  RunConfig cfg = common.config_path.empty() ? RunConfig{} : load_config(common.config_path);
  for (const auto& kv : common.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw UsageError("--set expects KEY=VALUE, got '" + kv + "'");
    }
    try {
      apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    } catch (const ParameterError& e) {
      throw UsageError(e.what());
    }
  }
  return cfg;
}

void add_common(CLI::App* cmd, CommonOptions& common) {
  cmd->add_option("--config", common.config_path, "Run configuration file (key = value)");
  cmd->add_option("--set", common.overrides, "Override one config key, KEY=VALUE (repeatable)");
  cmd->add_option("--data-dir", common.data_dir, "Directory with seed_sentences.txt and lexicons/");
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error("cannot write " + path.string());
  }
  out << text;
}

// Train/eval splits from a dataset directory written by `synth`, or freshly
// synthesized from the config when no directory is given.
Corpus corpus_for(const std::string& dataset_dir, const RunConfig& cfg,
                  const CommonOptions& common) {
  if (dataset_dir.empty()) {
    return make_corpus(cfg, common.data_dir);
  }
  const fs::path dir(dataset_dir);
  return {read_examples(dir / "train.jsonl"), read_examples(dir / "eval.jsonl")};
}

PreferenceRequest parse_prefs(const std::vector<std::string>& tokens,
                              const PreferenceRegistry& registry) {
  PreferenceRequest req;
  for (const auto& token : tokens) {
    PreferenceEntry e;
    try {
      e = parse_pref(token);
    } catch (const ParameterError& ex) {
      throw UsageError(ex.what());
    }
    if (!registry.find(e.dim)) {
      throw UsageError("unknown preference dimension in --pref '" + token + "'");
    }
    req.entries.push_back(std::move(e));
  }
  return req;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto item = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!item.empty()) {
      out.push_back(item);
    }
    if (comma == std::string::npos) {
      break;
    }
    start = comma + 1;
  }
  return out;
}

ordered_json full_trace_json(const GenerationResult& result, const Vocab& vocab) {
  ordered_json steps = ordered_json::array();
  for (std::size_t pos = 0; pos < result.steps.size(); ++pos) {
    const auto& s = result.steps[pos];
    ordered_json cls = ordered_json::object();
    for (std::size_t k = 0; k < s.class_dims.size(); ++k) {
      cls[s.class_dims[k]] = s.class_columns[k];
    }
    steps.push_back({{"position", pos},
                     {"chosen", vocab.token(s.chosen)},
                     {"base", s.base_dist},
                     {"class", std::move(cls)},
                     {"combined", s.combined_dist}});
  }
  return {{"vocab", vocab.tokens()}, {"steps", std::move(steps)}};
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

std::string tuple_text(const AlphaTuple& alphas) {
  std::string out;
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    if (i > 0) out += ",";
    out += format_double(alphas[i]);
  }
  return out;
}

int cmd_synth(const CommonOptions& common, const std::string& out_dir, std::ostream& out) {
  const RunConfig cfg = resolve_config(common);
  const Corpus corpus = make_corpus(cfg, common.data_dir);
  fs::create_directories(out_dir);
  write_examples(fs::path(out_dir) / "train.jsonl", corpus.train);
  write_examples(fs::path(out_dir) / "eval.jsonl", corpus.eval);
  out << "train " << corpus.train.examples.size() << " examples\n"
      << "eval " << corpus.eval.examples.size() << " examples\n";
  return kExitOk;
}

int cmd_train(const CommonOptions& common, const std::string& dataset_dir,
              const std::string& checkpoint, const std::string& report_path, std::ostream& out) {
  const RunConfig cfg = resolve_config(common);
  const Corpus corpus = corpus_for(dataset_dir, cfg, common);
  const TrainedModels models = train_models(corpus.train, corpus.eval, cfg);
  save_checkpoint(checkpoint, models.lm, models.clf, models.vocab, make_provenance(cfg));
  const auto report = to_json(models.report, models.clf.registry());
  if (!report_path.empty()) {
    write_text(report_path, report.dump(2) + "\n");
  }
  const auto& acc = models.report.eval_accuracy;
  out << "vocab " << models.vocab.size() << "  features " << models.clf.num_features() << "\n"
      << "lr " << format_double(models.report.config.lr) << "  best epoch "
      << models.report.best_epoch << "/" << models.report.epochs_run << "  eval loss "
      << fixed(models.report.eval_loss[models.report.best_epoch]) << "\n"
      << "eval accuracy " << fixed(acc.overall, 3) << "\n";
  for (std::size_t c = 0; c < acc.per_class.size(); ++c) {
    out << "  " << std::left << std::setw(10) << models.clf.registry().at(c).symbol << " "
        << fixed(acc.per_class[c], 3) << "\n";
  }
  out << "checkpoint " << checkpoint << "\n";
  return kExitOk;
}

struct DecodeFlags {
  std::string strategy;
  double temperature = std::nan("");
  std::size_t top_k = 0;
  std::size_t max_tokens = 0;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

DecodeConfig decode_config(const RunConfig& cfg, const DecodeFlags& flags) {
  DecodeConfig d = cfg.decode;
  try {
    if (!flags.strategy.empty()) d.strategy = parse_strategy(flags.strategy);
  } catch (const ParameterError& e) {
    throw UsageError(e.what());
  }
  if (!std::isnan(flags.temperature)) d.temperature = flags.temperature;
  if (flags.top_k > 0) d.top_k = flags.top_k;
  if (flags.max_tokens > 0) d.max_tokens = flags.max_tokens;
  if (flags.seed_set) d.seed = flags.seed;
  return d;
}

void add_decode(CLI::App* cmd, DecodeFlags& flags) {
  cmd->add_option("--strategy", flags.strategy, "greedy | temperature | top_k");
  cmd->add_option("--temperature", flags.temperature, "Sampling temperature (> 0)");
  cmd->add_option("--top-k", flags.top_k, "Candidates kept by top_k sampling")->check(CLI::PositiveNumber);
  cmd->add_option("--max-tokens", flags.max_tokens, "Generation length cap")->check(CLI::PositiveNumber);
  cmd->add_option_function<std::uint64_t>(
      "--seed", [&flags](const std::uint64_t& s) { flags.seed = s; flags.seed_set = true; },
      "Random seed");
}

int cmd_generate(const CommonOptions& common, const std::string& checkpoint,
                 const std::string& prompt, const std::vector<std::string>& prefs,
                 const DecodeFlags& flags, const std::string& trace_path, bool json,
                 std::ostream& out) {
  const RunConfig cfg = resolve_config(common);
  DecodeConfig dcfg = decode_config(cfg, flags);
  const Engine engine = Engine::load(checkpoint);
  const auto req = parse_prefs(prefs, engine.registry());
  dcfg.trace = !trace_path.empty();
  const auto result = engine.generate(prompt, req, dcfg);
  if (!trace_path.empty()) {
    write_text(trace_path, full_trace_json(result, engine.vocab()).dump() + "\n");
  }
  if (json) {
    GenerationResult brief = result;
    brief.traced = false;
    out << generation_json(brief, engine.vocab()).dump() << "\n";
  } else {
    out << result.text << "\n";
  }
  return kExitOk;
}

int cmd_sweep(const CommonOptions& common, const std::string& checkpoint,
              const std::string& dims_text, const std::string& grid_text,
              const std::string& dataset_dir, const DecodeFlags& flags,
              const std::string& report_path, std::ostream& out) {
  RunConfig cfg = resolve_config(common);
  const DecodeConfig dcfg = decode_config(cfg, flags);
  const auto dims = split_list(dims_text);
  if (dims.empty()) {
    throw UsageError("--dims needs at least one dimension");
  }
  const Engine engine = Engine::load(checkpoint);
  for (const auto& d : dims) {
    if (!engine.registry().find(d)) {
      throw UsageError("unknown preference dimension in --dims '" + d + "'");
    }
  }
  if (!grid_text.empty()) {
    std::vector<double> values;
    try {
      values = parse_double_list(grid_text);
    } catch (const ParameterError&) {
      throw UsageError("malformed --grid '" + grid_text + "'");
    }
    if (values.empty()) {
      throw UsageError("malformed --grid '" + grid_text + "'");
    }
    (dims.size() == 1 ? cfg.sweep_grid : cfg.sweep_multi_grid) = values;
  }
  const Corpus corpus = corpus_for(dataset_dir, cfg, common);
  const PromptSets prompts = prompt_sets(corpus.eval, cfg);
  const auto report =
      engine.sweep(sweep_grid_for(cfg, dims.size()), dims, prompts.sweep, dcfg, cfg.judge_tau);
  if (!report_path.empty()) {
    write_text(report_path, to_json(report).dump(2) + "\n");
  }
  out << std::left << std::setw(20) << "alpha" << std::setw(10) << "subset1" << std::setw(10)
      << "subset2" << "average\n";
  for (const auto& row : report.rows) {
    out << std::setw(20) << tuple_text(row.alphas) << std::setw(10)
        << fixed(row.subset_win_rate[0]) << std::setw(10) << fixed(row.subset_win_rate[1])
        << fixed(row.average) << "\n";
  }
  out << "selected " << tuple_text(report.selected) << " (average " << fixed(report.selected_average)
      << ")\n";
  return kExitOk;
}

int cmd_eval(const CommonOptions& common, const std::string& checkpoint,
             const std::vector<std::string>& prefs, const std::string& dataset_dir,
             const DecodeFlags& flags, const std::string& report_path, std::ostream& out) {
  const RunConfig cfg = resolve_config(common);
  const DecodeConfig dcfg = decode_config(cfg, flags);
  const Engine engine = Engine::load(checkpoint);
  const auto req = parse_prefs(prefs, engine.registry());
  if (req.entries.empty()) {
    throw UsageError("eval needs at least one --pref");
  }
  const Corpus corpus = corpus_for(dataset_dir, cfg, common);
  const PromptSets prompts = prompt_sets(corpus.eval, cfg);
  const auto report = win_rate(engine.generator(req, dcfg), engine.generator({}, dcfg),
                               prompts.eval, req, engine.registry(), cfg.judge_tau);
  if (!report_path.empty()) {
    write_text(report_path, to_json(report).dump(2) + "\n");
  }
  out << "prompts " << report.prompt_count << "  wins " << report.overall.wins << "  ties "
      << report.overall.ties << "  losses " << report.overall.losses << "\n"
      << "win_rate " << fixed(report.win_rate()) << "\n";
  for (std::size_t k = 0; k < report.dims.size(); ++k) {
    out << "  " << std::left << std::setw(10) << report.dims[k] << " "
        << fixed(report.per_dim[k].win_rate()) << "\n";
  }
  for (const auto& d : report.flagged_dims) {
    out << "flagged: " << d << " has zero spread in the normalization pool\n";
  }
  return kExitOk;
}

int cmd_correlate(const CommonOptions& common, const std::string& checkpoint,
                  const std::string& generations_path, const std::string& dataset_dir,
                  std::size_t per_dim, double alpha, const DecodeFlags& flags,
                  const std::string& csv_path, std::ostream& out) {
  const RunConfig cfg = resolve_config(common);
  std::vector<std::string> texts;
  PreferenceRegistry registry = default_registry();
  if (!generations_path.empty()) {
    texts = read_lines(generations_path);
  } else {
    if (checkpoint.empty()) {
      throw UsageError("correlate needs --generations or --checkpoint");
    }
    const DecodeConfig dcfg = decode_config(cfg, flags);
    const Engine engine = Engine::load(checkpoint);
    registry = engine.registry();
    const Corpus corpus = corpus_for(dataset_dir, cfg, common);
    const PromptSets prompts = prompt_sets(corpus.eval, cfg);
    for (const auto& d : registry.dims()) {
      const auto gen = engine.generator({{{d.symbol, alpha}}}, dcfg);
      for (std::size_t i = 0; i < per_dim; ++i) {
        texts.push_back(gen(prompts.eval[i % prompts.eval.size()], i));
      }
    }
  }
  const auto m = correlation_matrix(texts, registry);
  const auto csv = m.to_csv();
  if (!csv_path.empty()) {
    write_text(csv_path, csv);
  }
  out << "generations " << texts.size() << "\n" << csv;
  return kExitOk;
}

int cmd_serve(const CommonOptions& common, const std::string& checkpoint,
              const std::string& dataset_dir, const std::string& host, int port,
              std::ostream& out) {
  const RunConfig cfg = resolve_config(common);
  auto engine = std::make_shared<const Engine>(Engine::load(checkpoint));
  const Corpus corpus = corpus_for(dataset_dir, cfg, common);
  Service service(engine, cfg, prompt_sets(corpus.eval, cfg).sweep);
  out << "listening on http://" << host << ":" << port << "\n" << std::flush;
  serve(service, host, port);
  return kExitOk;
}

}  // namespace

PreferenceEntry parse_pref(const std::string& token) {
  const auto colon = token.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == token.size()) {
    throw ParameterError("malformed --pref '" + token + "' (expected SYMBOL:ALPHA)");
  }
  const std::string symbol = token.substr(0, colon);
  const std::string alpha_text = token.substr(colon + 1);
  double alpha = 0.0;
  const auto [ptr, ec] =
      std::from_chars(alpha_text.data(), alpha_text.data() + alpha_text.size(), alpha);
  if (ec != std::errc() || ptr != alpha_text.data() + alpha_text.size()) {
    throw ParameterError("malformed --pref '" + token + "' (alpha is not a number)");
  }
  if (!std::isfinite(alpha) || alpha < 0.0) {
    throw ParameterError("malformed --pref '" + token + "' (alpha must be finite and >= 0)");
  }
  return {symbol, alpha};
}

ordered_json to_json(const TrainReport& report, const PreferenceRegistry& registry) {
  ordered_json per_class = ordered_json::object();
  for (std::size_t c = 0; c < report.eval_accuracy.per_class.size(); ++c) {
    per_class[registry.at(c).symbol] = report.eval_accuracy.per_class[c];
  }
  ordered_json lr_search = ordered_json::array();
  for (const auto& [lr, loss] : report.lr_search) {
    lr_search.push_back({{"lr", lr}, {"eval_loss", loss}});
  }
  return {{"epochs_run", report.epochs_run},
          {"best_epoch", report.best_epoch},
          {"train_loss", report.train_loss},
          {"eval_loss", report.eval_loss},
          {"eval_accuracy",
           {{"overall", report.eval_accuracy.overall},
            {"total", report.eval_accuracy.total},
            {"per_class", std::move(per_class)}}},
          {"config",
           {{"lr", report.config.lr},
            {"epochs", report.config.epochs},
            {"batch_size", report.config.batch_size},
            {"l2", report.config.l2},
            {"seed", report.config.seed},
            {"feature_budget", report.config.feature_budget}}},
          {"lr_search", std::move(lr_search)},
          {"warnings", report.warnings}};
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Preference-guided text generation", "prefguide"};
  app.require_subcommand(1);

  CommonOptions common;
  DecodeFlags decode;
  std::string out_dir = "dataset";
  std::string dataset_dir;
  std::string checkpoint = "model.ckpt";
  std::string report_path;
  std::string prompt;
  std::vector<std::string> prefs;
  std::string trace_path;
  bool json = false;
  std::string dims_text;
  std::string grid_text;
  std::string generations_path;
  std::string csv_path;
  std::size_t per_dim = 50;
  double alpha = 0.8;
  std::string host = "127.0.0.1";
  int port = 8080;

  auto* synth = app.add_subcommand("synth", "Build the synthetic preference corpus");
  add_common(synth, common);
  synth->add_option("--out", out_dir, "Output directory for train.jsonl and eval.jsonl");

  auto* train = app.add_subcommand("train", "Train the base model and the classifier");
  add_common(train, common);
  train->add_option("--data", dataset_dir, "Dataset directory from synth (default: synthesize)");
  train->add_option("--out", checkpoint, "Checkpoint path");
  train->add_option("--report", report_path, "Write the training report as JSON");

  const std::string pref_help = "Preference as SYMBOL:ALPHA, e.g. concise:0.8 (repeatable)";
  auto* gen = app.add_subcommand("generate", "Generate text for one prompt");
  add_common(gen, common);
  add_decode(gen, decode);
  gen->add_option("--checkpoint", checkpoint, "Checkpoint path");
  gen->add_option("--prompt", prompt, "Prompt text")->required();
  gen->add_option("--pref", prefs, pref_help);
  gen->add_option("--trace", trace_path, "Write the full per-step trace as JSON");
  gen->add_flag("--json", json, "Print the response document instead of plain text");

  auto* sweep = app.add_subcommand("sweep", "Grid-search preference weights against vanilla");
  add_common(sweep, common);
  add_decode(sweep, decode);
  sweep->add_option("--checkpoint", checkpoint, "Checkpoint path");
  sweep->add_option("--dims", dims_text, "Comma-separated dimensions")->required();
  sweep->add_option("--grid", grid_text, "Comma-separated alpha values");
  sweep->add_option("--data", dataset_dir, "Dataset directory for held-out prompts");
  sweep->add_option("--report", report_path, "Write the sweep report as JSON");

  auto* eval = app.add_subcommand("eval", "Win rate of guided generation against vanilla");
  add_common(eval, common);
  add_decode(eval, decode);
  eval->add_option("--checkpoint", checkpoint, "Checkpoint path");
  eval->add_option("--pref", prefs, pref_help)->required();
  eval->add_option("--data", dataset_dir, "Dataset directory for held-out prompts");
  eval->add_option("--report", report_path, "Write the win-rate report as JSON");

  auto* corr = app.add_subcommand("correlate", "Correlation matrix of oracle scores");
  add_common(corr, common);
  add_decode(corr, decode);
  corr->add_option("--checkpoint", checkpoint, "Checkpoint path");
  corr->add_option("--generations", generations_path, "Score these texts (one per line)");
  corr->add_option("--data", dataset_dir, "Dataset directory for held-out prompts");
  corr->add_option("--per-dim", per_dim, "Guided generations per dimension")->check(CLI::PositiveNumber);
  corr->add_option("--alpha", alpha, "Weight for the guided generations")->check(CLI::NonNegativeNumber);
  corr->add_option("--csv", csv_path, "Write the matrix as CSV");

  auto* srv = app.add_subcommand("serve", "Serve the HTTP API");
  add_common(srv, common);
  srv->add_option("--checkpoint", checkpoint, "Checkpoint path");
  srv->add_option("--data", dataset_dir, "Dataset directory for default sweep prompts");
  srv->add_option("--host", host, "Bind address");
  srv->add_option("--port", port, "Port")->check(CLI::Range(1, 65535));

  std::vector<const char*> argv;
  argv.push_back("prefguide");
  for (const auto& a : args) {
    argv.push_back(a.c_str());
  }
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*synth) return cmd_synth(common, out_dir, out);
    if (*train) return cmd_train(common, dataset_dir, checkpoint, report_path, out);
    if (*gen) {
      return cmd_generate(common, checkpoint, prompt, prefs, decode, trace_path, json, out);
    }
    if (*sweep) {
      return cmd_sweep(common, checkpoint, dims_text, grid_text, dataset_dir, decode, report_path,
                       out);
    }
    if (*eval) return cmd_eval(common, checkpoint, prefs, dataset_dir, decode, report_path, out);
    if (*corr) {
      return cmd_correlate(common, checkpoint, generations_path, dataset_dir, per_dim, alpha,
                           decode, csv_path, out);
    }
    if (*srv) return cmd_serve(common, checkpoint, dataset_dir, host, port, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace prefguide
