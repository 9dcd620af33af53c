#include "fatality_cli/commands.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include "fatality/analytics.hpp"
#include "fatality/corpus.hpp"
#include "fatality/error.hpp"
#include "fatality/metrics.hpp"
#include "fatality/model.hpp"
#include "fatality/tokenizer.hpp"
#include "fatality/training.hpp"
#include "fatality_cli/run_config.hpp"

namespace fatality::cli {
namespace {

namespace fs = std::filesystem;

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << content;
  if (!out) throw DataError("failed writing " + path.string());
}

fs::path prepare_out_dir(const RunConfig& config, bool required) {
  const auto& out = config.get("out");
  if (out.empty()) {
    if (required) throw DataError("missing required setting --out");
    return {};
  }
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw DataError("cannot create output directory " + out + ": " + ec.message());
  write_file(fs::path(out) / "config.txt", config.dump());
  return out;
}

std::vector<std::string> texts_of(const std::vector<corpus::LabeledExample>& examples, int label) {
  std::vector<std::string> out;
  for (const auto& e : examples) {
    if (label < 0 || e.label == label) out.push_back(e.text);
  }
  return out;
}

void check_vocab_matches(const tokenizer::Vocabulary& vocab, const model::ModelConfig& config) {
  if (vocab.size() != config.vocab_size) {
    throw DataError("vocabulary has " + std::to_string(vocab.size()) +
                    " tokens but the weights expect " + std::to_string(config.vocab_size));
  }
}

// ---------------------------------------------------------------------------

int cmd_split(const RunConfig& config, std::ostream& out, std::ostream& err) {
  config.require_existing("data");
  const auto out_dir = prepare_out_dir(config, true);
  const auto records = corpus::deduplicate(corpus::load_csv(config.get("data")));
  const auto examples = corpus::binarize(records);
  const auto counts = config.split_counts(examples.size());
  const auto split = corpus::split(examples, counts, config.seed(), config.stratified());

  auto write_part = [&](const std::vector<std::size_t>& indices, const char* name) {
    std::vector<corpus::EventRecord> part;
    part.reserve(indices.size());
    for (const auto i : indices) part.push_back(records[i]);
    write_file(out_dir / (std::string(name) + ".csv"), corpus::format_csv(part));
  };
  write_part(split.train_indices, "train");
  write_part(split.validation_indices, "validation");
  write_part(split.test_indices, "test");
  write_file(out_dir / "split_manifest.tsv", corpus::format_manifest(split));

  out << "examples=" << examples.size() << " train=" << split.train.size()
      << " validation=" << split.validation.size() << " test=" << split.test.size()
      << " seed=" << split.seed << " stratified=" << (split.stratified ? "true" : "false") << '\n';
  (void)err;
  return kExitOk;
}

int cmd_train(const RunConfig& config, std::ostream& out, std::ostream& err) {
  const auto train_config = config.train_config();
  config.require_existing("data");
  config.require_existing("vocab");
  const auto vocab = tokenizer::Vocabulary::load(config.get("vocab"));
  const auto model_config = config.model_config(static_cast<std::uint32_t>(vocab.size()));
  const auto out_dir = prepare_out_dir(config, true);

  const fs::path data_dir = config.get("data");
  if (!fs::is_directory(data_dir)) {
    throw DataError("--data for train must be a split directory (containing train.csv)");
  }
  corpus::DatasetSplit splits;
  splits.seed = config.seed();
  splits.train = corpus::binarize(corpus::load_csv(data_dir / "train.csv"));
  if (fs::exists(data_dir / "validation.csv")) {
    splits.validation = corpus::binarize(corpus::load_csv(data_dir / "validation.csv"));
  } else {
    err << "warning: no validation.csv in " << data_dir.string()
        << "; validation metrics will be null\n";
  }

  std::string log_text;
  auto params = model::init_params(model_config, train_config.seed);
  const auto result = training::train(
      std::move(params), splits, vocab, model_config, train_config,
      [&](const training::EpochLog& entry) {
        const auto line = training::format_log_line(entry);
        out << line << '\n' << std::flush;
        log_text += line + '\n';
      });

  write_file(out_dir / "train_log.jsonl", log_text);
  model::save_weights(result.final_params, model_config, out_dir / "final.bcw");
  model::save_weights(result.best_params, model_config, out_dir / "best.bcw");
  err << "trained " << result.total_steps << " steps; best validation epoch "
      << result.best_epoch << "; weights in " << out_dir.string() << '\n';
  return kExitOk;
}

int cmd_eval(const RunConfig& config, std::ostream& out, std::ostream&) {
  const double threshold = config.threshold();
  config.require_existing("weights");
  config.require_existing("data");
  config.require_existing("vocab");
  const auto loaded = model::load_weights(config.get("weights"));
  const auto vocab = tokenizer::Vocabulary::load(config.get("vocab"));
  check_vocab_matches(vocab, loaded.config);
  const auto out_dir = prepare_out_dir(config, false);

  const auto examples = corpus::binarize(corpus::load_csv(config.get("data")));
  if (examples.empty()) throw DataError("evaluation data has no rows");
  const auto inputs = training::encode_all(examples, vocab, loaded.config.max_seq);
  std::vector<int> labels;
  for (const auto& e : examples) labels.push_back(e.label);
  const auto report = training::evaluate(loaded.params, loaded.config, inputs, labels, threshold);
  const auto json = metrics::to_json(report);
  out << json << '\n';
  if (!out_dir.empty()) write_file(out_dir / "metrics.json", json + '\n');
  return kExitOk;
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read input file " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

int cmd_predict(const RunConfig& config, std::ostream& out, std::ostream&) {
  const double threshold = config.threshold();
  config.require_existing("weights");
  config.require_existing("vocab");
  const bool has_text = config.has_value("text"), has_input = config.has_value("input");
  if (has_text == has_input) throw DataError("predict needs exactly one of --text or --input");
  const auto loaded = model::load_weights(config.get("weights"));
  const auto vocab = tokenizer::Vocabulary::load(config.get("vocab"));
  check_vocab_matches(vocab, loaded.config);
  const auto out_dir = prepare_out_dir(config, false);

  const auto texts =
      has_text ? std::vector<std::string>{config.get("text")} : read_lines(config.get("input"));
  std::vector<tokenizer::EncodedInput> inputs;
  inputs.reserve(texts.size());
  for (const auto& t : texts) inputs.push_back(tokenizer::encode(t, vocab, loaded.config.max_seq));
  const auto probs = model::predict_proba(loaded.params, loaded.config, inputs);
  const auto labels = model::threshold_labels(probs, threshold);

  std::string lines;
  char buf[64];
  for (std::size_t i = 0; i < probs.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.6f\t%d\n", static_cast<double>(probs[i]), labels[i]);
    lines += buf;
  }
  out << lines;
  if (!out_dir.empty()) write_file(out_dir / "predictions.tsv", lines);
  return kExitOk;
}

int cmd_analyze(const RunConfig& config, std::ostream& out, std::ostream& err) {
  const auto k = config.top_k();
  config.require_existing("data");
  const auto stopwords = config.has_value("stopwords")
                             ? analytics::load_stopwords(config.get("stopwords"))
                             : analytics::default_stopwords();
  const auto out_dir = prepare_out_dir(config, true);
  const auto examples =
      corpus::binarize(corpus::deduplicate(corpus::load_csv(config.get("data"))));
  const auto all = texts_of(examples, -1);
  const auto fatal = texts_of(examples, 1);
  const auto non_fatal = texts_of(examples, 0);
  if (fatal.empty()) err << "warning: corpus has no fatal events; fatal table is empty\n";
  if (non_fatal.empty()) err << "warning: corpus has no non-fatal events; non-fatal table is empty\n";

  const auto stats = analytics::length_stats(all);
  write_file(out_dir / "length_stats.tsv", analytics::format_length_stats(stats));
  write_file(out_dir / "top_words_fatal.tsv",
             analytics::format_table(analytics::top_k_words(fatal, k, stopwords)));
  write_file(out_dir / "top_words_nonfatal.tsv",
             analytics::format_table(analytics::top_k_words(non_fatal, k, stopwords)));
  write_file(out_dir / "word_cloud.tsv",
             analytics::format_table(analytics::word_cloud_export(all, stopwords)));
  out << analytics::format_length_stats(stats);
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct Command {
  std::string name;
  std::string help;
  std::vector<std::string> settings;
  std::function<int(const RunConfig&, std::ostream&, std::ostream&)> handler;
  bool split_flags = false;
  bool freeze_flag = false;
};

const std::map<std::string, std::string>& descriptions() {
  static const std::map<std::string, std::string> d = {
      {"batch_size", "Examples per optimizer step (default 32)"},
      {"beta1", "AdamW first-moment decay (default 0.9)"},
      {"beta2", "AdamW second-moment decay (default 0.999)"},
      {"counts", "Explicit split sizes a,b,c"},
      {"data", "Input CSV, or for train a split directory"},
      {"dropout", "Dropout before the classifier (default 0.3)"},
      {"encoder_dropout", "Dropout inside the encoder (default 0.1)"},
      {"epochs", "Training epochs (default 10)"},
      {"epsilon", "AdamW epsilon (default 1e-8)"},
      {"ffn_dim", "Feed-forward width (default 2048)"},
      {"gelu", "GELU form: erf or tanh (default erf)"},
      {"grad_clip_norm", "Global gradient-norm clip, or none (default 1.0)"},
      {"heads", "Attention heads (default 8)"},
      {"hidden", "Hidden size (default 512)"},
      {"input", "File with one text per line"},
      {"k", "Rows in each top-word table (default 10)"},
      {"layers", "Transformer blocks (default 4)"},
      {"lr", "Peak learning rate (default 3e-5)"},
      {"max_positions", "Position-embedding rows (default 512)"},
      {"max_seq", "Tokens per encoded input (default 128)"},
      {"out", "Output directory"},
      {"ratios", "Split ratios x,y,z rounded by largest remainder (default 0.8,0.1,0.1)"},
      {"seed", "Master seed for every random stream (default 42)"},
      {"stopwords", "Stopword file, one word per line"},
      {"text", "A single text to classify"},
      {"threshold", "Label 1 iff probability >= threshold (default 0.5)"},
      {"vocab", "WordPiece vocabulary file"},
      {"warmup_fraction", "Share of steps spent in linear warmup (default 0.1)"},
      {"weight_decay", "Decoupled weight decay (default 0.01)"},
      {"weights", "Weight file"},
  };
  return d;
}

std::string flag_for(const std::string& key) {
  std::string flag = "--" + key;
  std::replace(flag.begin(), flag.end(), '_', '-');
  return flag;
}

const std::vector<Command>& command_table() {
  static const std::vector<Command> table = {
      {"split", "Deduplicate, binarize, and partition a CSV corpus",
       {"data", "out", "seed", "counts", "ratios"}, cmd_split, true, false},
      {"train", "Train the classifier on a split directory",
       {"data", "vocab", "out", "seed", "epochs", "lr", "batch_size", "warmup_fraction",
        "dropout", "encoder_dropout", "weight_decay", "grad_clip_norm", "beta1", "beta2",
        "epsilon", "layers", "hidden", "heads", "ffn_dim", "max_positions", "max_seq", "gelu"},
       cmd_train, false, true},
      {"eval", "Evaluate weights on a labeled CSV",
       {"weights", "data", "vocab", "out", "threshold"}, cmd_eval, false, false},
      {"predict", "Print fatality probability and label per text",
       {"weights", "vocab", "text", "input", "threshold", "out"}, cmd_predict, false, false},
      {"analyze", "Length statistics and word-frequency tables",
       {"data", "k", "stopwords", "out"}, cmd_analyze, false, false},
  };
  return table;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Event-description fatality classifier", "fatality"};
  app.require_subcommand(1);

  struct Bound {
    const Command* command;
    CLI::App* app;
    std::string config_path;
    std::map<std::string, std::string> values;
    std::map<std::string, std::string> flags;  // set by boolean flags
  };
  std::vector<std::unique_ptr<Bound>> bound;
  for (const auto& cmd : command_table()) {
    auto b = std::make_unique<Bound>();
    b->command = &cmd;
    b->app = app.add_subcommand(cmd.name, cmd.help);
    b->app->add_option("--config", b->config_path, "key = value configuration file");
    for (const auto& key : cmd.settings) {
      b->app->add_option(flag_for(key), b->values[key], descriptions().at(key));
    }
    auto* flags = &b->flags;
    if (cmd.split_flags) {
      b->app->add_flag_callback("--paper-split", [flags] { (*flags)["paper_split"] = "true"; },
                                "Use the 3826/426/500 partition");
      b->app->add_flag_callback("--stratified", [flags] { (*flags)["stratified"] = "true"; },
                                "Preserve the label ratio in every partition (default)");
      b->app->add_flag_callback("--no-stratified", [flags] { (*flags)["stratified"] = "false"; },
                                "Plain seeded shuffle");
    }
    if (cmd.freeze_flag) {
      b->app->add_flag_callback("--freeze-encoder", [flags] { (*flags)["freeze_encoder"] = "true"; },
                                "Train only the pooler and classifier");
    }
    bound.push_back(std::move(b));
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    const auto* target = &app;
    for (const auto& b : bound) {
      if (b->app->parsed()) target = b->app;
    }
    out << target->help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }

  for (const auto& b : bound) {
    if (!b->app->parsed()) continue;
    try {
      RunConfig config;
      if (!b->config_path.empty()) config.merge_file(b->config_path);
      for (const auto& key : b->command->settings) {
        if (b->app->get_option(flag_for(key))->count() > 0) config.set(key, b->values[key]);
      }
      for (const auto& [key, value] : b->flags) config.set(key, value);
      return b->command->handler(config, out, err);
    } catch (const NumericalError& e) {
      err << "numerical failure: " << e.what() << '\n';
      return kExitNumerical;
    } catch (const DataError& e) {
      err << "error: " << e.what() << '\n';
      return kExitInput;
    } catch (const std::exception& e) {
      err << "internal error: " << e.what() << '\n';
      return kExitInternal;
    }
  }
  return kExitInput;
}

}  // namespace fatality::cli
