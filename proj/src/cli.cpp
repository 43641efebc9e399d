#include "sherlock/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <iterator>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "sherlock/checkpoint.hpp"
#include "sherlock/config.hpp"
#include "sherlock/dataset.hpp"
#include "sherlock/errors.hpp"
#include "sherlock/metrics.hpp"
#include "sherlock/service.hpp"
#include "sherlock/training.hpp"

namespace sherlock::cli {

namespace {

constexpr const char* kModelEnv = "SHERLOCK_MODEL";

struct Options {
  std::string config_path;
  std::uint64_t seed = 0;

  std::string data;
  std::string out_path;
  std::string vocab_path;
  std::string model_path;
  std::string file = "-";
  std::string history_path;
  std::string metrics_path;
  std::string baseline;
  std::string host = "127.0.0.1";
  bool strict = false;
  bool json_output = false;

  std::size_t top_k = kDefaultTopK;
  std::size_t epochs = 10;
  std::size_t batch_size = 128;
  std::size_t kfold = 0;
  std::size_t max_body_bytes = kDefaultMaxBodyBytes;
  int port = 8080;
  double threshold = metrics::kDefaultThreshold;
  Hyperparams hp;
};

// Fills `target` from the config file unless the flag was given explicitly.
template <typename T>
void from_config(const Config& cfg, const CLI::Option* opt, const std::string& key, T& target) {
  if (opt && opt->count() > 0) return;
  if constexpr (std::is_same_v<T, std::string>) {
    if (auto v = cfg.get(key)) target = *v;
  } else if constexpr (std::is_same_v<T, double>) {
    if (auto v = cfg.get_double(key)) target = *v;
  } else if constexpr (std::is_same_v<T, int>) {
    if (auto v = cfg.get_u64(key)) target = static_cast<int>(*v);
  } else {
    if (auto v = cfg.get_u64(key)) target = static_cast<T>(*v);
  }
}

std::vector<CorpusRecord> read_records(const Options& o, std::ostream& err) {
  auto load = load_corpus(o.data, o.strict ? LoadMode::Strict : LoadMode::Lenient);
  for (const auto& issue : load.issues) {
    err << o.data << ":" << issue.line << ": skipped: " << issue.reason << '\n';
  }
  return std::move(load.records);
}

std::vector<TokenStream> lex_all(std::span<const CorpusRecord> records) {
  std::vector<TokenStream> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(lex(r.code));
  return out;
}

std::vector<EncodedSample> encode_all(std::span<const TokenStream> streams,
                                      std::span<const CorpusRecord> records,
                                      const Vocabulary& vocab, std::size_t max_len) {
  std::vector<EncodedSample> out;
  out.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    out.push_back({encode(streams[i], vocab, max_len), records[i].labels});
  }
  return out;
}

std::string resolve_model_path(const Options& o) {
  if (!o.model_path.empty()) return o.model_path;
  if (const char* env = std::getenv(kModelEnv); env && *env) return env;
  throw ConfigError(std::string("no model given: pass --model or set ") + kModelEnv);
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f << text;
}

int cmd_build_vocab(const Options& o, std::ostream& out, std::ostream& err) {
  const auto records = read_records(o, err);
  const auto streams = lex_all(records);
  const auto vocab = build_vocabulary(streams, o.top_k);
  vocab.save(o.out_path);
  out << "vocabulary: " << vocab.size() << " entries from " << records.size()
      << " functions -> " << o.out_path << '\n';
  return kExitOk;
}

int cmd_train(const Options& o, std::ostream& out, std::ostream& err) {
  const auto records = read_records(o, err);
  if (records.empty()) throw EmptyInputError("corpus '" + o.data + "' has no valid records");
  const auto streams = lex_all(records);

  const auto spec = o.kfold > 0 ? SplitSpec::kfold(o.kfold, o.seed) : SplitSpec::holdout(o.seed);
  Vocabulary vocab;
  if (!o.vocab_path.empty()) {
    vocab = Vocabulary::load(o.vocab_path);
  } else if (spec.mode == SplitMode::Holdout) {
    // Identifiers are counted on the training partition only.
    std::vector<Labels> labels;
    for (const auto& r : records) labels.push_back(r.labels);
    const auto parts = split(labels, spec);
    std::vector<TokenStream> train_streams;
    for (auto i : parts[0]) train_streams.push_back(streams[i]);
    vocab = build_vocabulary(train_streams, o.top_k);
  } else {
    vocab = build_vocabulary(streams, o.top_k);
  }

  TrainConfig cfg;
  cfg.epochs = o.epochs;
  cfg.batch_size = o.batch_size;
  cfg.seed = o.seed;
  cfg.hp = o.hp;
  cfg.hp.vocab_size = vocab.size();
  const auto dataset = encode_all(streams, records, vocab, cfg.hp.max_len);

  const auto outcome = train(dataset, cfg, spec, [&](std::size_t fold, const EpochRecord& r) {
    if (fold) out << "fold " << fold << " ";
    out << "epoch " << r.epoch << "  train_loss " << std::fixed << std::setprecision(4)
        << r.train_loss << "  val_loss " << r.validation_loss << std::defaultfloat << '\n';
  });

  save_model(outcome.model, vocab, o.out_path);
  if (!o.history_path.empty()) {
    std::ofstream h(o.history_path, std::ios::binary);
    if (!h) throw IoError("cannot open '" + o.history_path + "' for writing");
    write_history(h, outcome.histories);
  }
  out << (spec.mode == SplitMode::Holdout ? "Test split metrics\n"
                                          : "Mean validation metrics over folds\n");
  out << metrics::format_table(outcome.metrics);
  if (!o.metrics_path.empty()) write_text_file(o.metrics_path, metrics::to_ndjson(outcome.metrics));
  out << "model -> " << o.out_path << '\n';
  return kExitOk;
}

std::optional<metrics::ComparisonRow> parse_baseline(const std::string& text) {
  if (text.empty()) return std::nullopt;
  std::vector<std::string> fields;
  std::stringstream ss(text);
  for (std::string f; std::getline(ss, f, ',');) fields.push_back(f);
  if (fields.size() != 4) throw ConfigError("baseline must be NAME,PRECISION,RECALL,F1");
  try {
    return metrics::ComparisonRow{fields[0], std::stod(fields[1]), std::stod(fields[2]),
                                  std::stod(fields[3])};
  } catch (const std::exception&) {
    throw ConfigError("baseline values must be numbers: '" + text + "'");
  }
}

int cmd_eval(const Options& o, std::ostream& out, std::ostream& err) {
  const auto saved = load_model(resolve_model_path(o));
  const auto records = read_records(o, err);
  if (records.empty()) throw EmptyInputError("corpus '" + o.data + "' has no valid records");
  const auto streams = lex_all(records);
  const auto samples = encode_all(streams, records, saved.vocab, saved.model.hp.max_len);
  const auto ev = evaluate_model(saved.model, samples, o.threshold);

  out << metrics::format_table(ev.report);
  if (const auto baseline = parse_baseline(o.baseline)) {
    const auto& ours = ev.report.heads[0];
    const std::vector<metrics::ComparisonRow> rows = {
        *baseline, {"Sherlock", ours.precision, ours.recall, ours.f1}};
    out << '\n' << metrics::format_comparison(rows, std::string(kHeadNames[0]));
  }
  if (!o.metrics_path.empty()) write_text_file(o.metrics_path, metrics::to_ndjson(ev.report));
  return kExitOk;
}

int cmd_scan(const Options& o, std::ostream& out, std::ostream&) {
  const auto saved = load_model(resolve_model_path(o));
  std::string source;
  if (o.file == "-") {
    source.assign(std::istreambuf_iterator<char>(std::cin), std::istreambuf_iterator<char>());
  } else {
    std::ifstream in(o.file, std::ios::binary);
    if (!in) throw IoError("cannot open '" + o.file + "'");
    source.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  const auto result = predict(saved.model, source, saved.vocab);
  if (o.json_output) {
    nlohmann::ordered_json j;
    for (std::size_t h = 0; h < kHeadCount; ++h) {
      j["probabilities"][std::string(kHeadNames[h])] = result.vulnerable[h];
    }
    j["token_count"] = result.token_count;
    j["model_format_version"] = kModelFormatVersion;
    out << j.dump() << '\n';
    return kExitOk;
  }
  for (std::size_t h = 0; h < kHeadCount; ++h) {
    out << std::left << std::setw(12) << kHeadNames[h] << std::fixed << std::setprecision(4)
        << result.vulnerable[h] << (result.vulnerable[h] >= o.threshold ? "  VULNERABLE" : "")
        << '\n';
  }
  out << std::defaultfloat << "tokens: " << result.token_count << '\n';
  return kExitOk;
}

int cmd_serve(const Options& o, std::ostream& out, std::ostream& err) {
  auto saved = std::make_shared<const SavedModel>(load_model(resolve_model_path(o)));
  ServiceOptions so;
  so.max_body_bytes = o.max_body_bytes;
  auto service = std::make_shared<const ScanService>(saved, so);
  ScanServer server(service);
  const int port = server.bind(o.host, o.port);
  if (port < 0) {
    err << "cannot bind " << o.host << ":" << o.port << '\n';
    return kExitRuntime;
  }
  out << "serving on http://" << o.host << ":" << port << " (POST /scan, GET /health)"
      << std::endl;
  return server.listen() ? kExitOk : kExitRuntime;
}

int cmd_stats(const Options& o, std::ostream& out, std::ostream& err) {
  const auto records = read_records(o, err);
  const auto stats = imbalance_stats(records);
  out << format_imbalance(stats);
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Function-level multi-CWE vulnerability detector for C/C++", "sherlock"};
  app.require_subcommand(1);
  app.fallthrough();
  auto* config_opt = app.add_option("--config", o.config_path, "key=value settings file");
  auto* seed_opt = app.add_option("--seed", o.seed, "Random seed for splits and training");

  std::map<std::string, CLI::Option*> opts;

  auto* vocab_cmd = app.add_subcommand("build-vocab", "Build a token vocabulary from a corpus");
  vocab_cmd->add_option("--data", o.data, "Corpus (.ndjson)")->required();
  vocab_cmd->add_option("--out", o.out_path, "Vocabulary output (.tsv)")->required();
  opts["vocab.top_k"] = vocab_cmd->add_option("--top-k", o.top_k, "Identifiers to keep");
  vocab_cmd->add_flag("--strict", o.strict, "Abort on the first malformed line");

  auto* train_cmd = app.add_subcommand("train", "Train a model");
  train_cmd->add_option("--data", o.data, "Corpus (.ndjson)")->required();
  train_cmd->add_option("--out", o.out_path, "Model output (.shlk)")->required();
  train_cmd->add_option("--vocab", o.vocab_path, "Existing vocabulary (.tsv)");
  opts["train.top_k"] = train_cmd->add_option("--top-k", o.top_k, "Identifiers to keep");
  opts["epochs"] = train_cmd->add_option("--epochs", o.epochs, "Training epochs");
  opts["batch_size"] = train_cmd->add_option("--batch-size", o.batch_size, "Samples per Adam step");
  opts["max_len"] = train_cmd->add_option("--max-len", o.hp.max_len, "Tokens per function");
  opts["learning_rate"] = train_cmd->add_option("--lr", o.hp.learning_rate, "Adam learning rate");
  opts["dropout_rate"] = train_cmd->add_option("--dropout", o.hp.dropout_rate, "Dropout rate after pooling");
  opts["conv_filters"] = train_cmd->add_option("--filters", o.hp.conv_filters, "Convolution filters");
  opts["kernel_size"] = train_cmd->add_option("--kernel-size", o.hp.kernel_size, "Convolution width");
  opts["embed_dim"] = train_cmd->add_option("--embed-dim", o.hp.embed_dim, "Embedding width");
  opts["dense1"] = train_cmd->add_option("--dense1", o.hp.dense1, "First dense layer width");
  opts["dense2"] = train_cmd->add_option("--dense2", o.hp.dense2, "Second dense layer width");
  opts["kfold"] = train_cmd->add_option("--kfold", o.kfold, "k-fold CV instead of 80/10/10");
  train_cmd->add_option("--history", o.history_path, "Per-epoch history (.ndjson)");
  train_cmd->add_option("--metrics-out", o.metrics_path, "Final metrics (.ndjson)");
  train_cmd->add_flag("--strict", o.strict, "Abort on the first malformed line");

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a model on a labeled corpus");
  opts["eval.model"] = eval_cmd->add_option("--model", o.model_path, "Model (.shlk)");
  eval_cmd->add_option("--data", o.data, "Corpus (.ndjson)")->required();
  opts["eval.threshold"] = eval_cmd->add_option("--threshold", o.threshold, "Decision threshold");
  eval_cmd->add_option("--metrics-out", o.metrics_path, "Metrics (.ndjson)");
  opts["baseline"] =
      eval_cmd->add_option("--baseline", o.baseline, "Comparison row NAME,PRECISION,RECALL,F1");
  eval_cmd->add_flag("--strict", o.strict, "Abort on the first malformed line");

  auto* scan_cmd = app.add_subcommand("scan", "Scan one function");
  opts["scan.model"] = scan_cmd->add_option("--model", o.model_path, "Model (.shlk)");
  scan_cmd->add_option("--file", o.file, "Source file, '-' for stdin");
  opts["scan.threshold"] = scan_cmd->add_option("--threshold", o.threshold, "Decision threshold");
  scan_cmd->add_flag("--json", o.json_output, "Print JSON");

  auto* serve_cmd = app.add_subcommand("serve", "Serve the HTTP scan API");
  opts["serve.model"] = serve_cmd->add_option("--model", o.model_path, "Model (.shlk)");
  opts["host"] = serve_cmd->add_option("--host", o.host, "Bind address");
  opts["port"] = serve_cmd->add_option("--port", o.port, "TCP port, 0 picks one");
  opts["max_body_bytes"] = serve_cmd->add_option("--max-body-bytes", o.max_body_bytes, "Largest accepted request body");

  auto* stats_cmd = app.add_subcommand("stats", "Per-head class balance of a corpus");
  stats_cmd->add_option("--data", o.data, "Corpus (.ndjson)")->required();
  stats_cmd->add_flag("--strict", o.strict, "Abort on the first malformed line");

  std::vector<std::string> argv_storage{"sherlock"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_storage) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    if (!args.empty()) err << "error: " << e.what() << '\n';
    err << app.help();
    return kExitUsage;
  }

  try {
    if (!o.config_path.empty()) {
      const auto cfg = Config::load(o.config_path);
      from_config(cfg, seed_opt, "seed", o.seed);
      from_config(cfg, opts["vocab.top_k"]->count() ? opts["vocab.top_k"] : opts["train.top_k"],
                  "top_k", o.top_k);
      from_config(cfg, opts["epochs"], "epochs", o.epochs);
      from_config(cfg, opts["batch_size"], "batch_size", o.batch_size);
      from_config(cfg, opts["max_len"], "max_len", o.hp.max_len);
      from_config(cfg, opts["learning_rate"], "learning_rate", o.hp.learning_rate);
      from_config(cfg, opts["dropout_rate"], "dropout_rate", o.hp.dropout_rate);
      from_config(cfg, opts["conv_filters"], "conv_filters", o.hp.conv_filters);
      from_config(cfg, opts["kernel_size"], "kernel_size", o.hp.kernel_size);
      from_config(cfg, opts["embed_dim"], "embed_dim", o.hp.embed_dim);
      from_config(cfg, opts["dense1"], "dense1", o.hp.dense1);
      from_config(cfg, opts["dense2"], "dense2", o.hp.dense2);
      from_config(cfg, opts["kfold"], "kfold", o.kfold);
      from_config(cfg, opts["baseline"], "baseline", o.baseline);
      from_config(cfg, opts["host"], "host", o.host);
      from_config(cfg, opts["port"], "port", o.port);
      from_config(cfg, opts["max_body_bytes"], "max_body_bytes", o.max_body_bytes);
      const bool threshold_given =
          opts["eval.threshold"]->count() > 0 || opts["scan.threshold"]->count() > 0;
      if (!threshold_given) from_config(cfg, nullptr, "threshold", o.threshold);
      const bool model_given = opts["eval.model"]->count() > 0 ||
                               opts["scan.model"]->count() > 0 || opts["serve.model"]->count() > 0;
      if (!model_given) from_config(cfg, nullptr, "model", o.model_path);
    }
    (void)config_opt;

    if (vocab_cmd->parsed()) return cmd_build_vocab(o, out, err);
    if (train_cmd->parsed()) return cmd_train(o, out, err);
    if (eval_cmd->parsed()) return cmd_eval(o, out, err);
    if (scan_cmd->parsed()) return cmd_scan(o, out, err);
    if (serve_cmd->parsed()) return cmd_serve(o, out, err);
    if (stats_cmd->parsed()) return cmd_stats(o, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace sherlock::cli
