// SPDX-License-Identifier: Apache-2.0
#include "seqtag/cli.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "seqtag/errors.hpp"

namespace seqtag {

// --- Run configuration -----------------------------------------------------

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_integer(std::string_view key, std::string_view value) {
  T out{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ConfigError("config key '" + std::string(key) + "': expected a non-negative integer, got '" +
                      std::string(value) + "'");
  }
  return out;
}

double parse_real(std::string_view key, std::string_view value) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ConfigError("config key '" + std::string(key) + "': expected a number, got '" +
                      std::string(value) + "'");
  }
  return out;
}

Variant parse_variant_or_throw(std::string_view name) {
  auto v = parse_variant(name);
  if (!v) {
    throw ConfigError("unknown variant '" + std::string(name) + "'; valid variants: " +
                      variant_names());
  }
  return *v;
}

std::string real_string(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

RunConfig parse_run_config(std::string_view text, RunConfig cfg) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    ModelConfig& m = cfg.model;
    if (key == "variant") {
      m.variant = parse_variant_or_throw(value);
    } else if (key == "embedding_dim") {
      m.embedding_dim = parse_integer<std::size_t>(key, value);
    } else if (key == "hidden_dim") {
      m.hidden_dim = parse_integer<std::size_t>(key, value);
    } else if (key == "learning_rate") {
      m.learning_rate = parse_real(key, value);
    } else if (key == "epochs") {
      m.epochs = parse_integer<std::size_t>(key, value);
    } else if (key == "seed") {
      m.seed = parse_integer<std::uint64_t>(key, value);
    } else if (key == "kernel_width") {
      m.kernel_width = parse_integer<std::size_t>(key, value);
    } else if (key == "conv_channels") {
      m.conv_channels = parse_integer<std::size_t>(key, value);
    } else if (key == "clip_norm") {
      m.clip_norm = parse_real(key, value);
    } else if (key == "min_count") {
      cfg.min_count = parse_integer<std::size_t>(key, value);
    } else if (key == "split_seed") {
      cfg.split_seed = parse_integer<std::uint64_t>(key, value);
    } else if (key == "corpus") {
      cfg.corpus = std::string(value);
    } else if (key == "output_dir") {
      cfg.output_dir = std::string(value);
    } else {
      throw ConfigError("unknown config key '" + std::string(key) + "' on line " +
                        std::to_string(line_no));
    }
  }
  return cfg;
}

std::string render_run_config(const RunConfig& cfg) {
  const ModelConfig& m = cfg.model;
  std::ostringstream out;
  out << "variant = " << to_string(m.variant) << '\n'
      << "embedding_dim = " << m.embedding_dim << '\n'
      << "hidden_dim = " << m.hidden_dim << '\n'
      << "learning_rate = " << real_string(m.learning_rate) << '\n'
      << "epochs = " << m.epochs << '\n'
      << "seed = " << m.seed << '\n'
      << "kernel_width = " << m.kernel_width << '\n'
      << "conv_channels = " << m.conv_channels << '\n'
      << "clip_norm = " << real_string(m.clip_norm) << '\n'
      << "min_count = " << cfg.min_count << '\n'
      << "split_seed = " << cfg.split_seed << '\n'
      << "corpus = " << cfg.corpus << '\n'
      << "output_dir = " << cfg.output_dir << '\n';
  return out.str();
}

// --- Subcommands -----------------------------------------------------------

namespace {

struct ConvertArgs {
  std::string input, output;
};

struct TrainArgs {
  std::optional<std::string> data, config, variant, model_out, log;
  std::optional<std::size_t> epochs;
  std::optional<std::uint64_t> seed;
};

struct EvalArgs {
  std::string data;
  std::vector<std::string> models;
  std::vector<std::string> predictions;
  std::string csv = "comparison.csv";
};

struct TagArgs {
  std::string model;
  std::string input = "-";
};

struct SynthArgs {
  std::uint64_t seed = 1;
  long long sentences = 2000;
  long long vocab_size = 100;
  long long tags = 5;
  std::string output;
};

void print_counts(const std::vector<TaggedSentence>& sentences, std::ostream& out) {
  std::size_t tokens = 0;
  std::set<std::string> tags;
  for (const auto& s : sentences) {
    tokens += s.tokens.size();
    tags.insert(s.tags.begin(), s.tags.end());
  }
  out << "sentences: " << sentences.size() << '\n'
      << "tokens: " << tokens << '\n'
      << "tag types: " << tags.size() << '\n';
}

int cmd_convert(const ConvertArgs& a, std::ostream& out) {
  const auto sentences = convert_json_corpus(read_text_file(a.input));
  write_conll_file(a.output, sentences);
  print_counts(sentences, out);
  return kExitOk;
}

/// Token ids from the training split, tag ids from the whole corpus so that
/// held-out tags stay encodable.
Vocabulary training_vocab(const DatasetSplit& split, const std::vector<TaggedSentence>& all,
                          std::size_t min_count) {
  const Vocabulary tokens = build_vocab(split.train, min_count);
  const Vocabulary tags = build_vocab(all);
  return Vocabulary(tokens.tokens(), tags.tags());
}

void print_metrics(const std::string& label, const TagCounts& counts, std::ostream& out) {
  out << label << ": accuracy "
      << format_one_decimal(counts.total_tokens == 0
                                ? 0.0
                                : 100.0 * static_cast<double>(counts.correct_tokens) /
                                      static_cast<double>(counts.total_tokens));
  if (has_entity_support(counts)) {
    const auto w = weighted_average(counts).weighted;
    out << ", weighted precision " << format_one_decimal(w.precision) << ", recall "
        << format_one_decimal(w.recall) << ", f1 " << format_one_decimal(w.f1);
  }
  out << '\n';
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
  RunConfig cfg;
  if (a.config) cfg = parse_run_config(read_text_file(*a.config), cfg);
  if (a.variant) {
    auto v = parse_variant(*a.variant);
    if (!v) {
      throw UsageError("unknown variant '" + *a.variant + "'; valid variants: " + variant_names());
    }
    cfg.model.variant = *v;
  }
  if (a.data) cfg.corpus = *a.data;
  if (a.epochs) cfg.model.epochs = *a.epochs;
  if (a.seed) cfg.model.seed = *a.seed;
  if (cfg.corpus.empty()) throw UsageError("no training data: pass --data or set 'corpus'");

  std::string model_out;
  if (a.model_out) {
    model_out = *a.model_out;
  } else if (!cfg.output_dir.empty()) {
    model_out = (std::filesystem::path(cfg.output_dir) / (to_string(cfg.model.variant) + ".model"))
                    .string();
  } else {
    throw UsageError("no model path: pass --model-out or set 'output_dir'");
  }
  const std::string log_path = a.log.value_or(model_out + ".log");

  out << render_run_config(cfg);
  const auto sentences = read_conll_file(cfg.corpus);
  SplitSpec spec;
  spec.seed = cfg.split_seed;
  const DatasetSplit split = split_dataset(sentences, spec);
  out << "split: train " << split.train.size() << ", val " << split.val.size() << ", test "
      << split.test.size() << '\n';
  if (!cfg.output_dir.empty()) {
    std::filesystem::create_directories(cfg.output_dir);
    const std::filesystem::path dir(cfg.output_dir);
    write_conll_file((dir / "train.conll").string(), split.train);
    write_conll_file((dir / "val.conll").string(), split.val);
    write_conll_file((dir / "test.conll").string(), split.test);
  }

  TaggerModel model = build_model(cfg.model, training_vocab(split, sentences, cfg.min_count));
  std::ofstream log(log_path, std::ios::app);
  if (!log) throw Error("cannot open training log '" + log_path + "'");
  log << "# variant=" << to_string(cfg.model.variant) << " seed=" << cfg.model.seed
      << " epochs=" << cfg.model.epochs << " data=" << cfg.corpus << '\n';

  const TrainingReport report = train(model, split.train, split.val, [&](const EpochRecord& r) {
    std::ostringstream line;
    line << "epoch " << r.epoch << " loss " << real_string(r.train_loss) << " val_f1 "
         << format_one_decimal(r.val_f1) << " val_accuracy " << format_one_decimal(r.val_accuracy);
    log << line.str() << std::endl;
    out << line.str() << '\n';
  });
  out << "best epoch: " << report.best_epoch << '\n';
  save_model(model, model_out);
  out << "model written to " << model_out << '\n';
  if (!split.test.empty()) print_metrics("test", count_predictions(model, split.test), out);
  return kExitOk;
}

void check_tags_known(const TaggerModel& model, const std::vector<TaggedSentence>& data,
                      const std::string& model_name) {
  for (const auto& s : data) {
    for (const auto& t : s.tags) {
      if (!model.vocab().has_tag(t)) {
        throw EvalError("data tag '" + t + "' is unknown to model " + model_name);
      }
    }
  }
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  if (a.models.empty() && a.predictions.empty()) {
    throw UsageError("eval needs at least one --models or --predictions file");
  }
  const auto gold = read_conll_file(a.data);
  TagSequences gold_tags;
  for (const auto& s : gold) gold_tags.push_back(s.tags);

  // Models are independent and immutable once loaded, so score them in parallel.
  std::vector<std::future<ComparisonRow>> jobs;
  for (const auto& path : a.models) {
    jobs.push_back(std::async(std::launch::async, [&gold, path] {
      const TaggerModel model = load_model(path);
      check_tags_known(model, gold, path);
      return ComparisonRow{display_name(model.config().variant),
                           weighted_average(count_predictions(model, gold))};
    }));
  }
  std::vector<ComparisonRow> rows;
  for (auto& j : jobs) rows.push_back(j.get());
  for (const auto& path : a.predictions) {
    const auto pred = read_conll_file(path);
    TagSequences pred_tags;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      if (i < gold.size() && pred[i].tokens != gold[i].tokens) {
        throw EvalError("sentence " + std::to_string(i) + " of " + path +
                        " has different tokens than the gold data");
      }
      pred_tags.push_back(pred[i].tags);
    }
    rows.push_back({std::filesystem::path(path).stem().string(),
                    weighted_average(accumulate_counts(gold_tags, pred_tags))});
  }

  // Disambiguate repeated names (two models of one variant).
  std::map<std::string, int> seen;
  for (const auto& r : rows) ++seen[r.name];
  std::vector<std::string> sources = a.models;
  sources.insert(sources.end(), a.predictions.begin(), a.predictions.end());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (seen[rows[i].name] > 1) {
      rows[i].name += " (" + std::filesystem::path(sources[i]).filename().string() + ")";
    }
  }

  const RenderedTable table = render_comparison_table(rows);
  out << table.text;
  std::ofstream csv(a.csv, std::ios::binary | std::ios::trunc);
  if (!csv) throw Error("cannot write '" + a.csv + "'");
  csv << table.csv;
  out << "csv written to " << a.csv << '\n';
  return kExitOk;
}

int cmd_tag(const TagArgs& a, std::istream& stdin_stream, std::ostream& out, std::ostream& err) {
  const TaggerModel model = load_model(a.model);
  std::ifstream file;
  std::istream* in = &stdin_stream;
  if (a.input != "-") {
    file.open(a.input);
    if (!file) throw Error("cannot open '" + a.input + "'");
    in = &file;
  }
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(*in, line)) {
    ++line_no;
    std::istringstream words(line);
    std::vector<std::string> tokens;
    for (std::string w; words >> w;) tokens.push_back(w);
    if (tokens.empty()) {
      err << "warning: input line " << line_no << " is empty, skipped\n";
      continue;
    }
    const auto tags = model.predict(tokens);
    for (std::size_t i = 0; i < tokens.size(); ++i) out << tokens[i] << ' ' << tags[i] << '\n';
    out << '\n' << std::flush;
  }
  return kExitOk;
}

int cmd_gen_synth(const SynthArgs& a, std::ostream& out) {
  if (a.sentences < 1) throw UsageError("--sentences must be at least 1");
  if (a.tags < 2) throw UsageError("--tags must be at least 2");
  if (a.vocab_size < a.tags) throw UsageError("--vocab-size must be at least --tags");
  const auto corpus =
      generate_synthetic_corpus(a.seed, static_cast<std::size_t>(a.sentences),
                                static_cast<std::size_t>(a.vocab_size), static_cast<std::size_t>(a.tags));
  write_conll_file(a.output, corpus);
  print_counts(corpus, out);
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::istream& in, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"Neural sequence tagger with a CRF output layer"};
  app.require_subcommand(1);

  ConvertArgs convert;
  auto* c = app.add_subcommand("convert", "Convert an auto-labeled JSON corpus to CoNLL");
  c->add_option("--input", convert.input, "Corpus document")->required();
  c->add_option("--output", convert.output, "CoNLL output file")->required();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Split a CoNLL corpus 70/10/20 and train one variant");
  t->add_option("--data", tr.data, "CoNLL corpus");
  t->add_option("--config", tr.config, "key = value run configuration");
  t->add_option("--variant", tr.variant, "One of: " + variant_names());
  t->add_option("--model-out", tr.model_out, "Model file to write");
  t->add_option("--log", tr.log, "Training log (default: <model-out>.log)");
  t->add_option("--epochs", tr.epochs, "Override the epoch count");
  t->add_option("--seed", tr.seed, "Override the model seed");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Score models or prediction files on a CoNLL file");
  e->add_option("--data", ev.data, "Gold CoNLL file")->required();
  e->add_option("--models", ev.models, "Model files");
  e->add_option("--predictions", ev.predictions, "Predicted CoNLL files");
  e->add_option("--csv", ev.csv, "CSV output path")->capture_default_str();

  TagArgs tg;
  auto* g = app.add_subcommand("tag", "Tag whitespace-tokenized sentences, one per line");
  g->add_option("--model", tg.model, "Model file")->required();
  g->add_option("--input", tg.input, "Input file, '-' for stdin")->capture_default_str();

  SynthArgs sy;
  auto* s = app.add_subcommand("gen-synth", "Write a synthetic CoNLL corpus");
  s->add_option("--seed", sy.seed)->capture_default_str();
  s->add_option("--sentences", sy.sentences)->capture_default_str();
  s->add_option("--vocab-size", sy.vocab_size)->capture_default_str();
  s->add_option("--tags", sy.tags)->capture_default_str();
  s->add_option("--output", sy.output, "CoNLL output file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (c->parsed()) return cmd_convert(convert, out);
    if (t->parsed()) return cmd_train(tr, out);
    if (e->parsed()) return cmd_eval(ev, out);
    if (g->parsed()) return cmd_tag(tg, in, out, err);
    if (s->parsed()) return cmd_gen_synth(sy, out);
  } catch (const UsageError& ex) {
    err << "usage error: " << ex.what() << '\n';
    return kExitUsage;
  } catch (const ParseError& ex) {
    err << "parse error: " << ex.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& ex) {
    err << "config error: " << ex.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace seqtag
