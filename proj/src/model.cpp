// SPDX-License-Identifier: Apache-2.0
#include "seqtag/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "seqtag/errors.hpp"

namespace seqtag {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::crf_only:
      return "crf_only";
    case Variant::cnn_crf:
      return "cnn_crf";
    case Variant::rnn_crf:
      return "rnn_crf";
    case Variant::gru_crf:
      return "gru_crf";
    case Variant::lstm_crf:
      return "lstm_crf";
    case Variant::bigru_crf:
      return "bigru_crf";
    case Variant::bigru_cnn_crf:
      return "bigru_cnn_crf";
  }
  return "?";
}

std::string display_name(Variant v) {
  switch (v) {
    case Variant::crf_only:
      return "CRF";
    case Variant::cnn_crf:
      return "CNN-CRF";
    case Variant::rnn_crf:
      return "RNN-CRF";
    case Variant::gru_crf:
      return "GRU-CRF";
    case Variant::lstm_crf:
      return "LSTM-CRF";
    case Variant::bigru_crf:
      return "Bidirectional GRU-CRF";
    case Variant::bigru_cnn_crf:
      return "Bidirectional GRU+CNN-CRF";
  }
  return "?";
}

std::optional<Variant> parse_variant(std::string_view name) {
  for (Variant v : kAllVariants) {
    if (to_string(v) == name) return v;
  }
  return std::nullopt;
}

std::string variant_names() {
  std::string out;
  for (Variant v : kAllVariants) {
    if (!out.empty()) out += ", ";
    out += to_string(v);
  }
  return out;
}

bool uses_conv(Variant v) { return v == Variant::cnn_crf || v == Variant::bigru_cnn_crf; }

std::optional<CellKind> recurrent_kind(Variant v) {
  switch (v) {
    case Variant::rnn_crf:
      return CellKind::simple_rnn;
    case Variant::gru_crf:
    case Variant::bigru_crf:
    case Variant::bigru_cnn_crf:
      return CellKind::gru;
    case Variant::lstm_crf:
      return CellKind::lstm;
    default:
      return std::nullopt;
  }
}

bool is_bidirectional(Variant v) {
  return v == Variant::bigru_crf || v == Variant::bigru_cnn_crf;
}

// --- TaggerModel -----------------------------------------------------------

namespace {

void check_config(const ModelConfig& c) {
  if (c.embedding_dim == 0 || c.hidden_dim == 0 || c.conv_channels == 0) {
    throw ConfigError("model dimensions must be positive");
  }
  if (c.kernel_width == 0 || c.kernel_width % 2 == 0) {
    throw ConfigError("kernel_width must be odd, got " + std::to_string(c.kernel_width));
  }
  if (!(c.learning_rate >= 0.0) || !std::isfinite(c.learning_rate)) {
    throw ConfigError("learning_rate must be a finite non-negative number");
  }
  if (!(c.clip_norm > 0.0)) throw ConfigError("clip_norm must be positive");
  if (!parse_variant(to_string(c.variant))) throw ConfigError("unknown model variant");
}

}  // namespace

TaggerModel::TaggerModel(ModelConfig config, Vocabulary vocab)
    : config_(config), vocab_(std::move(vocab)) {
  check_config(config_);
  if (vocab_.tag_count() == 0) throw ArgumentError("vocabulary has no tags");

  Rng rng(config_.seed);
  embedding_ = Embedding(vocab_.token_count(), config_.embedding_dim, rng);
  std::size_t features = config_.embedding_dim;
  if (auto kind = recurrent_kind(config_.variant)) {
    if (is_bidirectional(config_.variant)) {
      RecurrentCellParams fwd(*kind, features, config_.hidden_dim);
      RecurrentCellParams bwd(*kind, features, config_.hidden_dim);
      fwd.initialize(rng);
      bwd.initialize(rng);
      birnn_.emplace(std::move(fwd), std::move(bwd));
      features = 2 * config_.hidden_dim;
    } else {
      RecurrentCellParams cell(*kind, features, config_.hidden_dim);
      cell.initialize(rng);
      rnn_.emplace(std::move(cell));
      features = config_.hidden_dim;
    }
  }
  if (uses_conv(config_.variant)) {
    conv_.emplace(config_.kernel_width, features, config_.conv_channels, rng);
    features = config_.conv_channels;
  }
  projection_ = Dense(features, vocab_.tag_count(), rng);
  crf_ = CrfParams(vocab_.tag_count());
  crf_.initialize(rng);
}

TaggerModel build_model(const ModelConfig& config, const Vocabulary& vocab) {
  return TaggerModel(config, vocab);
}

Tensor TaggerModel::emissions(std::span<const std::size_t> token_ids) const {
  Tensor x = embedding_.lookup(token_ids);
  if (birnn_) x = birnn_->apply(x);
  if (rnn_) x = rnn_->apply(x, false);
  if (conv_) x = activation(Activation::relu, conv_->apply(x));
  return projection_.apply(x);
}

Tensor TaggerModel::forward_train(std::span<const std::size_t> token_ids) {
  Tensor x = embedding_.forward(token_ids);
  if (birnn_) x = birnn_->forward(x);
  if (rnn_) x = rnn_->forward(x, false);
  if (conv_) x = relu_.forward(conv_->forward(x));
  return projection_.forward(x);
}

double TaggerModel::loss(std::span<const std::size_t> token_ids,
                         std::span<const std::size_t> gold) const {
  return nll_loss(emissions(token_ids), gold, crf_);
}

double TaggerModel::loss_and_backward(std::span<const std::size_t> token_ids,
                                      std::span<const std::size_t> gold) {
  const Tensor em = forward_train(token_ids);
  CrfGradients g = crf_gradients(em, gold, crf_);
  axpy(1.0, g.d_transitions.data(), crf_.transitions.grad.data());

  Tensor d = projection_.backward(g.d_emissions);
  if (conv_) d = conv_->backward(relu_.backward(d));
  if (rnn_) d = rnn_->backward(d);
  if (birnn_) d = birnn_->backward(d);
  embedding_.backward(d);
  return g.loss;
}

void TaggerModel::zero_grad() {
  embedding_.zero_grad();
  if (birnn_) birnn_->zero_grad();
  if (rnn_) rnn_->zero_grad();
  if (conv_) conv_->zero_grad();
  projection_.zero_grad();
  crf_.zero_grad();
}

ParamList TaggerModel::parameters() {
  ParamList out;
  embedding_.collect(out, "embedding");
  if (birnn_) birnn_->collect(out, "birnn");
  if (rnn_) rnn_->collect(out, "rnn");
  if (conv_) conv_->collect(out, "conv");
  projection_.collect(out, "projection");
  crf_.collect(out, "crf");
  return out;
}

ParamList TaggerModel::parameters() const { return const_cast<TaggerModel*>(this)->parameters(); }

std::size_t TaggerModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& slot : parameters()) n += slot.param->value.size();
  return n;
}

TagPath TaggerModel::decode(std::span<const std::size_t> token_ids) const {
  return viterbi_decode(emissions(token_ids), crf_).tags;
}

std::vector<std::string> TaggerModel::predict(const std::vector<std::string>& tokens) const {
  if (tokens.empty()) throw ArgumentError("cannot tag an empty token sequence");
  const TagPath path = decode(vocab_.encode_tokens(tokens));
  std::vector<std::string> tags;
  tags.reserve(path.size());
  for (std::size_t id : path) tags.push_back(vocab_.tag(id));
  return tags;
}

// --- Training --------------------------------------------------------------

double clip_gradients(ParamList& params, double max_norm) {
  double sq = 0.0;
  auto visit = [&params](auto&& fn) {
    for (auto& slot : params) {
      Tensor& g = slot.param->grad;
      if (slot.rows != nullptr) {
        for (std::size_t r : *slot.rows) fn(g.row(r));
      } else {
        fn(g.data());
      }
    }
  };
  visit([&sq](std::span<double> g) {
    for (double v : g) sq += v * v;
  });
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    visit([scale](std::span<double> g) {
      for (double& v : g) v *= scale;
    });
  }
  return norm;
}

void sgd_step(ParamList& params, double learning_rate) {
  for (auto& slot : params) {
    Parameter& p = *slot.param;
    if (slot.rows != nullptr) {
      for (std::size_t r : *slot.rows) axpy(-learning_rate, p.grad.row(r), p.value.row(r));
    } else {
      axpy(-learning_rate, p.grad.data(), p.value.data());
    }
  }
}

TagCounts count_predictions(const TaggerModel& model, const std::vector<TaggedSentence>& data) {
  TagSequences gold, pred;
  gold.reserve(data.size());
  pred.reserve(data.size());
  for (const auto& s : data) {
    gold.push_back(s.tags);
    pred.push_back(model.predict(s.tokens));
  }
  return accumulate_counts(gold, pred);
}

namespace {

struct EncodedSentence {
  std::vector<std::size_t> tokens;
  std::vector<std::size_t> tags;
};

std::vector<EncodedSentence> encode_all(const Vocabulary& vocab,
                                        const std::vector<TaggedSentence>& data) {
  std::vector<EncodedSentence> out;
  out.reserve(data.size());
  for (const auto& s : data) {
    validate(s);
    auto tags = vocab.encode_tags(s.tags);
    auto ids = vocab.encode_tokens(s.tokens);
    out.push_back({std::move(ids), std::move(tags)});
  }
  return out;
}

}  // namespace

TrainingReport train(TaggerModel& model, const std::vector<TaggedSentence>& train_set,
                     const std::vector<TaggedSentence>& val_set, const EpochCallback& on_epoch) {
  if (train_set.empty()) throw ArgumentError("training set is empty");
  if (val_set.empty()) throw ArgumentError("validation set is empty");
  const auto encoded = encode_all(model.vocab(), train_set);
  for (const auto& s : val_set) model.vocab().encode_tags(s.tags);

  const ModelConfig& cfg = model.config();
  // Separate stream from initialization so the shuffle order does not depend
  // on how many parameters the variant has.
  Rng shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(encoded.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  ParamList params = model.parameters();
  std::vector<Tensor> best_values;
  double best_f1 = -1.0, best_acc = -1.0;
  TrainingReport report;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    for (std::size_t idx : order) {
      model.zero_grad();
      epoch_loss += model.loss_and_backward(encoded[idx].tokens, encoded[idx].tags);
      clip_gradients(params, cfg.clip_norm);
      sgd_step(params, cfg.learning_rate);
    }
    model.zero_grad();

    const TagCounts counts = count_predictions(model, val_set);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = epoch_loss;
    const MetricsReport m = has_entity_support(counts) ? weighted_average(counts) : MetricsReport{};
    rec.val_f1 = m.weighted.f1;
    rec.val_accuracy = counts.total_tokens == 0 ? 0.0
                                                : 100.0 * static_cast<double>(counts.correct_tokens) /
                                                      static_cast<double>(counts.total_tokens);
    report.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (rec.val_f1 > best_f1 || (rec.val_f1 == best_f1 && rec.val_accuracy > best_acc)) {
      best_f1 = rec.val_f1;
      best_acc = rec.val_accuracy;
      report.best_epoch = epoch;
      best_values.clear();
      for (const auto& slot : params) best_values.push_back(slot.param->value);
    }
  }
  if (!best_values.empty()) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i].param->value = best_values[i];
  }
  return report;
}

}  // namespace seqtag
