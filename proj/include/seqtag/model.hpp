// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "seqtag/crf.hpp"
#include "seqtag/data.hpp"
#include "seqtag/eval.hpp"
#include "seqtag/layers.hpp"

namespace seqtag {

/// The seven compared architectures, each ending in a CRF.
enum class Variant { crf_only, cnn_crf, rnn_crf, gru_crf, lstm_crf, bigru_crf, bigru_cnn_crf };

inline constexpr std::array<Variant, 7> kAllVariants = {
    Variant::crf_only, Variant::cnn_crf,   Variant::rnn_crf,       Variant::gru_crf,
    Variant::lstm_crf, Variant::bigru_crf, Variant::bigru_cnn_crf};

std::string to_string(Variant v);
/// Human-readable row label, e.g. "Bidirectional GRU+CNN-CRF".
std::string display_name(Variant v);
std::optional<Variant> parse_variant(std::string_view name);
/// Comma-separated list of the accepted variant names.
std::string variant_names();

bool uses_conv(Variant v);
/// Recurrent cell of the variant, if any.
std::optional<CellKind> recurrent_kind(Variant v);
bool is_bidirectional(Variant v);

struct ModelConfig {
  Variant variant = Variant::bigru_cnn_crf;
  std::size_t embedding_dim = 128;
  std::size_t hidden_dim = 128;
  double learning_rate = 0.005;
  std::size_t epochs = 20;
  std::uint64_t seed = 1;
  std::size_t kernel_width = 3;
  std::size_t conv_channels = 128;
  double clip_norm = 5.0;

  bool operator==(const ModelConfig&) const = default;
};

/// Embedding -> [recurrent | bidirectional GRU] -> [conv + relu] -> dense -> CRF,
/// with the optional stages selected by the variant.
class TaggerModel {
 public:
  /// Initializes every parameter from config.seed. Throws ConfigError for an
  /// invalid configuration and ArgumentError for a vocabulary without tags.
  TaggerModel(ModelConfig config, Vocabulary vocab);

  const ModelConfig& config() const { return config_; }
  const Vocabulary& vocab() const { return vocab_; }
  std::size_t num_tags() const { return vocab_.tag_count(); }

  /// T x K emission scores without touching any cache.
  Tensor emissions(std::span<const std::size_t> token_ids) const;

  /// CRF negative log-likelihood of the gold tags.
  double loss(std::span<const std::size_t> token_ids, std::span<const std::size_t> gold) const;

  /// Loss plus full backward pass; gradients accumulate into the parameters.
  double loss_and_backward(std::span<const std::size_t> token_ids,
                           std::span<const std::size_t> gold);

  void zero_grad();
  /// Every trainable tensor in a fixed order.
  ParamList parameters();
  /// Same slots for read-only use; callers must not write through them.
  ParamList parameters() const;
  /// Sum of the element counts of all declared parameter shapes.
  std::size_t parameter_count() const;

  TagPath decode(std::span<const std::size_t> token_ids) const;
  /// Tags for raw tokens; unknown tokens map to UNK. Throws ArgumentError on
  /// empty input.
  std::vector<std::string> predict(const std::vector<std::string>& tokens) const;

  bool has_recurrent() const { return rnn_.has_value() || birnn_.has_value(); }
  bool has_conv() const { return conv_.has_value(); }

  Embedding& embedding() { return embedding_; }
  CrfParams& crf() { return crf_; }
  const CrfParams& crf() const { return crf_; }

 private:
  Tensor forward_train(std::span<const std::size_t> token_ids);

  ModelConfig config_;
  Vocabulary vocab_;
  Embedding embedding_;
  std::optional<Recurrent> rnn_;
  std::optional<Bidirectional> birnn_;
  std::optional<Conv1d> conv_;
  Relu relu_;
  Dense projection_;
  CrfParams crf_;
};

TaggerModel build_model(const ModelConfig& config, const Vocabulary& vocab);

// --- Training --------------------------------------------------------------

struct EpochRecord {
  std::size_t epoch = 0;     // 1-based
  double train_loss = 0.0;   // summed per-sentence NLL during the epoch
  double val_f1 = 0.0;       // weighted F1, percent
  double val_accuracy = 0.0; // percent
};

struct TrainingReport {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Plain per-sentence SGD with global gradient-norm clipping. Keeps the
/// parameters of the epoch with the best validation weighted F1 (token
/// accuracy breaks ties, and stands in when validation has no entity tags).
TrainingReport train(TaggerModel& model, const std::vector<TaggedSentence>& train_set,
                     const std::vector<TaggedSentence>& val_set,
                     const EpochCallback& on_epoch = {});

/// L2 norm of all gradients; scales them down to max_norm when above it.
double clip_gradients(ParamList& params, double max_norm);
void sgd_step(ParamList& params, double learning_rate);

/// Decodes every sentence and scores it against its gold tags.
TagCounts count_predictions(const TaggerModel& model, const std::vector<TaggedSentence>& data);

// --- Persistence -----------------------------------------------------------

inline constexpr std::string_view kModelMagic = "SEQTAG1";
inline constexpr std::uint8_t kModelFormatVersion = 1;

/// Magic, version byte, payload length, payload (config, vocabulary,
/// parameter blocks), CRC-32 of the payload.
std::string serialize_model(const TaggerModel& model);
/// Throws FormatError, VersionError, TruncationError or ChecksumError.
TaggerModel deserialize_model(std::string_view bytes);

void save_model(const TaggerModel& model, const std::string& path);
TaggerModel load_model(const std::string& path);

}  // namespace seqtag
