// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "seqtag/tensor.hpp"

namespace seqtag {

using Rng = std::mt19937_64;

/// A trainable tensor and its accumulated gradient (same shape).
struct Parameter {
  Tensor value;
  Tensor grad;

  Parameter() = default;
  explicit Parameter(std::vector<std::size_t> shape) : value(shape), grad(std::move(shape)) {}
};

/// Uniform fill on [-s, s], s = sqrt(6 / (fan_in + fan_out)).
void glorot_uniform(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng);

/// Non-owning view of a parameter used by optimizers and gradient checks.
/// `rows`, when set, lists the only leading-axis rows whose gradient may be
/// non-zero (row-sparse gradients of the embedding table).
struct ParamSlot {
  std::string name;
  Parameter* param = nullptr;
  const std::vector<std::size_t>* rows = nullptr;
};

using ParamList = std::vector<ParamSlot>;

inline constexpr std::size_t kPadId = 0;
inline constexpr std::size_t kUnkId = 1;

// ---------------------------------------------------------------------------

class Embedding {
 public:
  Embedding() = default;
  Embedding(std::size_t vocab_size, std::size_t dim, Rng& rng);

  std::size_t vocab_size() const { return table.value.dim(0); }
  std::size_t dim() const { return table.value.dim(1); }

  /// T x dim matrix of looked-up rows.
  Tensor forward(std::span<const std::size_t> ids);
  Tensor lookup(std::span<const std::size_t> ids) const;
  /// Accumulates d_out rows into the table gradient. The PAD row never
  /// receives gradient.
  void backward(const Tensor& d_out);

  void zero_grad();
  void collect(ParamList& out, const std::string& prefix);

  Parameter table;
  /// Rows with pending gradient, sorted and unique after backward().
  std::vector<std::size_t> touched_rows;

 private:
  std::vector<std::size_t> ids_;
};

// ---------------------------------------------------------------------------

class Dense {
 public:
  Dense() = default;
  Dense(std::size_t in_dim, std::size_t out_dim, Rng& rng);

  std::size_t in_dim() const { return weights.value.dim(0); }
  std::size_t out_dim() const { return weights.value.dim(1); }

  Tensor forward(const Tensor& inputs);
  Tensor apply(const Tensor& inputs) const;
  Tensor backward(const Tensor& d_out);

  void zero_grad();
  void collect(ParamList& out, const std::string& prefix);

  Parameter weights;  // in x out
  Parameter bias;     // out

 private:
  Tensor inputs_;
};

// ---------------------------------------------------------------------------

/// Same-length 1-D convolution over the time axis with symmetric zero padding.
class Conv1d {
 public:
  Conv1d() = default;
  /// Throws ConfigError for an even kernel width.
  Conv1d(std::size_t kernel_width, std::size_t in_channels, std::size_t out_channels, Rng& rng);

  std::size_t kernel_width() const { return kernel.value.dim(0); }
  std::size_t in_channels() const { return kernel.value.dim(1); }
  std::size_t out_channels() const { return kernel.value.dim(2); }

  Tensor forward(const Tensor& inputs);
  Tensor apply(const Tensor& inputs) const;
  Tensor backward(const Tensor& d_out);

  void zero_grad();
  void collect(ParamList& out, const std::string& prefix);

  Parameter kernel;  // width x in x out
  Parameter bias;    // out

 private:
  Tensor inputs_;
};

/// Elementwise rectifier that remembers its output for backward.
class Relu {
 public:
  Tensor forward(const Tensor& inputs);
  Tensor backward(const Tensor& d_out) const;

 private:
  Tensor outputs_;
};

// ---------------------------------------------------------------------------

enum class CellKind { simple_rnn, gru, lstm };

std::size_t gate_count(CellKind kind);
std::string to_string(CellKind kind);

/// Per-gate weights over the concatenated input [x; h], each
/// (input_dim + hidden_dim) x hidden_dim, plus one bias per gate.
///
/// Gate order: simple_rnn {a}; gru {update, reset, candidate};
/// lstm {input, forget, output, candidate}.
struct RecurrentCellParams {
  CellKind kind = CellKind::gru;
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  std::vector<Parameter> weights;
  std::vector<Parameter> biases;

  RecurrentCellParams() = default;
  /// Zero-valued parameters of the right shapes.
  RecurrentCellParams(CellKind kind, std::size_t input_dim, std::size_t hidden_dim);

  /// Glorot weights, zero biases, LSTM forget bias 1.
  void initialize(Rng& rng);
  void zero_grad();
  void collect(ParamList& out, const std::string& prefix);
};

struct CellState {
  std::vector<double> h;
  std::vector<double> c;  // lstm only

  static CellState zeros(const RecurrentCellParams& params);
};

CellState cell_step(const RecurrentCellParams& params, std::span<const double> x,
                    const CellState& state);

/// A recurrent cell unrolled over a sequence, starting from the zero state.
class Recurrent {
 public:
  Recurrent() = default;
  explicit Recurrent(RecurrentCellParams params) : params(std::move(params)) {}

  /// T x hidden_dim. With `reversed`, steps run from T-1 down to 0 and row t
  /// is still the state after consuming input row t.
  Tensor forward(const Tensor& inputs, bool reversed);
  /// Same outputs as forward() without recording anything for backward.
  Tensor apply(const Tensor& inputs, bool reversed) const;
  /// Back-propagation through time; returns the input gradient.
  Tensor backward(const Tensor& d_out);

  void zero_grad() { params.zero_grad(); }
  void collect(ParamList& out, const std::string& prefix) { params.collect(out, prefix); }

  RecurrentCellParams params;

 private:
  struct StepCache {
    std::vector<double> concat;     // [x; h_prev]
    std::vector<double> gated;      // gru: [x; r*h_prev]
    std::vector<double> gates;      // activations, gate-major
    std::vector<double> c_prev;
    std::vector<double> c;
    std::vector<double> h_prev;
  };

  std::vector<StepCache> steps_;
  bool reversed_ = false;
};

/// Forward and reversed recurrent passes with concatenated outputs.
class Bidirectional {
 public:
  Bidirectional() = default;
  /// Throws DimensionError unless both directions share hidden_dim.
  Bidirectional(RecurrentCellParams fwd, RecurrentCellParams bwd);

  std::size_t hidden_dim() const { return forward_rnn.params.hidden_dim; }

  /// T x 2*hidden_dim; row t = [forward h_t ; backward h_t].
  Tensor forward(const Tensor& inputs);
  Tensor apply(const Tensor& inputs) const;
  Tensor backward(const Tensor& d_out);

  void zero_grad();
  void collect(ParamList& out, const std::string& prefix);

  Recurrent forward_rnn;
  Recurrent backward_rnn;
};

}  // namespace seqtag
