// SPDX-License-Identifier: Apache-2.0
#include "seqtag/layers.hpp"

#include <algorithm>
#include <cmath>

#include "seqtag/errors.hpp"

namespace seqtag {

void glorot_uniform(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double s = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-s, s);
  for (double& v : t.data()) v = dist(rng);
}

namespace {

void require_matrix(const Tensor& t, std::size_t cols, const char* what) {
  if (t.rank() != 2 || t.dim(1) != cols) {
    throw DimensionError(std::string(what) + ": expected T x " + std::to_string(cols) +
                         " input, got " + shape_string(t.shape()));
  }
}

// out = b + v * W
void affine(const Parameter& w, const Parameter& b, std::span<const double> v,
            std::span<double> out) {
  std::copy(b.value.data().begin(), b.value.data().end(), out.begin());
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (v[k] != 0.0) axpy(v[k], w.value.row(k), out);
  }
}

// Accumulates dW += v^T da, db += da, dv += W da.
void affine_backward(Parameter& w, Parameter& b, std::span<const double> v,
                     std::span<const double> da, std::span<double> dv) {
  axpy(1.0, da, b.grad.data());
  for (std::size_t k = 0; k < v.size(); ++k) {
    axpy(v[k], da, w.grad.row(k));
    dv[k] += dot(w.value.row(k), da);
  }
}

}  // namespace

// --- Embedding -------------------------------------------------------------

Embedding::Embedding(std::size_t vocab_size, std::size_t dim, Rng& rng)
    : table({vocab_size, dim}) {
  glorot_uniform(table.value, vocab_size, dim, rng);
  std::fill(table.value.row(kPadId).begin(), table.value.row(kPadId).end(), 0.0);
}

Tensor Embedding::forward(std::span<const std::size_t> ids) {
  Tensor out = lookup(ids);
  ids_.assign(ids.begin(), ids.end());
  return out;
}

Tensor Embedding::lookup(std::span<const std::size_t> ids) const {
  if (ids.empty()) throw ArgumentError("embedding lookup of an empty sequence");
  Tensor out({ids.size(), dim()});
  for (std::size_t t = 0; t < ids.size(); ++t) {
    if (ids[t] >= vocab_size()) {
      throw IndexError("token id " + std::to_string(ids[t]) + " outside vocabulary of size " +
                       std::to_string(vocab_size()));
    }
    auto src = table.value.row(ids[t]);
    std::copy(src.begin(), src.end(), out.row(t).begin());
  }
  return out;
}

void Embedding::backward(const Tensor& d_out) {
  require_matrix(d_out, dim(), "embedding backward");
  for (std::size_t t = 0; t < ids_.size(); ++t) {
    if (ids_[t] == kPadId) continue;
    axpy(1.0, d_out.row(t), table.grad.row(ids_[t]));
    touched_rows.push_back(ids_[t]);
  }
  std::sort(touched_rows.begin(), touched_rows.end());
  touched_rows.erase(std::unique(touched_rows.begin(), touched_rows.end()), touched_rows.end());
}

void Embedding::zero_grad() {
  for (std::size_t r : touched_rows) {
    auto g = table.grad.row(r);
    std::fill(g.begin(), g.end(), 0.0);
  }
  touched_rows.clear();
}

void Embedding::collect(ParamList& out, const std::string& prefix) {
  out.push_back({prefix + ".table", &table, &touched_rows});
}

// --- Dense -----------------------------------------------------------------

Dense::Dense(std::size_t in_dim, std::size_t out_dim, Rng& rng)
    : weights({in_dim, out_dim}), bias({out_dim}) {
  glorot_uniform(weights.value, in_dim, out_dim, rng);
}

Tensor Dense::forward(const Tensor& inputs) {
  Tensor out = apply(inputs);
  inputs_ = inputs;
  return out;
}

Tensor Dense::apply(const Tensor& inputs) const {
  require_matrix(inputs, in_dim(), "dense forward");
  Tensor out({inputs.dim(0), out_dim()});
  for (std::size_t t = 0; t < inputs.dim(0); ++t) affine(weights, bias, inputs.row(t), out.row(t));
  return out;
}

Tensor Dense::backward(const Tensor& d_out) {
  require_matrix(d_out, out_dim(), "dense backward");
  Tensor d_in({inputs_.dim(0), in_dim()});
  for (std::size_t t = 0; t < inputs_.dim(0); ++t) {
    affine_backward(weights, bias, inputs_.row(t), d_out.row(t), d_in.row(t));
  }
  return d_in;
}

void Dense::zero_grad() {
  weights.grad.fill(0.0);
  bias.grad.fill(0.0);
}

void Dense::collect(ParamList& out, const std::string& prefix) {
  out.push_back({prefix + ".weights", &weights, nullptr});
  out.push_back({prefix + ".bias", &bias, nullptr});
}

// --- Conv1d ----------------------------------------------------------------

Conv1d::Conv1d(std::size_t kernel_width, std::size_t in_channels, std::size_t out_channels,
               Rng& rng) {
  if (kernel_width % 2 == 0) {
    throw ConfigError("conv kernel width must be odd for same-length padding, got " +
                      std::to_string(kernel_width));
  }
  kernel = Parameter({kernel_width, in_channels, out_channels});
  bias = Parameter({out_channels});
  glorot_uniform(kernel.value, kernel_width * in_channels, kernel_width * out_channels, rng);
}

Tensor Conv1d::forward(const Tensor& inputs) {
  Tensor out = apply(inputs);
  inputs_ = inputs;
  return out;
}

Tensor Conv1d::apply(const Tensor& inputs) const {
  require_matrix(inputs, in_channels(), "conv1d forward");
  const std::size_t steps = inputs.dim(0);
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(kernel_width() / 2);
  Tensor out({steps, out_channels()});
  for (std::size_t t = 0; t < steps; ++t) {
    auto out_row = out.row(t);
    std::copy(bias.value.data().begin(), bias.value.data().end(), out_row.begin());
    for (std::size_t k = 0; k < kernel_width(); ++k) {
      const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + k) - pad;
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(steps)) continue;
      auto in_row = inputs.row(static_cast<std::size_t>(src));
      for (std::size_t i = 0; i < in_channels(); ++i) {
        if (in_row[i] == 0.0) continue;
        axpy(in_row[i],
             kernel.value.data().subspan((k * in_channels() + i) * out_channels(), out_channels()),
             out_row);
      }
    }
  }
  return out;
}

Tensor Conv1d::backward(const Tensor& d_out) {
  require_matrix(d_out, out_channels(), "conv1d backward");
  const std::size_t steps = inputs_.dim(0);
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(kernel_width() / 2);
  Tensor d_in({steps, in_channels()});
  for (std::size_t t = 0; t < steps; ++t) axpy(1.0, d_out.row(t), bias.grad.data());
  for (std::size_t t = 0; t < steps; ++t) {
    auto g = d_out.row(t);
    for (std::size_t k = 0; k < kernel_width(); ++k) {
      const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + k) - pad;
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(steps)) continue;
      auto in_row = inputs_.row(static_cast<std::size_t>(src));
      auto d_in_row = d_in.row(static_cast<std::size_t>(src));
      for (std::size_t i = 0; i < in_channels(); ++i) {
        const std::size_t offset = (k * in_channels() + i) * out_channels();
        axpy(in_row[i], g, kernel.grad.data().subspan(offset, out_channels()));
        d_in_row[i] += dot(kernel.value.data().subspan(offset, out_channels()), g);
      }
    }
  }
  return d_in;
}

void Conv1d::zero_grad() {
  kernel.grad.fill(0.0);
  bias.grad.fill(0.0);
}

void Conv1d::collect(ParamList& out, const std::string& prefix) {
  out.push_back({prefix + ".kernel", &kernel, nullptr});
  out.push_back({prefix + ".bias", &bias, nullptr});
}

Tensor Relu::forward(const Tensor& inputs) {
  outputs_ = activation(Activation::relu, inputs);
  return outputs_;
}

Tensor Relu::backward(const Tensor& d_out) const {
  Tensor d_in = d_out;
  for (std::size_t i = 0; i < d_in.size(); ++i) {
    if (outputs_[i] <= 0.0) d_in[i] = 0.0;
  }
  return d_in;
}

// --- Recurrent cells -------------------------------------------------------

std::size_t gate_count(CellKind kind) {
  switch (kind) {
    case CellKind::simple_rnn:
      return 1;
    case CellKind::gru:
      return 3;
    case CellKind::lstm:
      return 4;
  }
  return 0;
}

std::string to_string(CellKind kind) {
  switch (kind) {
    case CellKind::simple_rnn:
      return "simple_rnn";
    case CellKind::gru:
      return "gru";
    case CellKind::lstm:
      return "lstm";
  }
  return "?";
}

RecurrentCellParams::RecurrentCellParams(CellKind kind, std::size_t input_dim,
                                         std::size_t hidden_dim)
    : kind(kind), input_dim(input_dim), hidden_dim(hidden_dim) {
  for (std::size_t g = 0; g < gate_count(kind); ++g) {
    weights.emplace_back(std::vector<std::size_t>{input_dim + hidden_dim, hidden_dim});
    biases.emplace_back(std::vector<std::size_t>{hidden_dim});
  }
}

void RecurrentCellParams::initialize(Rng& rng) {
  for (std::size_t g = 0; g < weights.size(); ++g) {
    glorot_uniform(weights[g].value, input_dim + hidden_dim, hidden_dim, rng);
    biases[g].value.fill(0.0);
  }
  if (kind == CellKind::lstm) biases[1].value.fill(1.0);
}

void RecurrentCellParams::zero_grad() {
  for (auto& w : weights) w.grad.fill(0.0);
  for (auto& b : biases) b.grad.fill(0.0);
}

void RecurrentCellParams::collect(ParamList& out, const std::string& prefix) {
  for (std::size_t g = 0; g < weights.size(); ++g) {
    out.push_back({prefix + ".w" + std::to_string(g), &weights[g], nullptr});
  }
  for (std::size_t g = 0; g < biases.size(); ++g) {
    out.push_back({prefix + ".b" + std::to_string(g), &biases[g], nullptr});
  }
}

CellState CellState::zeros(const RecurrentCellParams& params) {
  CellState s;
  s.h.assign(params.hidden_dim, 0.0);
  if (params.kind == CellKind::lstm) s.c.assign(params.hidden_dim, 0.0);
  return s;
}

namespace {

struct StepResult {
  std::vector<double> concat;
  std::vector<double> gated;
  std::vector<double> gates;
  std::vector<double> h;
  std::vector<double> c;
};

StepResult step_forward(const RecurrentCellParams& p, std::span<const double> x,
                        std::span<const double> h_prev, std::span<const double> c_prev) {
  const std::size_t in = p.input_dim, hid = p.hidden_dim;
  StepResult r;
  r.concat.resize(in + hid);
  std::copy(x.begin(), x.end(), r.concat.begin());
  std::copy(h_prev.begin(), h_prev.end(), r.concat.begin() + static_cast<std::ptrdiff_t>(in));
  r.gates.assign(gate_count(p.kind) * hid, 0.0);
  auto gate = [&](std::size_t g) { return std::span<double>(r.gates).subspan(g * hid, hid); };
  r.h.resize(hid);

  switch (p.kind) {
    case CellKind::simple_rnn: {
      affine(p.weights[0], p.biases[0], r.concat, gate(0));
      for (double& v : gate(0)) v = std::tanh(v);
      std::copy(gate(0).begin(), gate(0).end(), r.h.begin());
      break;
    }
    case CellKind::gru: {
      auto z = gate(0), rs = gate(1), n = gate(2);
      affine(p.weights[0], p.biases[0], r.concat, z);
      affine(p.weights[1], p.biases[1], r.concat, rs);
      for (std::size_t j = 0; j < hid; ++j) {
        z[j] = sigmoid(z[j]);
        rs[j] = sigmoid(rs[j]);
      }
      r.gated = r.concat;
      for (std::size_t j = 0; j < hid; ++j) r.gated[in + j] = rs[j] * h_prev[j];
      affine(p.weights[2], p.biases[2], r.gated, n);
      for (std::size_t j = 0; j < hid; ++j) {
        n[j] = std::tanh(n[j]);
        r.h[j] = (1.0 - z[j]) * h_prev[j] + z[j] * n[j];
      }
      break;
    }
    case CellKind::lstm: {
      for (std::size_t g = 0; g < 4; ++g) affine(p.weights[g], p.biases[g], r.concat, gate(g));
      auto i = gate(0), f = gate(1), o = gate(2), cand = gate(3);
      r.c.resize(hid);
      for (std::size_t j = 0; j < hid; ++j) {
        i[j] = sigmoid(i[j]);
        f[j] = sigmoid(f[j]);
        o[j] = sigmoid(o[j]);
        cand[j] = std::tanh(cand[j]);
        r.c[j] = f[j] * c_prev[j] + i[j] * cand[j];
        r.h[j] = o[j] * std::tanh(r.c[j]);
      }
      break;
    }
  }
  return r;
}

}  // namespace

CellState cell_step(const RecurrentCellParams& params, std::span<const double> x,
                    const CellState& state) {
  if (x.size() != params.input_dim || state.h.size() != params.hidden_dim ||
      (params.kind == CellKind::lstm && state.c.size() != params.hidden_dim)) {
    throw DimensionError("cell_step: input " + std::to_string(x.size()) + ", state " +
                         std::to_string(state.h.size()) + " do not match cell " +
                         std::to_string(params.input_dim) + " -> " +
                         std::to_string(params.hidden_dim));
  }
  StepResult r = step_forward(params, x, state.h, state.c);
  return CellState{std::move(r.h), std::move(r.c)};
}

Tensor Recurrent::forward(const Tensor& inputs, bool reversed) {
  require_matrix(inputs, params.input_dim, "recurrent forward");
  const std::size_t steps = inputs.dim(0);
  const std::size_t hid = params.hidden_dim;
  reversed_ = reversed;
  steps_.assign(steps, {});
  Tensor out({steps, hid});
  std::vector<double> h(hid, 0.0);
  std::vector<double> c(params.kind == CellKind::lstm ? hid : 0, 0.0);
  for (std::size_t n = 0; n < steps; ++n) {
    const std::size_t t = reversed ? steps - 1 - n : n;
    StepResult r = step_forward(params, inputs.row(t), h, c);
    StepCache& cache = steps_[t];
    cache.h_prev = std::move(h);
    cache.c_prev = std::move(c);
    h = r.h;
    c = r.c;
    std::copy(h.begin(), h.end(), out.row(t).begin());
    cache.concat = std::move(r.concat);
    cache.gated = std::move(r.gated);
    cache.gates = std::move(r.gates);
    cache.c = std::move(r.c);
  }
  return out;
}

Tensor Recurrent::apply(const Tensor& inputs, bool reversed) const {
  require_matrix(inputs, params.input_dim, "recurrent forward");
  const std::size_t steps = inputs.dim(0);
  const std::size_t hid = params.hidden_dim;
  Tensor out({steps, hid});
  std::vector<double> h(hid, 0.0);
  std::vector<double> c(params.kind == CellKind::lstm ? hid : 0, 0.0);
  for (std::size_t n = 0; n < steps; ++n) {
    const std::size_t t = reversed ? steps - 1 - n : n;
    StepResult r = step_forward(params, inputs.row(t), h, c);
    h = std::move(r.h);
    c = std::move(r.c);
    std::copy(h.begin(), h.end(), out.row(t).begin());
  }
  return out;
}

Tensor Recurrent::backward(const Tensor& d_out) {
  require_matrix(d_out, params.hidden_dim, "recurrent backward");
  const std::size_t steps = steps_.size();
  const std::size_t in = params.input_dim, hid = params.hidden_dim;
  Tensor d_in({steps, in});
  std::vector<double> dh_next(hid, 0.0), dc_next(hid, 0.0);
  std::vector<double> dconcat(in + hid), dgated(in + hid), da(hid);

  for (std::size_t n = steps; n-- > 0;) {
    const std::size_t t = reversed_ ? steps - 1 - n : n;
    const StepCache& s = steps_[t];
    std::vector<double> dh(hid);
    for (std::size_t j = 0; j < hid; ++j) dh[j] = dh_next[j] + d_out(t, j);
    std::fill(dconcat.begin(), dconcat.end(), 0.0);
    auto gate = [&](std::size_t g) {
      return std::span<const double>(s.gates).subspan(g * hid, hid);
    };
    std::vector<double> dh_prev(hid, 0.0);

    switch (params.kind) {
      case CellKind::simple_rnn: {
        auto a = gate(0);
        for (std::size_t j = 0; j < hid; ++j) da[j] = dh[j] * (1.0 - a[j] * a[j]);
        affine_backward(params.weights[0], params.biases[0], s.concat, da, dconcat);
        break;
      }
      case CellKind::gru: {
        auto z = gate(0), r = gate(1), cand = gate(2);
        // candidate branch
        for (std::size_t j = 0; j < hid; ++j) {
          da[j] = dh[j] * z[j] * (1.0 - cand[j] * cand[j]);
          dh_prev[j] = dh[j] * (1.0 - z[j]);
        }
        std::fill(dgated.begin(), dgated.end(), 0.0);
        affine_backward(params.weights[2], params.biases[2], s.gated, da, dgated);
        for (std::size_t k = 0; k < in; ++k) dconcat[k] += dgated[k];
        std::vector<double> dr_pre(hid);
        for (std::size_t j = 0; j < hid; ++j) {
          const double d_rh = dgated[in + j];
          dh_prev[j] += d_rh * r[j];
          dr_pre[j] = d_rh * s.h_prev[j] * r[j] * (1.0 - r[j]);
        }
        // update gate
        for (std::size_t j = 0; j < hid; ++j) {
          da[j] = dh[j] * (cand[j] - s.h_prev[j]) * z[j] * (1.0 - z[j]);
        }
        affine_backward(params.weights[0], params.biases[0], s.concat, da, dconcat);
        affine_backward(params.weights[1], params.biases[1], s.concat, dr_pre, dconcat);
        break;
      }
      case CellKind::lstm: {
        auto i = gate(0), f = gate(1), o = gate(2), cand = gate(3);
        std::vector<double> dc(hid), d_pre(4 * hid);
        for (std::size_t j = 0; j < hid; ++j) {
          const double tc = std::tanh(s.c[j]);
          dc[j] = dc_next[j] + dh[j] * o[j] * (1.0 - tc * tc);
          d_pre[j] = dc[j] * cand[j] * i[j] * (1.0 - i[j]);
          d_pre[hid + j] = dc[j] * s.c_prev[j] * f[j] * (1.0 - f[j]);
          d_pre[2 * hid + j] = dh[j] * tc * o[j] * (1.0 - o[j]);
          d_pre[3 * hid + j] = dc[j] * i[j] * (1.0 - cand[j] * cand[j]);
          dc_next[j] = dc[j] * f[j];
        }
        for (std::size_t g = 0; g < 4; ++g) {
          affine_backward(params.weights[g], params.biases[g], s.concat,
                          std::span<const double>(d_pre).subspan(g * hid, hid), dconcat);
        }
        break;
      }
    }

    for (std::size_t k = 0; k < in; ++k) d_in(t, k) = dconcat[k];
    for (std::size_t j = 0; j < hid; ++j) dh_next[j] = dh_prev[j] + dconcat[in + j];
  }
  return d_in;
}

// --- Bidirectional ---------------------------------------------------------

Bidirectional::Bidirectional(RecurrentCellParams fwd, RecurrentCellParams bwd) {
  if (fwd.hidden_dim != bwd.hidden_dim || fwd.input_dim != bwd.input_dim) {
    throw DimensionError("bidirectional halves differ: forward " +
                         std::to_string(fwd.input_dim) + "->" + std::to_string(fwd.hidden_dim) +
                         ", backward " + std::to_string(bwd.input_dim) + "->" +
                         std::to_string(bwd.hidden_dim));
  }
  forward_rnn = Recurrent(std::move(fwd));
  backward_rnn = Recurrent(std::move(bwd));
}

namespace {

Tensor concat_columns(const Tensor& f, const Tensor& b) {
  const std::size_t hid = f.dim(1);
  Tensor out({f.dim(0), 2 * hid});
  for (std::size_t t = 0; t < f.dim(0); ++t) {
    std::copy(f.row(t).begin(), f.row(t).end(), out.row(t).begin());
    std::copy(b.row(t).begin(), b.row(t).end(),
              out.row(t).begin() + static_cast<std::ptrdiff_t>(hid));
  }
  return out;
}

}  // namespace

Tensor Bidirectional::forward(const Tensor& inputs) {
  return concat_columns(forward_rnn.forward(inputs, false), backward_rnn.forward(inputs, true));
}

Tensor Bidirectional::apply(const Tensor& inputs) const {
  return concat_columns(forward_rnn.apply(inputs, false), backward_rnn.apply(inputs, true));
}

Tensor Bidirectional::backward(const Tensor& d_out) {
  const std::size_t hid = hidden_dim();
  require_matrix(d_out, 2 * hid, "bidirectional backward");
  const std::size_t steps = d_out.dim(0);
  Tensor df({steps, hid}), db({steps, hid});
  for (std::size_t t = 0; t < steps; ++t) {
    auto row = d_out.row(t);
    std::copy(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(hid), df.row(t).begin());
    std::copy(row.begin() + static_cast<std::ptrdiff_t>(hid), row.end(), db.row(t).begin());
  }
  Tensor d_in = forward_rnn.backward(df);
  const Tensor d_in_b = backward_rnn.backward(db);
  axpy(1.0, d_in_b.data(), d_in.data());
  return d_in;
}

void Bidirectional::zero_grad() {
  forward_rnn.zero_grad();
  backward_rnn.zero_grad();
}

void Bidirectional::collect(ParamList& out, const std::string& prefix) {
  forward_rnn.collect(out, prefix + ".fwd");
  backward_rnn.collect(out, prefix + ".bwd");
}

}  // namespace seqtag
