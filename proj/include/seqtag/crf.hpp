// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "seqtag/layers.hpp"
#include "seqtag/tensor.hpp"

namespace seqtag {

/// Score used for transitions into START and out of STOP.
inline constexpr double kForbiddenTransition = -1e4;

/// Linear-chain CRF transition scores over K tags plus START (index K) and
/// STOP (index K+1). transitions.value(i, j) scores moving from i to j.
struct CrfParams {
  std::size_t num_tags = 0;
  Parameter transitions;

  CrfParams() = default;
  /// Zero transitions, with the forbidden entries already set.
  explicit CrfParams(std::size_t num_tags);

  std::size_t start() const { return num_tags; }
  std::size_t stop() const { return num_tags + 1; }
  double trans(std::size_t from, std::size_t to) const { return transitions.value(from, to); }

  /// True for entries that stay at kForbiddenTransition: into START, out of STOP.
  bool is_forbidden(std::size_t from, std::size_t to) const;

  /// Uniform [-0.1, 0.1] on the learnable entries.
  void initialize(Rng& rng);
  void zero_grad() { transitions.grad.fill(0.0); }
  void collect(ParamList& out, const std::string& prefix);
};

using TagPath = std::vector<std::size_t>;

/// Score of one tag path:
///   trans(START, y0) + em(0, y0) + sum_t [trans(y_{t-1}, y_t) + em(t, y_t)] + trans(y_last, STOP)
/// accumulated in exactly that order.
double path_score(const Tensor& emissions, std::span<const std::size_t> tags, const CrfParams& p);

/// log of the sum over all tag paths of exp(path_score), forward algorithm in log space.
double log_partition(const Tensor& emissions, const CrfParams& p);

/// log_partition - path_score(gold).
double nll_loss(const Tensor& emissions, std::span<const std::size_t> gold, const CrfParams& p);

struct CrfGradients {
  double loss = 0.0;
  Tensor d_emissions;    // T x K
  Tensor d_transitions;  // (K+2) x (K+2), zero on forbidden entries
};

/// Exact NLL gradients from forward-backward marginals.
CrfGradients crf_gradients(const Tensor& emissions, std::span<const std::size_t> gold,
                           const CrfParams& p);

struct ViterbiResult {
  TagPath tags;
  double score = 0.0;
};

/// Highest-scoring path. Ties resolve toward the lowest tag index.
ViterbiResult viterbi_decode(const Tensor& emissions, const CrfParams& p);

}  // namespace seqtag
