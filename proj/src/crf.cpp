// SPDX-License-Identifier: Apache-2.0
#include "seqtag/crf.hpp"

#include <cmath>

#include "seqtag/errors.hpp"

namespace seqtag {

CrfParams::CrfParams(std::size_t num_tags)
    : num_tags(num_tags), transitions({num_tags + 2, num_tags + 2}) {
  if (num_tags == 0) throw ArgumentError("CRF needs at least one tag");
  for (std::size_t i = 0; i < num_tags + 2; ++i) {
    for (std::size_t j = 0; j < num_tags + 2; ++j) {
      if (is_forbidden(i, j)) transitions.value(i, j) = kForbiddenTransition;
    }
  }
}

bool CrfParams::is_forbidden(std::size_t from, std::size_t to) const {
  return to == start() || from == stop();
}

void CrfParams::initialize(Rng& rng) {
  std::uniform_real_distribution<double> dist(-0.1, 0.1);
  for (std::size_t i = 0; i < num_tags + 2; ++i) {
    for (std::size_t j = 0; j < num_tags + 2; ++j) {
      transitions.value(i, j) = is_forbidden(i, j) ? kForbiddenTransition : dist(rng);
    }
  }
}

void CrfParams::collect(ParamList& out, const std::string& prefix) {
  out.push_back({prefix + ".transitions", &transitions, nullptr});
}

namespace {

void check_emissions(const Tensor& em, const CrfParams& p) {
  if (em.rank() != 2 || em.dim(1) != p.num_tags) {
    throw DimensionError("emission matrix " + shape_string(em.shape()) + " does not match " +
                         std::to_string(p.num_tags) + " tags");
  }
}

void check_tags(const Tensor& em, std::span<const std::size_t> tags, const CrfParams& p) {
  check_emissions(em, p);
  if (tags.size() != em.dim(0)) {
    throw DimensionError("tag sequence length " + std::to_string(tags.size()) +
                         " differs from emission length " + std::to_string(em.dim(0)));
  }
  for (std::size_t t = 0; t < tags.size(); ++t) {
    if (tags[t] >= p.num_tags) {
      throw IndexError("tag index " + std::to_string(tags[t]) + " at position " +
                       std::to_string(t) + " outside " + std::to_string(p.num_tags) + " tags");
    }
  }
}

// alpha(t, j): log-sum of scores of all prefixes ending in tag j at t.
Tensor forward_scores(const Tensor& em, const CrfParams& p) {
  const std::size_t steps = em.dim(0), k = p.num_tags;
  Tensor alpha({steps, k});
  std::vector<double> scratch(k);
  for (std::size_t j = 0; j < k; ++j) alpha(0, j) = p.trans(p.start(), j) + em(0, j);
  for (std::size_t t = 1; t < steps; ++t) {
    for (std::size_t j = 0; j < k; ++j) {
      for (std::size_t i = 0; i < k; ++i) scratch[i] = alpha(t - 1, i) + p.trans(i, j);
      alpha(t, j) = log_sum_exp(scratch) + em(t, j);
    }
  }
  return alpha;
}

// beta(t, i): log-sum of scores of all suffixes after tag i at t, STOP included.
Tensor backward_scores(const Tensor& em, const CrfParams& p) {
  const std::size_t steps = em.dim(0), k = p.num_tags;
  Tensor beta({steps, k});
  std::vector<double> scratch(k);
  for (std::size_t i = 0; i < k; ++i) beta(steps - 1, i) = p.trans(i, p.stop());
  for (std::size_t t = steps - 1; t-- > 0;) {
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        scratch[j] = p.trans(i, j) + em(t + 1, j) + beta(t + 1, j);
      }
      beta(t, i) = log_sum_exp(scratch);
    }
  }
  return beta;
}

double finish(const Tensor& alpha, const CrfParams& p) {
  const std::size_t last = alpha.dim(0) - 1;
  std::vector<double> scratch(p.num_tags);
  for (std::size_t j = 0; j < p.num_tags; ++j) scratch[j] = alpha(last, j) + p.trans(j, p.stop());
  return log_sum_exp(scratch);
}

}  // namespace

double path_score(const Tensor& em, std::span<const std::size_t> tags, const CrfParams& p) {
  check_tags(em, tags, p);
  double s = p.trans(p.start(), tags[0]);
  s += em(0, tags[0]);
  for (std::size_t t = 1; t < tags.size(); ++t) {
    s += p.trans(tags[t - 1], tags[t]);
    s += em(t, tags[t]);
  }
  s += p.trans(tags.back(), p.stop());
  return s;
}

double log_partition(const Tensor& em, const CrfParams& p) {
  check_emissions(em, p);
  return finish(forward_scores(em, p), p);
}

double nll_loss(const Tensor& em, std::span<const std::size_t> gold, const CrfParams& p) {
  const double gold_score = path_score(em, gold, p);
  return log_partition(em, p) - gold_score;
}

CrfGradients crf_gradients(const Tensor& em, std::span<const std::size_t> gold,
                           const CrfParams& p) {
  const double gold_score = path_score(em, gold, p);
  const std::size_t steps = em.dim(0), k = p.num_tags;
  const Tensor alpha = forward_scores(em, p);
  const Tensor beta = backward_scores(em, p);
  const double log_z = finish(alpha, p);

  CrfGradients g;
  g.loss = log_z - gold_score;
  g.d_emissions = Tensor({steps, k});
  g.d_transitions = Tensor({k + 2, k + 2});

  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t j = 0; j < k; ++j) {
      g.d_emissions(t, j) = std::exp(alpha(t, j) + beta(t, j) - log_z);
    }
  }
  for (std::size_t j = 0; j < k; ++j) {
    g.d_transitions(p.start(), j) = g.d_emissions(0, j);
    g.d_transitions(j, p.stop()) = g.d_emissions(steps - 1, j);
  }
  for (std::size_t t = 0; t + 1 < steps; ++t) {
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        g.d_transitions(i, j) +=
            std::exp(alpha(t, i) + p.trans(i, j) + em(t + 1, j) + beta(t + 1, j) - log_z);
      }
    }
  }

  // Subtract the gold path's feature counts.
  for (std::size_t t = 0; t < steps; ++t) g.d_emissions(t, gold[t]) -= 1.0;
  g.d_transitions(p.start(), gold[0]) -= 1.0;
  for (std::size_t t = 1; t < steps; ++t) g.d_transitions(gold[t - 1], gold[t]) -= 1.0;
  g.d_transitions(gold[steps - 1], p.stop()) -= 1.0;
  return g;
}

ViterbiResult viterbi_decode(const Tensor& em, const CrfParams& p) {
  check_emissions(em, p);
  const std::size_t steps = em.dim(0), k = p.num_tags;
  Tensor delta({steps, k});
  std::vector<std::size_t> backptr(steps * k, 0);
  for (std::size_t j = 0; j < k; ++j) delta(0, j) = p.trans(p.start(), j) + em(0, j);
  for (std::size_t t = 1; t < steps; ++t) {
    for (std::size_t j = 0; j < k; ++j) {
      std::size_t best = 0;
      double best_score = delta(t - 1, 0) + p.trans(0, j);
      for (std::size_t i = 1; i < k; ++i) {
        const double s = delta(t - 1, i) + p.trans(i, j);
        if (s > best_score) {
          best_score = s;
          best = i;
        }
      }
      delta(t, j) = best_score + em(t, j);
      backptr[t * k + j] = best;
    }
  }
  std::size_t last = 0;
  double best_score = delta(steps - 1, 0) + p.trans(0, p.stop());
  for (std::size_t j = 1; j < k; ++j) {
    const double s = delta(steps - 1, j) + p.trans(j, p.stop());
    if (s > best_score) {
      best_score = s;
      last = j;
    }
  }
  ViterbiResult result;
  result.score = best_score;
  result.tags.assign(steps, 0);
  result.tags[steps - 1] = last;
  for (std::size_t t = steps - 1; t > 0; --t) result.tags[t - 1] = backptr[t * k + result.tags[t]];
  return result;
}

}  // namespace seqtag
