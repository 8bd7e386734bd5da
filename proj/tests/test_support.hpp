#pragma once

// Shared helpers for the test suite. The `oracle` namespace holds
// independent reimplementations of the quantities under test, written
// directly against raw vectors so a bug in the library cannot hide in the
// reference values.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dropdec/dropdec.hpp"

namespace testsup {

inline std::string fixture_path(const std::string& name) {
  return std::string(DROPDEC_FIXTURES_DIR) + "/" + name;
}

namespace oracle {

inline double entropy(const std::vector<double>& p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

inline double cross_entropy(const std::vector<double>& p,
                            const std::vector<double>& q) {
  double h = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) h -= p[i] * std::log(q[i]);
  }
  return h;
}

inline double kl(const std::vector<double>& p, const std::vector<double>& q) {
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) d += p[i] * std::log(p[i] / q[i]);
  }
  return d;
}

// Winner of the ensemble vote, recomputed by explicit enumeration: count
// votes per token, find the top count, then scan the tied tokens'
// candidates for the smallest (drop_count, candidate_index).
struct VoteAnswer {
  dropdec::TokenId token;
  bool tie_broken = false;
};

inline VoteAnswer brute_force_vote(
    const std::vector<dropdec::CandidateOutcome>& outcomes) {
  std::map<std::size_t, std::size_t> counts;
  for (const auto& o : outcomes) counts[o.token.index] += 1;
  std::size_t top = 0;
  for (const auto& [tok, n] : counts) top = std::max(top, n);
  std::vector<std::size_t> tied_tokens;
  for (const auto& [tok, n] : counts) {
    if (n == top) tied_tokens.push_back(tok);
  }
  std::size_t best_drop = static_cast<std::size_t>(-1);
  std::size_t best_k = static_cast<std::size_t>(-1);
  std::size_t best_token = 0;
  for (std::size_t tok : tied_tokens) {
    for (const auto& o : outcomes) {
      if (o.token.index != tok) continue;
      if (o.drop_count < best_drop ||
          (o.drop_count == best_drop && o.candidate_index < best_k)) {
        best_drop = o.drop_count;
        best_k = o.candidate_index;
        best_token = tok;
      }
    }
  }
  return VoteAnswer{dropdec::TokenId{best_token}, tied_tokens.size() > 1};
}

// Plain greedy decoding written against the backend interface directly,
// with its own lowest-index argmax; no decoder.hpp machinery involved.
template <typename B>
std::vector<dropdec::TokenId> reference_greedy(
    const B& backend, const std::vector<dropdec::TokenId>& prompt,
    std::size_t max_new_tokens,
    std::optional<dropdec::TokenId> eos = std::nullopt) {
  std::vector<dropdec::TokenId> generated;
  const dropdec::VisibilitySet full =
      dropdec::VisibilitySet::full(backend.n_visual());
  for (std::size_t step = 0; step < max_new_tokens; ++step) {
    const dropdec::ProbDist dist =
        backend.next_token_dist(full, prompt, generated);
    std::size_t best = 0;
    for (std::size_t i = 1; i < dist.size(); ++i) {
      if (dist[i] > dist[best]) best = i;
    }
    generated.push_back(dropdec::TokenId{best});
    if (eos && generated.back() == *eos) break;
  }
  return generated;
}

}  // namespace oracle

// Random positive distribution; larger sharpness makes it peakier.
inline dropdec::ProbDist random_dist(dropdec::RandomStream& rng,
                                     std::size_t size,
                                     double sharpness = 1.0) {
  std::vector<double> w(size);
  double sum = 0.0;
  for (double& x : w) {
    x = std::exp(sharpness * rng.next_gaussian());
    sum += x;
  }
  for (double& x : w) x /= sum;
  return dropdec::ProbDist(std::move(w));
}

inline dropdec::Vocabulary numbered_vocab(std::size_t size) {
  std::vector<std::string> tokens;
  tokens.reserve(size);
  for (std::size_t i = 0; i < size; ++i) {
    tokens.push_back("w" + std::to_string(i));
  }
  return dropdec::Vocabulary(std::move(tokens));
}

// Random scripted backend: random projections plus a handful of random
// rules so decodes actually branch on visibility and sequence tails.
inline dropdec::ScriptedModel random_scripted_model(
    dropdec::RandomStream& rng) {
  const std::size_t vocab_size = 3 + rng.next_u64() % 6;  // 3..8
  const std::size_t n_visual = 1 + rng.next_u64() % 6;    // 1..6
  dropdec::Vocabulary vocab = numbered_vocab(vocab_size);
  std::vector<dropdec::ProbDist> projections;
  for (std::size_t i = 0; i < n_visual; ++i) {
    projections.push_back(random_dist(rng, vocab_size, 1.5));
  }
  std::vector<dropdec::ScriptedRule> rules;
  const std::size_t n_rules = rng.next_u64() % 5;  // 0..4
  for (std::size_t r = 0; r < n_rules; ++r) {
    std::optional<std::vector<std::size_t>> visible;
    std::optional<std::vector<std::size_t>> masked;
    if (rng.next_bernoulli(0.5)) {
      std::vector<std::size_t> v;
      for (std::size_t i = 0; i < n_visual; ++i) {
        if (rng.next_bernoulli(0.3)) v.push_back(i);
      }
      visible = std::move(v);
    }
    if (rng.next_bernoulli(0.5)) {
      std::vector<std::size_t> m;
      for (std::size_t i = 0; i < n_visual; ++i) {
        if (rng.next_bernoulli(0.3)) m.push_back(i);
      }
      masked = std::move(m);
    }
    std::vector<dropdec::TokenId> prefix;
    const std::size_t prefix_len = rng.next_u64() % 3;  // 0..2
    for (std::size_t i = 0; i < prefix_len; ++i) {
      prefix.push_back(dropdec::TokenId{rng.next_u64() % vocab_size});
    }
    rules.push_back(dropdec::ScriptedRule{
        std::move(visible), std::move(masked), std::move(prefix),
        random_dist(rng, vocab_size, 2.0)});
  }
  return dropdec::ScriptedModel(std::move(vocab), std::move(projections),
                                std::move(rules),
                                random_dist(rng, vocab_size, 2.0));
}

}  // namespace testsup
