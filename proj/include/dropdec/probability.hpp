#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dropdec/errors.hpp"

namespace dropdec {

// Index into a Vocabulary. Strong type so a token id cannot be confused
// with a visual position or a raw count.
struct TokenId {
  std::size_t index = 0;

  friend constexpr auto operator<=>(TokenId, TokenId) = default;
};

// Immutable list of distinct token strings; position is the token id.
class Vocabulary {
 public:
  explicit Vocabulary(std::vector<std::string> tokens)
      : tokens_(std::move(tokens)) {
    if (tokens_.empty()) {
      throw ValidationError("vocabulary must contain at least one token");
    }
    index_.reserve(tokens_.size());
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      if (tokens_[i].empty()) {
        throw ValidationError("vocabulary token " + std::to_string(i) +
                              " is empty");
      }
      if (!index_.emplace(tokens_[i], i).second) {
        throw ValidationError("duplicate vocabulary token '" + tokens_[i] +
                              "'");
      }
    }
  }

  std::size_t size() const { return tokens_.size(); }

  const std::string& token(TokenId id) const {
    if (id.index >= tokens_.size()) {
      throw ParameterError("token id " + std::to_string(id.index) +
                           " out of range for vocabulary of size " +
                           std::to_string(tokens_.size()));
    }
    return tokens_[id.index];
  }

  std::optional<TokenId> find(std::string_view token) const {
    auto it = index_.find(std::string(token));
    if (it == index_.end()) return std::nullopt;
    return TokenId{it->second};
  }

  TokenId id_of(std::string_view token) const {
    auto id = find(token);
    if (!id) {
      throw ParameterError("unknown token '" + std::string(token) + "'");
    }
    return *id;
  }

  const std::vector<std::string>& tokens() const { return tokens_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Probability vector over a vocabulary. Construction validates the input
// (finite, non-negative, sums to 1 within kSumTolerance), then clamps every
// entry to at least kProbFloor and renormalizes, so downstream logs are
// always finite. The clamp is reapplied after renormalization because
// dividing by a sum slightly above 1 can push a floored entry back under
// the floor; the residual error in the total is far below kSumTolerance.
class ProbDist {
 public:
  static constexpr double kProbFloor = 1e-12;
  static constexpr double kSumTolerance = 1e-6;

  explicit ProbDist(std::vector<double> probs) : probs_(std::move(probs)) {
    if (probs_.empty()) {
      throw ValidationError("probability vector is empty");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < probs_.size(); ++i) {
      if (!(probs_[i] >= 0.0) || !std::isfinite(probs_[i])) {
        throw ValidationError("probability entry " + std::to_string(i) +
                              " is negative or not finite");
      }
      sum += probs_[i];
    }
    if (std::abs(sum - 1.0) > kSumTolerance) {
      throw ValidationError("probabilities sum to " + std::to_string(sum) +
                            ", expected 1 within " +
                            std::to_string(kSumTolerance));
    }
    double clamped_sum = 0.0;
    for (double& p : probs_) {
      p = std::max(p, kProbFloor);
      clamped_sum += p;
    }
    for (double& p : probs_) {
      p = std::max(p / clamped_sum, kProbFloor);
    }
  }

  std::size_t size() const { return probs_.size(); }

  double operator[](std::size_t i) const { return probs_[i]; }

  const std::vector<double>& values() const { return probs_; }

  // Highest-probability token; ties go to the lower token id.
  TokenId argmax() const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < probs_.size(); ++i) {
      if (probs_[i] > probs_[best]) best = i;
    }
    return TokenId{best};
  }

 private:
  std::vector<double> probs_;
};

namespace detail {

inline void require_same_size(const ProbDist& p, const ProbDist& q,
                              const char* op) {
  if (p.size() != q.size()) {
    throw DimensionError(std::string(op) + ": size mismatch (" +
                         std::to_string(p.size()) + " vs " +
                         std::to_string(q.size()) + ")");
  }
}

}  // namespace detail

// Shannon entropy in nats.
inline double entropy(const ProbDist& p) {
  double h = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    h -= p[i] * std::log(p[i]);
  }
  return h;
}

// Cross-entropy H(p, q) in nats.
inline double cross_entropy(const ProbDist& p, const ProbDist& q) {
  detail::require_same_size(p, q, "cross_entropy");
  double h = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    h -= p[i] * std::log(q[i]);
  }
  return h;
}

// KL divergence KL(p || q) in nats. Finite for any two ProbDists because
// every entry is clamped away from zero.
inline double kl_divergence(const ProbDist& p, const ProbDist& q) {
  detail::require_same_size(p, q, "kl_divergence");
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    d += p[i] * std::log(p[i] / q[i]);
  }
  return d;
}

// Elementwise mean of a non-empty set of equal-size distributions.
inline ProbDist average(const std::vector<ProbDist>& dists) {
  if (dists.empty()) {
    throw EmptyInputError("average: no distributions given");
  }
  const std::size_t n = dists.front().size();
  std::vector<double> mean(n, 0.0);
  for (const ProbDist& d : dists) {
    detail::require_same_size(dists.front(), d, "average");
    for (std::size_t i = 0; i < n; ++i) mean[i] += d[i];
  }
  for (double& m : mean) m /= static_cast<double>(dists.size());
  return ProbDist(std::move(mean));
}

// Ids of the k most probable tokens, in descending probability order.
// Equal probabilities rank the lower token id first, which pins the result
// (and everything built on it) to a single deterministic answer.
inline std::vector<TokenId> top_k_indices(const ProbDist& p, std::size_t k) {
  if (k == 0 || k > p.size()) {
    throw ParameterError("top_k_indices: k = " + std::to_string(k) +
                         " outside [1, " + std::to_string(p.size()) + "]");
  }
  std::vector<std::size_t> order(p.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (p[a] != p[b]) return p[a] > p[b];
    return a < b;
  });
  std::vector<TokenId> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back(TokenId{order[i]});
  return out;
}

}  // namespace dropdec
