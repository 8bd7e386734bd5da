#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "dropdec/errors.hpp"
#include "dropdec/model.hpp"
#include "dropdec/probability.hpp"
#include "dropdec/random.hpp"

namespace dropdec {

// Self-contained toy vision-language model: one pre-LN transformer block,
// 32-dim embeddings, 2 heads, 64-token vocabulary, double precision, all
// weights derived deterministically from a single seed. Exists so the
// decoding pipeline can be exercised end to end against a backend whose
// next-token distributions are not scripted, with no framework or weight
// files involved.
//
// Sequence layout: slot 0 is a BOS anchor, slots 1..N hold the visual
// positions, then prompt tokens, then generated tokens. Masked visual
// positions are excluded from attention entirely (never keys, never the
// query), which makes masking equivalent to deleting those slots. The BOS
// anchor guarantees at least one attendable slot even when every visual
// position is dropped and no text exists yet.
//
// Per-position visual embeddings are derived from (seed, position), not
// from n_visual, so two models that differ only in n_visual agree on their
// shared prefix of positions.
class TinyTransformer {
 public:
  static constexpr std::size_t kModelDim = 32;
  static constexpr std::size_t kHeads = 2;
  static constexpr std::size_t kHeadDim = kModelDim / kHeads;
  static constexpr std::size_t kMlpDim = 4 * kModelDim;
  static constexpr std::size_t kVocabSize = 64;

  explicit TinyTransformer(std::uint64_t seed, std::size_t n_visual = 16)
      : seed_(seed),
        n_visual_(n_visual),
        vocab_(make_vocab()),
        wq_(gaussian_matrix(seed, kTagWq, kModelDim, kModelDim)),
        wk_(gaussian_matrix(seed, kTagWk, kModelDim, kModelDim)),
        wv_(gaussian_matrix(seed, kTagWv, kModelDim, kModelDim)),
        wo_(gaussian_matrix(seed, kTagWo, kModelDim, kModelDim)),
        w_mlp_in_(gaussian_matrix(seed, kTagMlpIn, kMlpDim, kModelDim)),
        w_mlp_out_(gaussian_matrix(seed, kTagMlpOut, kModelDim, kMlpDim)),
        w_unembed_(gaussian_matrix(seed, kTagUnembed, kVocabSize, kModelDim)),
        bos_embedding_(gaussian_vector(RandomStream::derive(seed, kTagBos))) {
    visual_embeddings_.reserve(n_visual_);
    for (std::size_t i = 0; i < n_visual_; ++i) {
      visual_embeddings_.push_back(
          gaussian_vector(RandomStream::derive(seed, kTagVisual, i)));
    }
    token_embeddings_.reserve(kVocabSize);
    for (std::size_t v = 0; v < kVocabSize; ++v) {
      token_embeddings_.push_back(
          gaussian_vector(RandomStream::derive(seed, kTagToken, v)));
    }
  }

  const Vocabulary& vocabulary() const { return vocab_; }

  std::size_t n_visual() const { return n_visual_; }

  std::uint64_t seed() const { return seed_; }

  const std::vector<std::vector<double>>& visual_embeddings() const {
    return visual_embeddings_;
  }

  // Same weights, different visual content. Used by tests to verify that a
  // masked position has no influence on the output.
  TinyTransformer with_visual_embeddings(
      std::vector<std::vector<double>> rows) const {
    if (rows.size() != n_visual_) {
      throw DimensionError("expected " + std::to_string(n_visual_) +
                           " visual embedding rows, got " +
                           std::to_string(rows.size()));
    }
    for (const auto& row : rows) {
      if (row.size() != kModelDim) {
        throw DimensionError("visual embedding rows must have " +
                             std::to_string(kModelDim) + " entries");
      }
    }
    TinyTransformer copy(*this);
    copy.visual_embeddings_ = std::move(rows);
    return copy;
  }

  // Next-token view of each visual position. Position i attends to BOS and
  // visual slots 0..i only, so the result is causal in the positions.
  std::vector<ProbDist> project_visual() const {
    if (n_visual_ == 0) {
      throw EmptyInputError("model has no visual positions to project");
    }
    std::vector<ProbDist> out;
    out.reserve(n_visual_);
    for (std::size_t i = 0; i < n_visual_; ++i) {
      std::vector<std::size_t> keys;
      keys.reserve(i + 2);
      keys.push_back(0);
      for (std::size_t j = 0; j <= i; ++j) keys.push_back(1 + j);
      out.push_back(forward(keys, keys.back(), {}, {}));
    }
    return out;
  }

  ProbDist next_token_dist(const VisibilitySet& visible,
                           const std::vector<TokenId>& prompt,
                           const std::vector<TokenId>& generated) const {
    if (visible.n_visual() != n_visual_) {
      throw DimensionError("visibility covers " +
                           std::to_string(visible.n_visual()) +
                           " positions, model has " +
                           std::to_string(n_visual_));
    }
    check_tokens(prompt);
    check_tokens(generated);
    std::vector<std::size_t> keys;
    keys.reserve(1 + n_visual_ + prompt.size() + generated.size());
    keys.push_back(0);
    for (std::size_t i = 0; i < n_visual_; ++i) {
      if (visible.contains(i)) keys.push_back(1 + i);
    }
    const std::size_t text_base = 1 + n_visual_;
    for (std::size_t t = 0; t < prompt.size() + generated.size(); ++t) {
      keys.push_back(text_base + t);
    }
    return forward(keys, keys.back(), prompt, generated);
  }

 private:
  enum : std::uint64_t {
    kTagBos = 1,
    kTagVisual = 2,
    kTagToken = 3,
    kTagWq = 4,
    kTagWk = 5,
    kTagWv = 6,
    kTagWo = 7,
    kTagMlpIn = 8,
    kTagMlpOut = 9,
    kTagUnembed = 10,
  };

  struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    std::vector<double> apply(const std::vector<double>& x) const {
      std::vector<double> out(rows, 0.0);
      for (std::size_t r = 0; r < rows; ++r) {
        double acc = 0.0;
        const double* w = data.data() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) acc += w[c] * x[c];
        out[r] = acc;
      }
      return out;
    }
  };

  static Vocabulary make_vocab() {
    std::vector<std::string> tokens;
    tokens.reserve(kVocabSize);
    for (std::size_t i = 0; i < kVocabSize; ++i) {
      char buf[8];
      std::snprintf(buf, sizeof(buf), "t%02zu", i);
      tokens.emplace_back(buf);
    }
    return Vocabulary(std::move(tokens));
  }

  static Matrix gaussian_matrix(std::uint64_t seed, std::uint64_t tag,
                                std::size_t rows, std::size_t cols) {
    RandomStream rng(RandomStream::derive(seed, tag));
    Matrix m{rows, cols, std::vector<double>(rows * cols)};
    const double scale = 1.0 / std::sqrt(static_cast<double>(cols));
    for (double& w : m.data) w = rng.next_gaussian() * scale;
    return m;
  }

  static std::vector<double> gaussian_vector(std::uint64_t seed) {
    RandomStream rng(seed);
    std::vector<double> v(kModelDim);
    for (double& x : v) x = rng.next_gaussian();
    return v;
  }

  static std::vector<double> layernorm(const std::vector<double>& x) {
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= static_cast<double>(x.size());
    const double inv = 1.0 / std::sqrt(var + 1e-5);
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean) * inv;
    return out;
  }

  static double gelu(double x) {
    return 0.5 * x *
           (1.0 + std::tanh(0.7978845608028654 *
                            (x + 0.044715 * x * x * x)));
  }

  void check_tokens(const std::vector<TokenId>& tokens) const {
    for (TokenId t : tokens) {
      if (t.index >= kVocabSize) {
        throw ParameterError("token id " + std::to_string(t.index) +
                             " out of range for vocabulary of size " +
                             std::to_string(kVocabSize));
      }
    }
  }

  // Content embedding + sinusoidal position term for one slot.
  std::vector<double> slot_embedding(std::size_t slot,
                                     const std::vector<TokenId>& prompt,
                                     const std::vector<TokenId>& generated)
      const {
    std::vector<double> x;
    if (slot == 0) {
      x = bos_embedding_;
    } else if (slot <= n_visual_) {
      x = visual_embeddings_[slot - 1];
    } else {
      const std::size_t t = slot - 1 - n_visual_;
      const TokenId id =
          t < prompt.size() ? prompt[t] : generated[t - prompt.size()];
      x = token_embeddings_[id.index];
    }
    for (std::size_t j = 0; j < kModelDim / 2; ++j) {
      const double freq =
          std::pow(10000.0, -2.0 * static_cast<double>(j) /
                                static_cast<double>(kModelDim));
      const double angle = static_cast<double>(slot) * freq;
      x[2 * j] += std::sin(angle);
      x[2 * j + 1] += std::cos(angle);
    }
    return x;
  }

  // One attention + MLP block for a single query slot over an explicit,
  // ascending key-slot list (which includes the query slot itself), then
  // the unembedding softmax.
  ProbDist forward(const std::vector<std::size_t>& key_slots,
                   std::size_t query_slot,
                   const std::vector<TokenId>& prompt,
                   const std::vector<TokenId>& generated) const {
    std::vector<std::vector<double>> normed;
    normed.reserve(key_slots.size());
    std::size_t query_pos = 0;
    for (std::size_t s = 0; s < key_slots.size(); ++s) {
      normed.push_back(
          layernorm(slot_embedding(key_slots[s], prompt, generated)));
      if (key_slots[s] == query_slot) query_pos = s;
    }
    const std::vector<double> x_query =
        slot_embedding(query_slot, prompt, generated);

    const std::vector<double> q = wq_.apply(normed[query_pos]);
    std::vector<std::vector<double>> k(key_slots.size());
    std::vector<std::vector<double>> v(key_slots.size());
    for (std::size_t s = 0; s < key_slots.size(); ++s) {
      k[s] = wk_.apply(normed[s]);
      v[s] = wv_.apply(normed[s]);
    }

    std::vector<double> context(kModelDim, 0.0);
    const double inv_sqrt_hd = 1.0 / std::sqrt(static_cast<double>(kHeadDim));
    for (std::size_t h = 0; h < kHeads; ++h) {
      const std::size_t off = h * kHeadDim;
      std::vector<double> scores(key_slots.size());
      double max_score = -1e300;
      for (std::size_t s = 0; s < key_slots.size(); ++s) {
        double dot = 0.0;
        for (std::size_t d = 0; d < kHeadDim; ++d) {
          dot += q[off + d] * k[s][off + d];
        }
        scores[s] = dot * inv_sqrt_hd;
        if (scores[s] > max_score) max_score = scores[s];
      }
      double denom = 0.0;
      for (double& sc : scores) {
        sc = std::exp(sc - max_score);
        denom += sc;
      }
      for (std::size_t s = 0; s < key_slots.size(); ++s) {
        const double alpha = scores[s] / denom;
        for (std::size_t d = 0; d < kHeadDim; ++d) {
          context[off + d] += alpha * v[s][off + d];
        }
      }
    }

    const std::vector<double> attn = wo_.apply(context);
    std::vector<double> u(kModelDim);
    for (std::size_t d = 0; d < kModelDim; ++d) u[d] = x_query[d] + attn[d];

    std::vector<double> hidden = w_mlp_in_.apply(layernorm(u));
    for (double& hval : hidden) hval = gelu(hval);
    const std::vector<double> mlp = w_mlp_out_.apply(hidden);
    std::vector<double> residual(kModelDim);
    for (std::size_t d = 0; d < kModelDim; ++d) residual[d] = u[d] + mlp[d];

    const std::vector<double> logits = w_unembed_.apply(layernorm(residual));
    double max_logit = logits[0];
    for (double l : logits) max_logit = std::max(max_logit, l);
    std::vector<double> probs(kVocabSize);
    double denom = 0.0;
    for (std::size_t i = 0; i < kVocabSize; ++i) {
      probs[i] = std::exp(logits[i] - max_logit);
      denom += probs[i];
    }
    for (double& p : probs) p /= denom;
    return ProbDist(std::move(probs));
  }

  std::uint64_t seed_;
  std::size_t n_visual_;
  Vocabulary vocab_;
  Matrix wq_, wk_, wv_, wo_, w_mlp_in_, w_mlp_out_, w_unembed_;
  std::vector<double> bos_embedding_;
  std::vector<std::vector<double>> visual_embeddings_;
  std::vector<std::vector<double>> token_embeddings_;
};

static_assert(ModelBackend<TinyTransformer>);

}  // namespace dropdec
