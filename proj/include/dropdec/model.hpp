#pragma once

#include <concepts>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dropdec/errors.hpp"
#include "dropdec/probability.hpp"

namespace dropdec {

// Which visual positions a candidate forward pass may attend to.
// Position i is visible (kept) or masked (dropped); nothing in between.
class VisibilitySet {
 public:
  explicit VisibilitySet(std::size_t n_visual, bool all_visible = true)
      : visible_(n_visual, all_visible ? 1 : 0) {}

  static VisibilitySet full(std::size_t n_visual) {
    return VisibilitySet(n_visual, true);
  }

  // keep[i] != 0 means position i stays visible.
  static VisibilitySet from_kept(const std::vector<std::uint8_t>& keep) {
    VisibilitySet v(keep.size(), true);
    for (std::size_t i = 0; i < keep.size(); ++i) {
      v.visible_[i] = keep[i] ? 1 : 0;
    }
    return v;
  }

  std::size_t n_visual() const { return visible_.size(); }

  bool contains(std::size_t i) const {
    if (i >= visible_.size()) {
      throw ParameterError("visual position " + std::to_string(i) +
                           " out of range for " +
                           std::to_string(visible_.size()) + " positions");
    }
    return visible_[i] != 0;
  }

  void set(std::size_t i, bool visible) {
    if (i >= visible_.size()) {
      throw ParameterError("visual position " + std::to_string(i) +
                           " out of range for " +
                           std::to_string(visible_.size()) + " positions");
    }
    visible_[i] = visible ? 1 : 0;
  }

  std::size_t visible_count() const {
    return static_cast<std::size_t>(
        std::accumulate(visible_.begin(), visible_.end(), std::size_t{0}));
  }

  std::size_t dropped_count() const { return n_visual() - visible_count(); }

  std::vector<std::size_t> visible_indices() const {
    std::vector<std::size_t> out;
    out.reserve(visible_.size());
    for (std::size_t i = 0; i < visible_.size(); ++i) {
      if (visible_[i]) out.push_back(i);
    }
    return out;
  }

  bool all_visible() const { return visible_count() == n_visual(); }

  friend bool operator==(const VisibilitySet&, const VisibilitySet&) = default;

 private:
  std::vector<std::uint8_t> visible_;
};

// Contract every decoding backend satisfies. Backends are immutable after
// construction and their queries are pure functions of the arguments, so
// candidate forwards can run in any order, or concurrently, with identical
// results.
//
//   vocabulary()      token list shared by projections and outputs
//   n_visual()        number of visual input positions
//   project_visual()  per-position next-token views of the visual input;
//                     position i may only depend on positions 0..i
//   next_token_dist() next-token distribution given the visible subset of
//                     the visual input, the prompt, and tokens generated
//                     so far
template <typename B>
concept ModelBackend =
    requires(const B& backend, const VisibilitySet& visible,
             const std::vector<TokenId>& tokens) {
      { backend.vocabulary() } -> std::convertible_to<const Vocabulary&>;
      { backend.n_visual() } -> std::convertible_to<std::size_t>;
      {
        backend.project_visual()
      } -> std::convertible_to<std::vector<ProbDist>>;
      {
        backend.next_token_dist(visible, tokens, tokens)
      } -> std::convertible_to<ProbDist>;
    };

// One lookup rule of a ScriptedModel. A rule fires when every listed
// required_visible position is visible, every listed required_masked
// position is masked, and the concatenated prompt + generated sequence
// ends with `prefix`. Absent (nullopt) visibility constraints match any
// mask; an empty prefix matches any sequence.
struct ScriptedRule {
  std::optional<std::vector<std::size_t>> required_visible;
  std::optional<std::vector<std::size_t>> required_masked;
  std::vector<TokenId> prefix;
  ProbDist dist;
};

// Table-driven backend: canned per-position projections plus a rule list
// mapping (visibility, sequence tail) to next-token distributions. The
// first matching rule wins; default_dist answers when nothing matches.
// This is the workhorse for tests: every interesting decode scenario can
// be written down as data.
class ScriptedModel {
 public:
  ScriptedModel(Vocabulary vocab, std::vector<ProbDist> projections,
                std::vector<ScriptedRule> rules, ProbDist default_dist)
      : vocab_(std::move(vocab)),
        projections_(std::move(projections)),
        rules_(std::move(rules)),
        default_dist_(std::move(default_dist)) {
    for (std::size_t i = 0; i < projections_.size(); ++i) {
      if (projections_[i].size() != vocab_.size()) {
        throw DimensionError("projection " + std::to_string(i) + " has " +
                             std::to_string(projections_[i].size()) +
                             " entries, vocabulary has " +
                             std::to_string(vocab_.size()));
      }
    }
    if (default_dist_.size() != vocab_.size()) {
      throw DimensionError("default distribution size does not match "
                           "vocabulary");
    }
    for (std::size_t r = 0; r < rules_.size(); ++r) {
      const ScriptedRule& rule = rules_[r];
      if (rule.dist.size() != vocab_.size()) {
        throw DimensionError("rule " + std::to_string(r) +
                             " distribution size does not match vocabulary");
      }
      for (TokenId t : rule.prefix) {
        if (t.index >= vocab_.size()) {
          throw ParameterError("rule " + std::to_string(r) +
                               " prefix token id " + std::to_string(t.index) +
                               " out of range");
        }
      }
      check_positions(rule.required_visible, r, "required_visible");
      check_positions(rule.required_masked, r, "required_masked");
    }
  }

  const Vocabulary& vocabulary() const { return vocab_; }

  std::size_t n_visual() const { return projections_.size(); }

  std::vector<ProbDist> project_visual() const {
    if (projections_.empty()) {
      throw EmptyInputError("model has no visual positions to project");
    }
    return projections_;
  }

  ProbDist next_token_dist(const VisibilitySet& visible,
                           const std::vector<TokenId>& prompt,
                           const std::vector<TokenId>& generated) const {
    if (visible.n_visual() != n_visual()) {
      throw DimensionError("visibility covers " +
                           std::to_string(visible.n_visual()) +
                           " positions, model has " +
                           std::to_string(n_visual()));
    }
    check_tokens(prompt);
    check_tokens(generated);
    for (const ScriptedRule& rule : rules_) {
      if (matches(rule, visible, prompt, generated)) return rule.dist;
    }
    return default_dist_;
  }

  const std::vector<ScriptedRule>& rules() const { return rules_; }

 private:
  void check_positions(const std::optional<std::vector<std::size_t>>& pos,
                       std::size_t rule_index, const char* field) const {
    if (!pos) return;
    for (std::size_t i : *pos) {
      if (i >= n_visual()) {
        throw ParameterError("rule " + std::to_string(rule_index) + " " +
                             field + " position " + std::to_string(i) +
                             " out of range for " +
                             std::to_string(n_visual()) +
                             " visual positions");
      }
    }
  }

  void check_tokens(const std::vector<TokenId>& tokens) const {
    for (TokenId t : tokens) {
      if (t.index >= vocab_.size()) {
        throw ParameterError("token id " + std::to_string(t.index) +
                             " out of range for vocabulary of size " +
                             std::to_string(vocab_.size()));
      }
    }
  }

  bool matches(const ScriptedRule& rule, const VisibilitySet& visible,
               const std::vector<TokenId>& prompt,
               const std::vector<TokenId>& generated) const {
    if (rule.required_visible) {
      for (std::size_t i : *rule.required_visible) {
        if (!visible.contains(i)) return false;
      }
    }
    if (rule.required_masked) {
      for (std::size_t i : *rule.required_masked) {
        if (visible.contains(i)) return false;
      }
    }
    const std::size_t total = prompt.size() + generated.size();
    if (rule.prefix.size() > total) return false;
    // Compare against the tail of prompt ++ generated without building it.
    for (std::size_t back = 0; back < rule.prefix.size(); ++back) {
      const TokenId want = rule.prefix[rule.prefix.size() - 1 - back];
      const TokenId have =
          back < generated.size()
              ? generated[generated.size() - 1 - back]
              : prompt[prompt.size() - 1 - (back - generated.size())];
      if (have != want) return false;
    }
    return true;
  }

  Vocabulary vocab_;
  std::vector<ProbDist> projections_;
  std::vector<ScriptedRule> rules_;
  ProbDist default_dist_;
};

static_assert(ModelBackend<ScriptedModel>);

}  // namespace dropdec
