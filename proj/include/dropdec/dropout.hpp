#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dropdec/errors.hpp"
#include "dropdec/model.hpp"
#include "dropdec/probability.hpp"
#include "dropdec/random.hpp"
#include "dropdec/uncertainty.hpp"

namespace dropdec {

// Per-candidate dropout parameters for the ensemble. Candidate k drops
// visual position i with probability
//
//   clamp(gamma_k * normalized_u_epi[i] + delta_k, 0, 1)
//
// in guided mode, or clamp(gamma_k, 0, 1) everywhere in uniform mode
// (the ablation baseline, where delta is ignored).
struct DropoutSchedule {
  struct Entry {
    double gamma = 0.0;
    double delta = 0.0;
  };

  std::vector<Entry> entries;
  bool uniform_mode = false;

  std::size_t size() const { return entries.size(); }

  void validate() const {
    if (entries.empty()) {
      throw ParameterError("dropout schedule must have at least one entry");
    }
    for (std::size_t k = 0; k < entries.size(); ++k) {
      if (!(entries[k].gamma >= 0.0)) {
        throw ParameterError("schedule entry " + std::to_string(k) +
                             ": gamma must be >= 0");
      }
      if (!(entries[k].delta >= 0.0)) {
        throw ParameterError("schedule entry " + std::to_string(k) +
                             ": delta must be >= 0");
      }
    }
  }

  // The stock three-candidate schedule: gammas 0.3 / 0.5 / 0.7, delta 0.1.
  static DropoutSchedule defaults() {
    return from_gammas({0.3, 0.5, 0.7}, 0.1);
  }

  static DropoutSchedule from_gammas(std::vector<double> gammas, double delta,
                                     bool uniform = false) {
    DropoutSchedule s;
    s.entries.reserve(gammas.size());
    for (double g : gammas) s.entries.push_back({g, delta});
    s.uniform_mode = uniform;
    s.validate();
    return s;
  }

  // K entries with gamma_k = 0.2 * k + 0.1 for k = 1..K, matching the
  // stock schedule at K = 3.
  static DropoutSchedule generated(std::size_t count, double delta = 0.1,
                                   bool uniform = false) {
    if (count == 0) {
      throw ParameterError("dropout schedule must have at least one entry");
    }
    std::vector<double> gammas;
    gammas.reserve(count);
    for (std::size_t k = 1; k <= count; ++k) {
      gammas.push_back(0.2 * static_cast<double>(k) + 0.1);
    }
    return from_gammas(std::move(gammas), delta, uniform);
  }
};

// Outcome of sampling one candidate's mask: keep[i] == 1 means visual
// position i stays visible.
struct DropoutMask {
  std::vector<std::uint8_t> keep;
  std::size_t drop_count = 0;
  std::size_t candidate_index = 0;

  VisibilitySet visibility() const { return VisibilitySet::from_kept(keep); }
};

// Visual positions whose projection ranks the preliminary token within its
// top k_top entries. These positions support the tentative prediction and
// are exempt from dropout for the step.
struct RelevantSet {
  std::vector<std::size_t> positions;  // ascending
  TokenId source_token;
  std::size_t k_top = 0;

  bool contains(std::size_t i) const {
    return std::binary_search(positions.begin(), positions.end(), i);
  }

  static RelevantSet none() { return RelevantSet{{}, TokenId{0}, 0}; }
};

inline RelevantSet relevant_set(const std::vector<ProbDist>& projections,
                                TokenId y_init, std::size_t k_top) {
  if (projections.empty()) {
    throw EmptyInputError("relevant_set: no projections given");
  }
  const std::size_t vocab_size = projections.front().size();
  if (y_init.index >= vocab_size) {
    throw ParameterError("relevant_set: token id " +
                         std::to_string(y_init.index) +
                         " out of range for vocabulary of size " +
                         std::to_string(vocab_size));
  }
  if (k_top == 0 || k_top > vocab_size) {
    throw ParameterError("relevant_set: k_top = " + std::to_string(k_top) +
                         " outside [1, " + std::to_string(vocab_size) + "]");
  }
  RelevantSet rel{{}, y_init, k_top};
  for (std::size_t i = 0; i < projections.size(); ++i) {
    const std::vector<TokenId> top = top_k_indices(projections[i], k_top);
    if (std::find(top.begin(), top.end(), y_init) != top.end()) {
      rel.positions.push_back(i);
    }
  }
  return rel;
}

// Per-position drop probabilities for one candidate. Guided mode rescales
// u_epi to [0, 1] over the positions; when all positions have the same
// u_epi (range below 1e-12) the guidance term is meaningless and the
// result collapses to the floor delta everywhere.
inline std::vector<double> dropout_probabilities(
    const UncertaintyReport& report, double gamma, double delta,
    bool uniform_mode = false) {
  if (!(gamma >= 0.0)) {
    throw ParameterError("dropout_probabilities: gamma must be >= 0");
  }
  if (!(delta >= 0.0)) {
    throw ParameterError("dropout_probabilities: delta must be >= 0");
  }
  std::vector<double> probs(report.n_visual);
  if (uniform_mode) {
    const double p = std::clamp(gamma, 0.0, 1.0);
    std::fill(probs.begin(), probs.end(), p);
    return probs;
  }
  const double range = report.u_epi_max - report.u_epi_min;
  if (range <= 1e-12) {
    const double p = std::clamp(delta, 0.0, 1.0);
    std::fill(probs.begin(), probs.end(), p);
    return probs;
  }
  for (std::size_t i = 0; i < report.n_visual; ++i) {
    const double scaled =
        gamma * (report.u_epi[i] - report.u_epi_min) / range + delta;
    probs[i] = std::clamp(scaled, 0.0, 1.0);
  }
  return probs;
}

// Draws one mask. Every position consumes exactly one uniform from the
// stream, retained or not, so the draw count depends only on the position
// count; the relevant-set override is applied after the draw.
inline DropoutMask sample_mask(const std::vector<double>& probs,
                               const RelevantSet& retained, RandomStream& rng,
                               std::size_t candidate_index = 0) {
  DropoutMask mask;
  mask.candidate_index = candidate_index;
  mask.keep.resize(probs.size(), 1);
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const bool drop = rng.next_bernoulli(probs[i]) && !retained.contains(i);
    mask.keep[i] = drop ? 0 : 1;
    if (drop) ++mask.drop_count;
  }
  return mask;
}

}  // namespace dropdec
