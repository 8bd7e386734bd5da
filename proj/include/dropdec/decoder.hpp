#pragma once

#include <cstddef>
#include <cstdint>
#include <future>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dropdec/dropout.hpp"
#include "dropdec/errors.hpp"
#include "dropdec/model.hpp"
#include "dropdec/probability.hpp"
#include "dropdec/random.hpp"
#include "dropdec/uncertainty.hpp"

namespace dropdec {

// Everything that parameterizes one decode run. The ensemble size is the
// schedule length; keeping a single source of truth means there is no
// "K disagrees with the schedule" failure mode.
struct DecodeConfig {
  DropoutSchedule schedule = DropoutSchedule::defaults();
  std::size_t k_top = 5;
  std::size_t max_new_tokens = 512;
  std::uint64_t seed = 0;
  bool preliminary_pass = true;
  std::optional<TokenId> eos_token;
  // Run the K candidate forwards concurrently. Purely a throughput knob:
  // masks come from per-(step, candidate) substreams, so results are
  // byte-identical either way.
  bool parallel_candidates = false;

  void validate() const {
    schedule.validate();
    if (k_top == 0) {
      throw ParameterError("k_top must be >= 1");
    }
    if (max_new_tokens == 0) {
      throw ParameterError("max_new_tokens must be >= 1");
    }
  }
};

// A decode task: which backend to drive and the prompt to continue.
template <ModelBackend B>
struct DecodeRequest {
  const B* backend = nullptr;
  std::vector<TokenId> prompt;
};

// What one ensemble member proposed at one step.
struct CandidateOutcome {
  std::size_t candidate_index = 0;
  TokenId token;
  std::size_t drop_count = 0;
};

struct VoteResult {
  TokenId token;
  bool tie_broken = false;
};

// Records one decoding step: the tentative prediction, the positions it
// protected, each candidate's mask and proposal, and the vote outcome.
struct StepTrace {
  std::size_t step = 0;  // 1-based
  std::optional<TokenId> y_init;
  std::vector<std::size_t> relevant_set;
  std::vector<std::vector<std::uint8_t>> masks;  // keep flags, one row per k
  std::vector<CandidateOutcome> candidates;
  TokenId chosen;
  bool tie_broken = false;
};

struct GenerationTrace {
  std::vector<StepTrace> steps;
  std::vector<TokenId> final_tokens;
};

struct DecodeResult {
  std::vector<TokenId> tokens;
  GenerationTrace trace;
};

// Full-visibility greedy prediction for the current position; this is the
// tentative token whose supporting visual positions get retained.
template <ModelBackend B>
TokenId preliminary_token(const B& backend, const std::vector<TokenId>& prompt,
                          const std::vector<TokenId>& generated) {
  const ProbDist dist = backend.next_token_dist(
      VisibilitySet::full(backend.n_visual()), prompt, generated);
  return dist.argmax();
}

// Runs the masked forwards for one step, one per mask, each proposing its
// greedy next token. `parallel` fans the forwards out over std::async;
// outputs are positionally identical to the serial path because each
// candidate is a pure function of (backend, prompt, generated, mask).
template <ModelBackend B>
std::vector<CandidateOutcome> candidate_step(
    const B& backend, const std::vector<TokenId>& prompt,
    const std::vector<TokenId>& generated,
    const std::vector<DropoutMask>& masks, bool parallel = false) {
  if (masks.empty()) {
    throw EmptyInputError("candidate_step: no masks given");
  }
  auto run_one = [&](const DropoutMask& mask) -> CandidateOutcome {
    const ProbDist dist =
        backend.next_token_dist(mask.visibility(), prompt, generated);
    return CandidateOutcome{mask.candidate_index, dist.argmax(),
                            mask.drop_count};
  };
  std::vector<CandidateOutcome> outcomes;
  outcomes.reserve(masks.size());
  if (parallel) {
    std::vector<std::future<CandidateOutcome>> futures;
    futures.reserve(masks.size());
    for (const DropoutMask& mask : masks) {
      futures.push_back(std::async(std::launch::async, run_one,
                                   std::cref(mask)));
    }
    for (auto& f : futures) outcomes.push_back(f.get());
  } else {
    for (const DropoutMask& mask : masks) outcomes.push_back(run_one(mask));
  }
  return outcomes;
}

// Majority vote over the candidates' proposals. Among the tokens sharing
// the highest count, the winner is the one proposed by the candidate with
// the fewest dropped positions (it saw the most evidence), then by the
// lowest candidate index. tie_broken reports whether more than one
// distinct token shared the top count, i.e. whether that rule actually
// had to decide anything.
inline VoteResult majority_vote(const std::vector<CandidateOutcome>& outcomes) {
  if (outcomes.empty()) {
    throw EmptyInputError("majority_vote: no candidate outcomes");
  }
  std::map<std::size_t, std::size_t> counts;
  for (const CandidateOutcome& o : outcomes) ++counts[o.token.index];
  std::size_t max_count = 0;
  for (const auto& [token, count] : counts) {
    max_count = std::max(max_count, count);
  }
  std::size_t tokens_at_max = 0;
  for (const auto& [token, count] : counts) {
    if (count == max_count) ++tokens_at_max;
  }
  const CandidateOutcome* best = nullptr;
  for (const CandidateOutcome& o : outcomes) {
    if (counts[o.token.index] != max_count) continue;
    if (best == nullptr || o.drop_count < best->drop_count ||
        (o.drop_count == best->drop_count &&
         o.candidate_index < best->candidate_index)) {
      best = &o;
    }
  }
  return VoteResult{best->token, tokens_at_max > 1};
}

// The full loop: uncertainty is computed once from the unmasked visual
// input, then each step runs an optional preliminary pass, samples one
// mask per schedule entry from a (seed, step, candidate) substream, takes
// each candidate's greedy proposal, and commits the vote winner. Stops at
// max_new_tokens or after emitting the EOS token (which is kept in the
// output).
template <ModelBackend B>
DecodeResult decode(const B& backend, const std::vector<TokenId>& prompt,
                    const DecodeConfig& config) {
  config.validate();
  const std::size_t vocab_size = backend.vocabulary().size();
  for (TokenId t : prompt) {
    if (t.index >= vocab_size) {
      throw ParameterError("prompt token id " + std::to_string(t.index) +
                           " out of range for vocabulary of size " +
                           std::to_string(vocab_size));
    }
  }
  if (config.eos_token && config.eos_token->index >= vocab_size) {
    throw ParameterError("eos token id out of range");
  }
  if (config.k_top > vocab_size) {
    throw ParameterError("k_top = " + std::to_string(config.k_top) +
                         " exceeds vocabulary size " +
                         std::to_string(vocab_size));
  }

  const std::vector<ProbDist> projections = backend.project_visual();
  const UncertaintyReport report = build_report(projections);
  const std::size_t ensemble = config.schedule.size();

  DecodeResult result;
  std::vector<TokenId> generated;
  for (std::size_t step = 1; step <= config.max_new_tokens; ++step) {
    StepTrace trace;
    trace.step = step;
    RelevantSet retained = RelevantSet::none();
    if (config.preliminary_pass) {
      const TokenId y_init = preliminary_token(backend, prompt, generated);
      retained = relevant_set(projections, y_init, config.k_top);
      trace.y_init = y_init;
    }
    trace.relevant_set = retained.positions;

    std::vector<DropoutMask> masks;
    masks.reserve(ensemble);
    for (std::size_t k = 0; k < ensemble; ++k) {
      const DropoutSchedule::Entry& entry = config.schedule.entries[k];
      const std::vector<double> probs = dropout_probabilities(
          report, entry.gamma, entry.delta, config.schedule.uniform_mode);
      RandomStream rng = RandomStream::substream(config.seed, step, k);
      masks.push_back(sample_mask(probs, retained, rng, k));
    }
    for (const DropoutMask& mask : masks) trace.masks.push_back(mask.keep);

    trace.candidates = candidate_step(backend, prompt, generated, masks,
                                      config.parallel_candidates);
    const VoteResult vote = majority_vote(trace.candidates);
    trace.chosen = vote.token;
    trace.tie_broken = vote.tie_broken;
    result.trace.steps.push_back(std::move(trace));

    generated.push_back(vote.token);
    if (config.eos_token && vote.token == *config.eos_token) break;
  }
  result.tokens = generated;
  result.trace.final_tokens = std::move(generated);
  return result;
}

template <ModelBackend B>
DecodeResult decode(const DecodeRequest<B>& request,
                    const DecodeConfig& config) {
  if (request.backend == nullptr) {
    throw ParameterError("decode request has no backend");
  }
  return decode(*request.backend, request.prompt, config);
}

}  // namespace dropdec
