// Acceptance harness: each criterion below is a self-contained check with a
// pinned tolerance and a wall-clock budget. Prints one PASS/FAIL line per
// criterion; the exit status is the number of failures, so a zero exit means
// the build is accepted.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "dropdec/dropdec.hpp"
#include "dropdec/io.hpp"
#include "test_support.hpp"

using namespace dropdec;

namespace {

bool close(double a, double b, double tol) { return std::abs(a - b) <= tol; }

// 1. The total uncertainty of the averaged projection must equal the mean
//    of the per-position aleatoric + epistemic split, and also the mean
//    cross-entropy against the average, to 1e-9 nats.
bool decomposition_identity(std::string& detail) {
  RandomStream rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<ProbDist> projections;
    projections.reserve(20);
    for (int i = 0; i < 20; ++i) {
      projections.push_back(testsup::random_dist(rng, 50, 1.5));
    }
    const UncertaintyReport report = build_report(projections);
    double mean_split = 0.0;
    double mean_ce = 0.0;
    for (std::size_t i = 0; i < projections.size(); ++i) {
      mean_split += report.u_ale[i] + report.u_epi[i];
      mean_ce += cross_entropy(projections[i], report.q_bar);
    }
    mean_split /= static_cast<double>(projections.size());
    mean_ce /= static_cast<double>(projections.size());
    const double total = entropy(report.q_bar);
    if (!close(report.u_total, total, 1e-12) ||
        !close(total, mean_split, 1e-9) || !close(total, mean_ce, 1e-9)) {
      detail = "identity broken at trial " + std::to_string(trial);
      return false;
    }
  }
  return true;
}

// 2. Divergence and entropy basics over 1000 random pairs: KL is
//    non-negative, entropy sits in [0, ln |V|], and cross-entropy splits
//    into entropy + KL within 1e-9.
bool divergence_properties(std::string& detail) {
  RandomStream rng(2025);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t size = 2 + rng.next_u64() % 49;
    const ProbDist p = testsup::random_dist(rng, size, 1.2);
    const ProbDist q = testsup::random_dist(rng, size, 1.2);
    const double h = entropy(p);
    const double d = kl_divergence(p, q);
    const double ce = cross_entropy(p, q);
    if (d < -1e-12) {
      detail = "negative divergence at trial " + std::to_string(trial);
      return false;
    }
    if (h < 0.0 || h > std::log(static_cast<double>(size)) + 1e-12) {
      detail = "entropy out of range at trial " + std::to_string(trial);
      return false;
    }
    if (!close(ce, h + d, 1e-9)) {
      detail = "cross-entropy split at trial " + std::to_string(trial);
      return false;
    }
  }
  return true;
}

// 3. Mask sampling: per-position empirical drop rates over 10^4 masks match
//    the configured probabilities within ±0.02, retained positions are
//    never dropped, and the probability endpoints are exact (the least
//    surprising position gets delta, the most surprising gamma + delta).
bool mask_statistics(std::string& detail) {
  RandomStream setup(31);
  std::vector<ProbDist> projections;
  for (int i = 0; i < 8; ++i) {
    projections.push_back(testsup::random_dist(setup, 12, 1.5));
  }
  const UncertaintyReport report = build_report(projections);
  const double gamma = 0.5;
  const double delta = 0.1;
  const std::vector<double> probs =
      dropout_probabilities(report, gamma, delta);

  std::size_t imin = 0;
  std::size_t imax = 0;
  for (std::size_t i = 0; i < report.u_epi.size(); ++i) {
    if (report.u_epi[i] == report.u_epi_min) imin = i;
    if (report.u_epi[i] == report.u_epi_max) imax = i;
  }
  if (probs[imin] != delta) {
    detail = "floor endpoint not exact";
    return false;
  }
  if (probs[imax] != std::min(1.0, gamma + delta)) {
    detail = "ceiling endpoint not exact";
    return false;
  }

  const RelevantSet retained{{1, 4}, TokenId{0}, 1};
  const std::size_t trials = 10000;
  std::vector<std::size_t> drops(probs.size(), 0);
  for (std::size_t t = 0; t < trials; ++t) {
    RandomStream rng = RandomStream::substream(424242, t, 0);
    const DropoutMask mask = sample_mask(probs, retained, rng);
    for (std::size_t i = 0; i < mask.keep.size(); ++i) {
      if (!mask.keep[i]) ++drops[i];
    }
  }
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double rate =
        static_cast<double>(drops[i]) / static_cast<double>(trials);
    if (retained.contains(i)) {
      if (drops[i] != 0) {
        detail = "retained position " + std::to_string(i) + " dropped";
        return false;
      }
    } else if (!close(rate, probs[i], 0.02)) {
      detail = "rate off at position " + std::to_string(i);
      return false;
    }
  }
  return true;
}

// 4. A one-candidate ensemble with zero dropout and no preliminary pass
//    must reproduce plain greedy decoding token-for-token.
bool greedy_degeneration(std::string& detail) {
  RandomStream rng(4040);
  for (int trial = 0; trial < 20; ++trial) {
    const ScriptedModel model = testsup::random_scripted_model(rng);
    DecodeConfig config;
    config.schedule = DropoutSchedule::from_gammas({0.0}, 0.0);
    config.k_top = 1;
    config.max_new_tokens = 6;
    config.preliminary_pass = false;
    const DecodeResult result = decode(model, {}, config);
    const std::vector<TokenId> expected =
        testsup::oracle::reference_greedy(model, {}, 6);
    if (result.tokens != expected) {
      detail = "mismatch on model " + std::to_string(trial);
      return false;
    }
  }
  return true;
}

// 5. Exhaustive vote oracle: all 729 assignments of three candidate tokens
//    from a three-token vocabulary and drop counts from {0,1,2} agree with
//    an independent brute-force tally, tie flag included.
bool vote_oracle(std::string& detail) {
  for (std::size_t t0 = 0; t0 < 3; ++t0) {
    for (std::size_t t1 = 0; t1 < 3; ++t1) {
      for (std::size_t t2 = 0; t2 < 3; ++t2) {
        for (std::size_t d0 = 0; d0 < 3; ++d0) {
          for (std::size_t d1 = 0; d1 < 3; ++d1) {
            for (std::size_t d2 = 0; d2 < 3; ++d2) {
              const std::vector<CandidateOutcome> outcomes = {
                  {0, TokenId{t0}, d0},
                  {1, TokenId{t1}, d1},
                  {2, TokenId{t2}, d2},
              };
              const VoteResult got = majority_vote(outcomes);
              const testsup::oracle::VoteAnswer want =
                  testsup::oracle::brute_force_vote(outcomes);
              if (got.token != want.token ||
                  got.tie_broken != want.tie_broken) {
                detail = "case " + std::to_string(t0) + std::to_string(t1) +
                         std::to_string(t2) + "/" + std::to_string(d0) +
                         std::to_string(d1) + std::to_string(d2);
                return false;
              }
            }
          }
        }
      }
    }
  }
  return true;
}

// 6. End-to-end recovery on the shipped fixture: greedy hallucinates "dog"
//    while the masked ensemble (seed 42) answers "cat", and the caption
//    scorer rates the two outputs 1.0 and 0.0.
bool hallucination_fixture(std::string& detail) {
  const io::AnyModel any =
      io::load_model(testsup::fixture_path("halluc_cat.json"));
  const ScriptedModel& model = std::get<ScriptedModel>(any);
  const Vocabulary& vocab = model.vocabulary();
  const TokenId end = vocab.id_of("<end>");

  DecodeConfig greedy;
  greedy.schedule = DropoutSchedule::from_gammas({0.0}, 0.0);
  greedy.k_top = 1;
  greedy.max_new_tokens = 8;
  greedy.preliminary_pass = false;
  greedy.eos_token = end;
  const DecodeResult greedy_result = decode(model, {}, greedy);
  const std::string greedy_text = io::join_tokens(vocab, greedy_result.tokens);

  DecodeConfig ensemble;
  ensemble.schedule = DropoutSchedule::from_gammas({0.3, 1.0, 1.2}, 0.1);
  ensemble.seed = 42;
  ensemble.max_new_tokens = 8;
  ensemble.eos_token = end;
  const DecodeResult dropout_result = decode(model, {}, ensemble);
  const std::string dropout_text =
      io::join_tokens(vocab, dropout_result.tokens);

  if (greedy_text.find("dog") == std::string::npos ||
      greedy_text.find("cat") != std::string::npos) {
    detail = "greedy text was '" + greedy_text + "'";
    return false;
  }
  if (dropout_text.find("cat") == std::string::npos ||
      dropout_text.find("dog") != std::string::npos) {
    detail = "ensemble text was '" + dropout_text + "'";
    return false;
  }

  const auto mentions = [&](const std::vector<TokenId>& tokens) {
    std::vector<std::string> words;
    for (TokenId t : tokens) {
      if (t != end) words.push_back(vocab.token(t));
    }
    return words;
  };
  const auto greedy_scores = eval::chair_scores(
      {eval::CaptionRecord::make("greedy", mentions(greedy_result.tokens),
                                 {"cat"})});
  const auto dropout_scores = eval::chair_scores(
      {eval::CaptionRecord::make("dropout", mentions(dropout_result.tokens),
                                 {"cat"})});
  if (greedy_scores.chair_s != 1.0 || dropout_scores.chair_s != 0.0) {
    detail = "scorer disagreed with the transcript";
    return false;
  }
  return true;
}

// 7. Concurrent candidate evaluation must leave no trace: serial and
//    parallel decodes of the same seed serialize to byte-identical
//    documents for 10 random models.
bool parallel_determinism(std::string& detail) {
  RandomStream rng(7070);
  for (int trial = 0; trial < 10; ++trial) {
    const ScriptedModel model = testsup::random_scripted_model(rng);
    DecodeConfig config;
    config.schedule = DropoutSchedule::from_gammas({0.3, 0.5, 0.7}, 0.1);
    config.k_top = 2;
    config.max_new_tokens = 5;
    config.seed = 5;
    const DecodeResult serial = decode(model, {}, config);
    config.parallel_candidates = true;
    const DecodeResult parallel = decode(model, {}, config);
    const std::string a =
        io::trace_to_json(serial.trace, model.vocabulary()).dump();
    const std::string b =
        io::trace_to_json(parallel.trace, model.vocabulary()).dump();
    if (a != b) {
      detail = "trace diverged on model " + std::to_string(trial);
      return false;
    }
  }
  return true;
}

// 8. Hand-counted scoring fixtures: the shipped corpus scores exactly
//    0.5 / 0.3, and the F-score hits its two pinned values within 1e-6.
bool metric_fixtures(std::string& detail) {
  const auto corpus =
      io::load_corpus(testsup::fixture_path("corpus_hand.jsonl"));
  const eval::ChairScores scores = eval::chair_scores(corpus);
  if (scores.chair_s != 0.5 || scores.chair_i != 0.3) {
    detail = "corpus scores off";
    return false;
  }
  if (!close(eval::f_beta(0.8, 0.6, 1.0), 0.685714, 1e-6) ||
      !close(eval::f_beta(0.8, 0.6, 0.5), 0.75, 1e-6)) {
    detail = "f-score off";
    return false;
  }
  return true;
}

// 9. Synthetic transformer smoke: distributions are valid, prefixes of the
//    projection sweep are independent of the configured width, identical
//    seeds reproduce outputs bit-for-bit, and a 16-token decode finishes
//    inside two seconds.
bool transformer_smoke(std::string& detail) {
  const TinyTransformer model(2026, 16);
  const std::vector<ProbDist> projections = model.project_visual();
  if (projections.size() != 16) {
    detail = "projection count";
    return false;
  }
  for (const ProbDist& p : projections) {
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (!(p[i] > 0.0)) {
        detail = "non-positive probability";
        return false;
      }
      sum += p[i];
    }
    if (!close(sum, 1.0, 1e-9)) {
      detail = "projection does not normalize";
      return false;
    }
  }

  const TinyTransformer narrow(2026, 8);
  const std::vector<ProbDist> head = narrow.project_visual();
  for (std::size_t i = 0; i < head.size(); ++i) {
    if (!(head[i].values() == projections[i].values())) {
      detail = "projection prefix depends on width";
      return false;
    }
  }

  const TinyTransformer twin(2026, 16);
  VisibilitySet vis(16);
  vis.set(3, false);
  vis.set(11, false);
  const ProbDist d1 = model.next_token_dist(vis, {TokenId{7}}, {TokenId{40}});
  const ProbDist d2 = twin.next_token_dist(vis, {TokenId{7}}, {TokenId{40}});
  if (!(d1.values() == d2.values()) ||
      !(twin.project_visual()[15].values() == projections[15].values())) {
    detail = "same seed, different outputs";
    return false;
  }

  DecodeConfig config;
  config.max_new_tokens = 16;
  config.seed = 9;
  const auto start = std::chrono::steady_clock::now();
  const DecodeResult result = decode(model, {TokenId{5}}, config);
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  if (result.tokens.size() != 16) {
    detail = "decode stopped early";
    return false;
  }
  if (elapsed >= 2.0) {
    detail = "decode took too long";
    return false;
  }
  return true;
}

struct Criterion {
  int number;
  const char* name;
  double budget_seconds;
  bool (*run)(std::string&);
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "uncertainty decomposition identity", 5.0, decomposition_identity},
      {2, "divergence and entropy properties", 5.0, divergence_properties},
      {3, "mask sampling statistics", 10.0, mask_statistics},
      {4, "greedy degeneration", 5.0, greedy_degeneration},
      {5, "majority vote oracle", 1.0, vote_oracle},
      {6, "hallucination recovery fixture", 1.0, hallucination_fixture},
      {7, "parallel determinism", 10.0, parallel_determinism},
      {8, "metric fixtures", 1.0, metric_fixtures},
      {9, "synthetic transformer smoke", 10.0, transformer_smoke},
  };

  int failures = 0;
  for (const Criterion& c : criteria) {
    std::string detail;
    bool ok = false;
    const auto start = std::chrono::steady_clock::now();
    try {
      ok = c.run(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    if (ok && elapsed > c.budget_seconds) {
      ok = false;
      detail = "over time budget";
    }
    std::printf("%s  %d. %s (%.2fs)%s%s\n", ok ? "PASS" : "FAIL", c.number,
                c.name, elapsed, detail.empty() ? "" : " -- ",
                detail.c_str());
    if (!ok) ++failures;
  }
  std::printf("%zu of %zu criteria passed\n", criteria.size() - failures,
              criteria.size());
  return failures;
}
