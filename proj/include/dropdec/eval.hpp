#pragma once

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "dropdec/errors.hpp"

namespace dropdec::eval {

// Lowercased, whitespace-trimmed object name. Matching is exact string
// equality after this normalization; synonym resolution is assumed to have
// happened upstream.
inline std::string normalize_object_name(const std::string& name) {
  std::size_t begin = 0;
  std::size_t end = name.size();
  while (begin < end &&
         std::isspace(static_cast<unsigned char>(name[begin]))) {
    ++begin;
  }
  while (end > begin &&
         std::isspace(static_cast<unsigned char>(name[end - 1]))) {
    --end;
  }
  std::string out = name.substr(begin, end - begin);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  if (out.empty()) {
    throw ValidationError("object name is empty after normalization");
  }
  return out;
}

// One caption's worth of evidence: the objects a caption mentioned
// (occurrence list, duplicates preserved) and the objects actually present.
// Construct through make() so every stored name is normalized.
struct CaptionRecord {
  std::string image_id;
  std::vector<std::string> mentioned_objects;
  std::set<std::string> ground_truth_objects;

  static CaptionRecord make(std::string image_id,
                            const std::vector<std::string>& mentioned,
                            const std::vector<std::string>& ground_truth) {
    CaptionRecord rec;
    rec.image_id = std::move(image_id);
    rec.mentioned_objects.reserve(mentioned.size());
    for (const std::string& m : mentioned) {
      rec.mentioned_objects.push_back(normalize_object_name(m));
    }
    for (const std::string& g : ground_truth) {
      rec.ground_truth_objects.insert(normalize_object_name(g));
    }
    return rec;
  }

  std::set<std::string> distinct_mentions() const {
    return std::set<std::string>(mentioned_objects.begin(),
                                 mentioned_objects.end());
  }
};

struct ChairScores {
  double chair_s = 0.0;
  double chair_i = 0.0;
};

// Sentence- and instance-level hallucination rates. chair_s is the
// fraction of records mentioning at least one object absent from their
// ground truth; chair_i is hallucinated distinct mentions over all
// distinct mentions, pooled across the corpus. Duplicate mentions within
// a record count once per distinct name.
inline ChairScores chair_scores(const std::vector<CaptionRecord>& corpus) {
  if (corpus.empty()) {
    throw EmptyInputError("chair_scores: empty corpus");
  }
  std::size_t hallucinated_records = 0;
  std::size_t hallucinated_mentions = 0;
  std::size_t total_mentions = 0;
  for (const CaptionRecord& rec : corpus) {
    const std::set<std::string> mentions = rec.distinct_mentions();
    std::size_t hallucinated_here = 0;
    for (const std::string& m : mentions) {
      if (!rec.ground_truth_objects.contains(m)) ++hallucinated_here;
    }
    total_mentions += mentions.size();
    hallucinated_mentions += hallucinated_here;
    if (hallucinated_here > 0) ++hallucinated_records;
  }
  ChairScores scores;
  scores.chair_s = static_cast<double>(hallucinated_records) /
                   static_cast<double>(corpus.size());
  scores.chair_i = total_mentions == 0
                       ? 0.0
                       : static_cast<double>(hallucinated_mentions) /
                             static_cast<double>(total_mentions);
  return scores;
}

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
  // False when the corresponding denominator was zero and the value was
  // defined as 0 by convention; callers surface this as a warning.
  bool precision_defined = true;
  bool recall_defined = true;
};

// Micro-averaged precision and recall. Precision pools mention
// occurrences: every mention of a ground-truth object counts toward the
// numerator, every mention toward the denominator. Recall pools per-record
// coverage: distinct ground-truth objects that got mentioned over all
// ground-truth objects. The asymmetry (occurrences vs distinct objects)
// is deliberate: precision asks "how much of what was said is true",
// recall asks "how much of what is there was said".
inline PrecisionRecall precision_recall(
    const std::vector<CaptionRecord>& corpus) {
  if (corpus.empty()) {
    throw EmptyInputError("precision_recall: empty corpus");
  }
  std::size_t true_mentions = 0;
  std::size_t all_mentions = 0;
  std::size_t covered_objects = 0;
  std::size_t total_objects = 0;
  for (const CaptionRecord& rec : corpus) {
    for (const std::string& m : rec.mentioned_objects) {
      ++all_mentions;
      if (rec.ground_truth_objects.contains(m)) ++true_mentions;
    }
    const std::set<std::string> mentions = rec.distinct_mentions();
    total_objects += rec.ground_truth_objects.size();
    for (const std::string& g : rec.ground_truth_objects) {
      if (mentions.contains(g)) ++covered_objects;
    }
  }
  PrecisionRecall pr;
  if (all_mentions == 0) {
    pr.precision = 0.0;
    pr.precision_defined = false;
  } else {
    pr.precision = static_cast<double>(true_mentions) /
                   static_cast<double>(all_mentions);
  }
  if (total_objects == 0) {
    pr.recall = 0.0;
    pr.recall_defined = false;
  } else {
    pr.recall = static_cast<double>(covered_objects) /
                static_cast<double>(total_objects);
  }
  return pr;
}

// F_beta = (1 + beta^2) * p * r / (beta^2 * p + r); 0 when the denominator
// vanishes. beta < 1 weights precision more, beta > 1 weights recall more.
inline double f_beta(double p, double r, double beta) {
  if (!(beta > 0.0)) {
    throw ParameterError("f_beta: beta must be > 0");
  }
  if (!(p >= 0.0 && p <= 1.0)) {
    throw ParameterError("f_beta: precision must be in [0, 1]");
  }
  if (!(r >= 0.0 && r <= 1.0)) {
    throw ParameterError("f_beta: recall must be in [0, 1]");
  }
  const double b2 = beta * beta;
  const double denom = b2 * p + r;
  if (denom == 0.0) return 0.0;
  return (1.0 + b2) * p * r / denom;
}

// Bundle of every metric over one corpus, for one set of betas.
struct MetricReport {
  double chair_s = 0.0;
  double chair_i = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  bool precision_defined = true;
  bool recall_defined = true;
  std::map<double, double> f_scores;
};

inline MetricReport score_corpus(const std::vector<CaptionRecord>& corpus,
                                 const std::vector<double>& betas = {1.0,
                                                                     0.5}) {
  const ChairScores chair = chair_scores(corpus);
  const PrecisionRecall pr = precision_recall(corpus);
  MetricReport report;
  report.chair_s = chair.chair_s;
  report.chair_i = chair.chair_i;
  report.precision = pr.precision;
  report.recall = pr.recall;
  report.precision_defined = pr.precision_defined;
  report.recall_defined = pr.recall_defined;
  for (double beta : betas) {
    report.f_scores[beta] = f_beta(pr.precision, pr.recall, beta);
  }
  return report;
}

}  // namespace dropdec::eval
