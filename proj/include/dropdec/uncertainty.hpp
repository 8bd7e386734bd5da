#pragma once

#include <algorithm>
#include <cstddef>
#include <utility>
#include <vector>

#include "dropdec/errors.hpp"
#include "dropdec/probability.hpp"

namespace dropdec {

// Per-position uncertainty decomposition over a set of visual projections.
// With q_bar the mean projection:
//
//   u_ale[i]  = H(q_i)            aleatoric: how diffuse position i itself is
//   u_epi[i]  = KL(q_i || q_bar)  epistemic: how far position i strays from
//                                 the consensus
//   u_total   = H(q_bar)
//
// These satisfy u_total = mean_i(u_ale[i] + u_epi[i]) exactly in real
// arithmetic, and to ~1e-9 nats in doubles; the identity is what makes the
// epistemic term the right dropout signal rather than an ad-hoc score.
struct UncertaintyReport {
  std::size_t n_visual = 0;
  ProbDist q_bar;
  std::vector<double> u_ale;
  std::vector<double> u_epi;
  double u_total = 0.0;
  double u_epi_min = 0.0;
  double u_epi_max = 0.0;
};

inline UncertaintyReport build_report(const std::vector<ProbDist>& projections) {
  if (projections.empty()) {
    throw EmptyInputError("build_report: no projections given");
  }
  UncertaintyReport report{projections.size(), average(projections), {}, {},
                           0.0, 0.0, 0.0};
  report.u_ale.reserve(projections.size());
  report.u_epi.reserve(projections.size());
  for (const ProbDist& q : projections) {
    report.u_ale.push_back(entropy(q));
    report.u_epi.push_back(kl_divergence(q, report.q_bar));
  }
  report.u_total = entropy(report.q_bar);
  const auto [min_it, max_it] =
      std::minmax_element(report.u_epi.begin(), report.u_epi.end());
  report.u_epi_min = *min_it;
  report.u_epi_max = *max_it;
  return report;
}

// Flattened, display-ready view of a report: one row per visual position
// plus corpus-style means. This is what the inspection tooling serializes.
struct UncertaintySummary {
  struct Row {
    std::size_t index = 0;
    double u_ale = 0.0;
    double u_epi = 0.0;
  };

  std::vector<Row> rows;
  double mean_u_ale = 0.0;
  double mean_u_epi = 0.0;
  double u_total = 0.0;
};

inline UncertaintySummary report_summary(const UncertaintyReport& report) {
  UncertaintySummary summary;
  summary.rows.reserve(report.n_visual);
  double ale_sum = 0.0;
  double epi_sum = 0.0;
  for (std::size_t i = 0; i < report.n_visual; ++i) {
    summary.rows.push_back({i, report.u_ale[i], report.u_epi[i]});
    ale_sum += report.u_ale[i];
    epi_sum += report.u_epi[i];
  }
  summary.mean_u_ale = ale_sum / static_cast<double>(report.n_visual);
  summary.mean_u_epi = epi_sum / static_cast<double>(report.n_visual);
  summary.u_total = report.u_total;
  return summary;
}

}  // namespace dropdec
