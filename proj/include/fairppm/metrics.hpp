#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include <json.hpp>

namespace fairppm::metrics {

// Propensities split by sensitive group (S0: s = 0, S1: s = 1).
struct GroupedScores {
  std::vector<double> s0;
  std::vector<double> s1;
};

GroupedScores group_scores(std::span<const double> scores, std::span<const int> sensitive);

// |mean(S0) - mean(S1)|
double delta_dp_c(const GroupedScores& g);
// |P(score > t | S0) - P(score > t | S1)|
double delta_dp_b(const GroupedScores& g, double t);

// Integration resolution for the distribution-based metrics.
inline constexpr std::size_t kGridIntervals = 10000;

// `intervals + 1` equally spaced points on [0,1], first 0 and last exactly 1.
std::vector<double> unit_grid(std::size_t intervals = kGridIntervals);

// Silverman's rule 0.9 * min(sd, IQR / 1.34) * n^(-1/5), floored at 1e-3.
double silverman_bandwidth(std::span<const double> samples);

// Gaussian KDE evaluated on `grid`, no boundary correction.
std::vector<double> kde_pdf(std::span<const double> samples, std::span<const double> grid);

// Right-continuous empirical CDF: fraction of samples <= x.
std::vector<double> ecdf(std::span<const double> samples, std::span<const double> grid);

// Composite trapezoidal rule over a strictly increasing grid.
double trapezoid(std::span<const double> values, std::span<const double> grid);

// Area between the groups' KDE curves over [0,1]; in [0, 2] up to boundary leakage.
double abpc(const GroupedScores& g);
// Area between the groups' empirical CDFs over [0,1]; in [0, 1].
double abcc(const GroupedScores& g);

struct DensityCurve {
  std::vector<double> grid;
  std::vector<double> f0, f1;
  std::vector<double> F0, F1;
};

DensityCurve density_curve(const GroupedScores& g, std::size_t intervals = kGridIntervals);
// Columns x,f0,f1,F0,F1; optional leading `# ...` provenance line.
void write_density_csv(std::ostream& out, const DensityCurve& curve, const std::string& provenance = {});

// Mann-Whitney AUC with ties counted as one half.
double auc(std::span<const double> scores, std::span<const int> labels);

struct F1Acc {
  double f1 = 0;
  double accuracy = 0;
};

// Predicts positive iff score > t. F1 is 0 when 2TP + FP + FN = 0.
F1Acc f1_acc_at(std::span<const double> scores, std::span<const int> labels, double t);

// Smallest threshold among {0, 1, unique scores} that maximizes F1.
double optimal_threshold(std::span<const double> scores, std::span<const int> labels);

struct EvalReport {
  double auc = 0;
  double f1_at_0_5 = 0;
  double f1_at_opt = 0;
  double acc_at_0_5 = 0;
  double acc_at_opt = 0;
  double opt_threshold = 0;
  double ddp_b_0_5 = 0;
  double ddp_b_opt = 0;
  double ddp_c = 0;
  double abpc = 0;
  double abcc = 0;

  nlohmann::json to_json() const;
  static EvalReport from_json(const nlohmann::json& j);
  bool operator==(const EvalReport&) const = default;
};

// Field names in EvalReport order, as used in JSON and CSV outputs.
const std::vector<std::string>& eval_report_fields();
std::vector<double> eval_report_values(const EvalReport& r);

// All report fields for test scores, using a threshold tuned on validation scores.
EvalReport evaluate_scores(std::span<const double> test_scores, std::span<const int> test_labels,
                           std::span<const int> test_sensitive, std::span<const double> valid_scores,
                           std::span<const int> valid_labels);

}  // namespace fairppm::metrics
