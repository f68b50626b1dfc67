#include "fairppm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <ostream>

#include "fairppm/csv.hpp"
#include "fairppm/error.hpp"

namespace fairppm::metrics {
namespace {

void require_groups(const GroupedScores& g, const char* metric) {
  if (g.s0.empty()) throw UndefinedMetricError(metric, "group S0 is empty");
  if (g.s1.empty()) throw UndefinedMetricError(metric, "group S1 is empty");
}

void require_same_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw ShapeError(std::string(what) + ": length mismatch (" + std::to_string(a) + " vs " + std::to_string(b) +
                     ")");
  }
}

double mean(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

double rate_above(std::span<const double> v, double t) {
  const auto n = std::count_if(v.begin(), v.end(), [t](double x) { return x > t; });
  return static_cast<double>(n) / static_cast<double>(v.size());
}

// numpy-style linear interpolation on sorted data.
double quantile_sorted(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

struct Counts {
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

Counts count_labels(std::span<const int> labels) {
  Counts c;
  for (int y : labels) {
    if (y != 0 && y != 1) throw ShapeError("labels must be 0 or 1");
    (y ? c.positives : c.negatives) += 1;
  }
  return c;
}

double f1_from(double tp, double fp, double fn) {
  const double den = 2.0 * tp + fp + fn;
  return den == 0.0 ? 0.0 : 2.0 * tp / den;
}

}  // namespace

GroupedScores group_scores(std::span<const double> scores, std::span<const int> sensitive) {
  require_same_size(scores.size(), sensitive.size(), "group_scores");
  GroupedScores g;
  for (std::size_t i = 0; i < scores.size(); ++i) (sensitive[i] ? g.s1 : g.s0).push_back(scores[i]);
  return g;
}

double delta_dp_c(const GroupedScores& g) {
  require_groups(g, "delta_dp_c");
  return std::abs(mean(g.s0) - mean(g.s1));
}

double delta_dp_b(const GroupedScores& g, double t) {
  require_groups(g, "delta_dp_b");
  return std::abs(rate_above(g.s0, t) - rate_above(g.s1, t));
}

std::vector<double> unit_grid(std::size_t intervals) {
  if (intervals == 0) throw ShapeError("grid needs at least one interval");
  std::vector<double> grid(intervals + 1);
  for (std::size_t k = 0; k <= intervals; ++k) grid[k] = static_cast<double>(k) / static_cast<double>(intervals);
  return grid;
}

double silverman_bandwidth(std::span<const double> samples) {
  constexpr double kFloor = 1e-3;
  const std::size_t n = samples.size();
  if (n < 2) return kFloor;
  const double m = mean(samples);
  double ss = 0.0;
  for (double x : samples) ss += (x - m) * (x - m);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
  const double h = 0.9 * std::min(sd, iqr / 1.34) * std::pow(static_cast<double>(n), -0.2);
  return std::max(h, kFloor);
}

std::vector<double> kde_pdf(std::span<const double> samples, std::span<const double> grid) {
  if (samples.empty()) throw UndefinedMetricError("kde_pdf", "no samples");
  const double h = silverman_bandwidth(samples);
  const double norm = 1.0 / (static_cast<double>(samples.size()) * h * std::sqrt(2.0 * std::numbers::pi));
  // Beyond 10 bandwidths a kernel contributes below exp(-50) of its peak.
  const double reach = 10.0 * h;
  std::vector<double> pdf(grid.size(), 0.0);
  for (double s : samples) {
    auto lo = std::lower_bound(grid.begin(), grid.end(), s - reach);
    auto hi = std::upper_bound(lo, grid.end(), s + reach);
    for (auto it = lo; it != hi; ++it) {
      const double z = (*it - s) / h;
      pdf[static_cast<std::size_t>(it - grid.begin())] += std::exp(-0.5 * z * z);
    }
  }
  for (double& v : pdf) v *= norm;
  return pdf;
}

std::vector<double> ecdf(std::span<const double> samples, std::span<const double> grid) {
  if (samples.empty()) throw UndefinedMetricError("ecdf", "no samples");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> cdf(grid.size());
  const double n = static_cast<double>(sorted.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const auto below = std::upper_bound(sorted.begin(), sorted.end(), grid[k]) - sorted.begin();
    cdf[k] = static_cast<double>(below) / n;
  }
  return cdf;
}

double trapezoid(std::span<const double> values, std::span<const double> grid) {
  require_same_size(values.size(), grid.size(), "trapezoid");
  double total = 0.0;
  for (std::size_t k = 1; k < grid.size(); ++k) {
    const double dx = grid[k] - grid[k - 1];
    if (!(dx > 0.0)) throw ShapeError("trapezoid: grid must be strictly increasing");
    total += 0.5 * dx * (values[k] + values[k - 1]);
  }
  return total;
}

double abpc(const GroupedScores& g) {
  require_groups(g, "abpc");
  const auto grid = unit_grid();
  const auto f0 = kde_pdf(g.s0, grid);
  const auto f1 = kde_pdf(g.s1, grid);
  std::vector<double> diff(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) diff[k] = std::abs(f0[k] - f1[k]);
  return trapezoid(diff, grid);
}

double abcc(const GroupedScores& g) {
  require_groups(g, "abcc");
  const auto grid = unit_grid();
  const auto F0 = ecdf(g.s0, grid);
  const auto F1 = ecdf(g.s1, grid);
  std::vector<double> diff(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) diff[k] = std::abs(F0[k] - F1[k]);
  return trapezoid(diff, grid);
}

DensityCurve density_curve(const GroupedScores& g, std::size_t intervals) {
  require_groups(g, "density_curve");
  DensityCurve c;
  c.grid = unit_grid(intervals);
  c.f0 = kde_pdf(g.s0, c.grid);
  c.f1 = kde_pdf(g.s1, c.grid);
  c.F0 = ecdf(g.s0, c.grid);
  c.F1 = ecdf(g.s1, c.grid);
  return c;
}

void write_density_csv(std::ostream& out, const DensityCurve& curve, const std::string& provenance) {
  if (!provenance.empty()) out << "# " << provenance << '\n';
  out << "x,f0,f1,F0,F1\n";
  for (std::size_t k = 0; k < curve.grid.size(); ++k) {
    out << csv::format_double(curve.grid[k]) << ',' << csv::format_double(curve.f0[k]) << ','
        << csv::format_double(curve.f1[k]) << ',' << csv::format_double(curve.F0[k]) << ','
        << csv::format_double(curve.F1[k]) << '\n';
  }
}

double auc(std::span<const double> scores, std::span<const int> labels) {
  require_same_size(scores.size(), labels.size(), "auc");
  const Counts c = count_labels(labels);
  if (c.positives == 0 || c.negatives == 0) throw UndefinedMetricError("auc", "labels contain a single class");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Sum over positives of (#negatives strictly below + 0.5 * #negatives tied).
  double wins = 0.0;
  std::size_t negatives_below = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::size_t pos = 0, neg = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] ? pos : neg) += 1;
      ++j;
    }
    wins += static_cast<double>(pos) * static_cast<double>(negatives_below) +
            0.5 * static_cast<double>(pos) * static_cast<double>(neg);
    negatives_below += neg;
    i = j;
  }
  return wins / (static_cast<double>(c.positives) * static_cast<double>(c.negatives));
}

F1Acc f1_acc_at(std::span<const double> scores, std::span<const int> labels, double t) {
  require_same_size(scores.size(), labels.size(), "f1_acc_at");
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] > t;
    if (labels[i] != 0 && labels[i] != 1) throw ShapeError("labels must be 0 or 1");
    if (pred && labels[i]) ++tp;
    else if (pred) ++fp;
    else if (labels[i]) ++fn;
    else ++tn;
  }
  F1Acc r;
  r.f1 = f1_from(static_cast<double>(tp), static_cast<double>(fp), static_cast<double>(fn));
  r.accuracy = scores.empty() ? 0.0 : static_cast<double>(tp + tn) / static_cast<double>(scores.size());
  return r;
}

double optimal_threshold(std::span<const double> scores, std::span<const int> labels) {
  require_same_size(scores.size(), labels.size(), "optimal_threshold");
  const Counts c = count_labels(labels);
  if (c.positives == 0 || c.negatives == 0) {
    throw UndefinedMetricError("optimal_threshold", "labels contain a single class");
  }
  std::vector<double> pos, neg;
  for (std::size_t i = 0; i < scores.size(); ++i) (labels[i] ? pos : neg).push_back(scores[i]);
  std::sort(pos.begin(), pos.end());
  std::sort(neg.begin(), neg.end());

  std::vector<double> candidates(scores.begin(), scores.end());
  candidates.push_back(0.0);
  candidates.push_back(1.0);
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  double best_t = candidates.front();
  double best_f1 = -1.0;
  for (double t : candidates) {
    const auto tp = static_cast<double>(pos.end() - std::upper_bound(pos.begin(), pos.end(), t));
    const auto fp = static_cast<double>(neg.end() - std::upper_bound(neg.begin(), neg.end(), t));
    const double fn = static_cast<double>(c.positives) - tp;
    const double f1 = f1_from(tp, fp, fn);
    if (f1 > best_f1) {
      best_f1 = f1;
      best_t = t;
    }
  }
  return best_t;
}

const std::vector<std::string>& eval_report_fields() {
  static const std::vector<std::string> kFields{"auc",        "f1_at_0_5",     "f1_at_opt", "acc_at_0_5",
                                                "acc_at_opt", "opt_threshold", "ddp_b_0_5", "ddp_b_opt",
                                                "ddp_c",      "abpc",          "abcc"};
  return kFields;
}

std::vector<double> eval_report_values(const EvalReport& r) {
  return {r.auc,           r.f1_at_0_5, r.f1_at_opt, r.acc_at_0_5, r.acc_at_opt, r.opt_threshold,
          r.ddp_b_0_5,     r.ddp_b_opt, r.ddp_c,     r.abpc,       r.abcc};
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  const auto& names = eval_report_fields();
  const auto values = eval_report_values(*this);
  for (std::size_t i = 0; i < names.size(); ++i) j[names[i]] = values[i];
  return j;
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
  EvalReport r;
  r.auc = j.at("auc").get<double>();
  r.f1_at_0_5 = j.at("f1_at_0_5").get<double>();
  r.f1_at_opt = j.at("f1_at_opt").get<double>();
  r.acc_at_0_5 = j.at("acc_at_0_5").get<double>();
  r.acc_at_opt = j.at("acc_at_opt").get<double>();
  r.opt_threshold = j.at("opt_threshold").get<double>();
  r.ddp_b_0_5 = j.at("ddp_b_0_5").get<double>();
  r.ddp_b_opt = j.at("ddp_b_opt").get<double>();
  r.ddp_c = j.at("ddp_c").get<double>();
  r.abpc = j.at("abpc").get<double>();
  r.abcc = j.at("abcc").get<double>();
  return r;
}

EvalReport evaluate_scores(std::span<const double> test_scores, std::span<const int> test_labels,
                           std::span<const int> test_sensitive, std::span<const double> valid_scores,
                           std::span<const int> valid_labels) {
  EvalReport r;
  r.opt_threshold = optimal_threshold(valid_scores, valid_labels);
  r.auc = auc(test_scores, test_labels);
  const F1Acc at_half = f1_acc_at(test_scores, test_labels, 0.5);
  const F1Acc at_opt = f1_acc_at(test_scores, test_labels, r.opt_threshold);
  r.f1_at_0_5 = at_half.f1;
  r.acc_at_0_5 = at_half.accuracy;
  r.f1_at_opt = at_opt.f1;
  r.acc_at_opt = at_opt.accuracy;
  const GroupedScores g = group_scores(test_scores, test_sensitive);
  r.ddp_b_0_5 = delta_dp_b(g, 0.5);
  r.ddp_b_opt = delta_dp_b(g, r.opt_threshold);
  r.ddp_c = delta_dp_c(g);
  r.abpc = abpc(g);
  r.abcc = abcc(g);
  return r;
}

}  // namespace fairppm::metrics
