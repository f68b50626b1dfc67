#include "fairppm/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fairppm/error.hpp"

namespace fairppm::transport {

double exact_w1_1d(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw ShapeError("exact_w1_1d: both samples must be non-empty");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double n = static_cast<double>(x.size()), m = static_cast<double>(y.size());

  std::size_t i = 0, j = 0;
  double fa = 0.0, fb = 0.0, total = 0.0;
  double prev = std::min(x.front(), y.front());
  while (i < x.size() || j < y.size()) {
    const double at = j == y.size() || (i < x.size() && x[i] <= y[j]) ? x[i] : y[j];
    total += std::abs(fa - fb) * (at - prev);
    prev = at;
    while (i < x.size() && x[i] == at) ++i;
    while (j < y.size() && y[j] == at) ++j;
    fa = static_cast<double>(i) / n;
    fb = static_cast<double>(j) / m;
  }
  return total;
}

void SinkhornConfig::validate() const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ConfigError("sinkhorn epsilon must be positive");
  if (max_iters < 1) throw ConfigError("sinkhorn max_iters must be at least 1");
  if (std::isnan(convergence_tol)) throw ConfigError("sinkhorn convergence_tol is NaN");
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Signed sum stored as mant * exp(lsc), so terms whose logs range over
// thousands can be added with one exp per term.
struct ScaledSum {
  double mant = 0.0;
  double lsc = kNegInf;

  void add(double w, double logmag) {
    if (w == 0.0) return;
    if (logmag > lsc) {
      mant = mant * std::exp(lsc - logmag) + w;
      lsc = logmag;
    } else {
      mant += w * std::exp(logmag - lsc);
    }
  }

  double times_exp(double shift) const { return mant == 0.0 ? 0.0 : mant * std::exp(lsc + shift); }
};

double log_sum(const ScaledSum& p, const ScaledSum& q) {
  const double top = std::max(p.lsc, q.lsc);
  double s = 0.0;
  if (p.mant != 0.0) s += p.mant * std::exp(p.lsc - top);
  if (q.mant != 0.0) s += q.mant * std::exp(q.lsc - top);
  return top + std::log(s);
}

struct Split {
  std::vector<ScaledSum> below;
  std::vector<ScaledSum> above;
};

// For each query q_i, the sums of w_j exp(lw_j - |q_i - src_j| / eps) over
// sources below q_i and over the remaining ones. A source equal to the query
// counts as below when ties_below is set. Both inputs are sorted ascending; an
// empty w means unit weights.
void sweep(std::span<const double> src, std::span<const double> lw, std::span<const double> w,
           std::span<const double> q, double inv_eps, bool ties_below, Split& out) {
  const std::size_t ns = src.size(), nq = q.size();
  out.below.resize(nq);
  out.above.resize(nq);
  auto is_below = [&](double s, double at) { return ties_below ? s <= at : s < at; };
  auto weight = [&](std::size_t j) { return w.empty() ? 1.0 : w[j]; };

  ScaledSum acc;
  std::size_t j = 0;
  for (std::size_t i = 0; i < nq; ++i) {
    for (; j < ns && is_below(src[j], q[i]); ++j) acc.add(weight(j), lw[j] + src[j] * inv_eps);
    out.below[i] = {acc.mant, acc.lsc - q[i] * inv_eps};
  }
  acc = {};
  j = ns;
  for (std::size_t i = nq; i-- > 0;) {
    for (; j > 0 && !is_below(src[j - 1], q[i]); --j) acc.add(weight(j - 1), lw[j - 1] - src[j - 1] * inv_eps);
    out.above[i] = {acc.mant, acc.lsc + q[i] * inv_eps};
  }
}

// Solver on sorted, shifted supports x (rows) and y (columns).
class Solver {
 public:
  Solver(std::vector<double> x, std::vector<double> y, double eps)
      : x_(std::move(x)),
        y_(std::move(y)),
        inv_eps_(1.0 / eps),
        la_(-std::log(static_cast<double>(x_.size()))),
        lb_(-std::log(static_cast<double>(y_.size()))) {}

  void update_alpha(const std::vector<double>& beta, std::vector<double>& alpha) {
    sweep(y_, beta, {}, x_, inv_eps_, true, rows_);
    alpha.resize(x_.size());
    for (std::size_t i = 0; i < x_.size(); ++i) alpha[i] = la_ - log_sum(rows_.below[i], rows_.above[i]);
  }

  void update_beta(const std::vector<double>& alpha, std::vector<double>& beta) {
    sweep(x_, alpha, {}, y_, inv_eps_, false, cols_);
    beta.resize(y_.size());
    for (std::size_t j = 0; j < y_.size(); ++j) beta[j] = lb_ - log_sum(cols_.below[j], cols_.above[j]);
  }

  SinkhornResult run(const SinkhornConfig& cfg, bool with_gradient) {
    const std::size_t n = x_.size(), m = y_.size();
    std::vector<double> alpha, beta(m, lb_), next;
    update_alpha(beta, alpha);

    SinkhornResult res;
    for (int k = 1; k <= cfg.max_iters; ++k) {
      update_beta(alpha, beta);
      if (with_gradient) {
        hist_alpha_.push_back(alpha);
        hist_beta_.push_back(beta);
      }
      update_alpha(beta, next);
      double violation = 0.0;
      for (std::size_t i = 0; i < n; ++i) violation += std::abs(std::exp(alpha[i] - next[i]) - 1.0);
      violation /= static_cast<double>(n);
      if (!std::isfinite(violation)) throw NumericError("sinkhorn iterations produced non-finite potentials");
      res.iterations = k;
      res.marginal_error = violation;
      if (cfg.convergence_tol > 0.0 && violation < cfg.convergence_tol) {
        res.converged = true;
        break;
      }
      if (k < cfg.max_iters) alpha.swap(next);
    }

    // Final transport cost, split per row into mass left and right of x_i.
    sweep(y_, beta, {}, x_, inv_eps_, true, rows_);
    sweep(y_, beta, y_, x_, inv_eps_, true, rows_w_);
    std::vector<double> abar(n), gx(n, 0.0), gy(m, 0.0), bbar(m);
    for (std::size_t i = 0; i < n; ++i) {
      const double pb = rows_.below[i].times_exp(alpha[i]), pa = rows_.above[i].times_exp(alpha[i]);
      const double pby = rows_w_.below[i].times_exp(alpha[i]), pay = rows_w_.above[i].times_exp(alpha[i]);
      const double lower = x_[i] * pb - pby;
      const double upper = pay - x_[i] * pa;
      res.value += lower + upper;
      abar[i] = lower + upper;
      gx[i] = (pb - pa) - (lower - upper) * inv_eps_;
    }
    if (!std::isfinite(res.value)) throw NumericError("sinkhorn produced a non-finite cost");
    if (!with_gradient) return res;

    sweep(x_, alpha, {}, y_, inv_eps_, false, cols_);
    sweep(x_, alpha, x_, y_, inv_eps_, false, cols_w_);
    for (std::size_t j = 0; j < m; ++j) {
      const double qb = cols_.below[j].times_exp(beta[j]), qa = cols_.above[j].times_exp(beta[j]);
      const double qbx = cols_w_.below[j].times_exp(beta[j]), qax = cols_w_.above[j].times_exp(beta[j]);
      const double lower = y_[j] * qb - qbx;  // x_i < y_j
      const double upper = qax - y_[j] * qa;  // x_i >= y_j
      gy[j] = -((qa - qb) - (upper - lower) * inv_eps_);
      bbar[j] = lower + upper;
    }

    const std::vector<double> beta0(m, lb_);
    std::vector<double> lw_a(n), lw_b(m), next_bbar(m);
    for (std::size_t k = hist_alpha_.size(); k-- > 0;) {
      const auto& A = hist_alpha_[k];
      const auto& B = hist_beta_[k];
      const auto& B_prev = k > 0 ? hist_beta_[k - 1] : beta0;

      // beta = lb - LSE_i(alpha_i - D_ij)
      for (std::size_t j = 0; j < m; ++j) lw_b[j] = B[j] - lb_;
      sweep(y_, lw_b, bbar, x_, inv_eps_, true, rows_);
      for (std::size_t i = 0; i < n; ++i) {
        const double rb = rows_.below[i].times_exp(A[i]), ra = rows_.above[i].times_exp(A[i]);
        abar[i] -= rb + ra;
        gx[i] += (rb - ra) * inv_eps_;
      }
      sweep(x_, A, {}, y_, inv_eps_, false, cols_);
      for (std::size_t j = 0; j < m; ++j) {
        const double cb = cols_.below[j].times_exp(lw_b[j]), ca = cols_.above[j].times_exp(lw_b[j]);
        gy[j] -= bbar[j] * (ca - cb) * inv_eps_;
      }

      // alpha = la - LSE_j(beta_prev_j - D_ij)
      for (std::size_t i = 0; i < n; ++i) lw_a[i] = A[i] - la_;
      sweep(x_, lw_a, abar, y_, inv_eps_, false, cols_);
      for (std::size_t j = 0; j < m; ++j) {
        const double cb = cols_.below[j].times_exp(B_prev[j]), ca = cols_.above[j].times_exp(B_prev[j]);
        next_bbar[j] = -(cb + ca);
        gy[j] -= (ca - cb) * inv_eps_;
      }
      sweep(y_, B_prev, {}, x_, inv_eps_, true, rows_);
      for (std::size_t i = 0; i < n; ++i) {
        const double rb = rows_.below[i].times_exp(lw_a[i]), ra = rows_.above[i].times_exp(lw_a[i]);
        gx[i] += abar[i] * (rb - ra) * inv_eps_;
      }
      bbar.swap(next_bbar);
      std::fill(abar.begin(), abar.end(), 0.0);
    }
    res.grad_a = std::move(gx);
    res.grad_b = std::move(gy);
    return res;
  }

 private:
  std::vector<double> x_, y_;
  double inv_eps_, la_, lb_;
  Split rows_, rows_w_, cols_, cols_w_;
  std::vector<std::vector<double>> hist_alpha_, hist_beta_;
};

struct Sorted {
  std::vector<double> values;
  std::vector<std::size_t> index;  // original position of values[k]
};

Sorted sorted_copy(std::span<const double> v) {
  Sorted s;
  s.index.resize(v.size());
  std::iota(s.index.begin(), s.index.end(), std::size_t{0});
  std::stable_sort(s.index.begin(), s.index.end(), [&](std::size_t p, std::size_t q) { return v[p] < v[q]; });
  s.values.reserve(v.size());
  for (std::size_t k : s.index) s.values.push_back(v[k]);
  return s;
}

}  // namespace

SinkhornResult sinkhorn(std::span<const double> a, std::span<const double> b, const SinkhornConfig& cfg,
                        bool with_gradient) {
  cfg.validate();
  if (a.empty() || b.empty()) throw ShapeError("sinkhorn: both samples must be non-empty");
  auto finite = [](double v) { return std::isfinite(v); };
  if (!std::all_of(a.begin(), a.end(), finite) || !std::all_of(b.begin(), b.end(), finite)) {
    throw NumericError("sinkhorn: non-finite input");
  }

  Sorted sa = sorted_copy(a), sb = sorted_copy(b);
  // Fix a canonical argument order so the iteration, and hence the result, is
  // exactly the same for (a, b) and (b, a).
  const bool swapped =
      sa.values.size() > sb.values.size() ||
      (sa.values.size() == sb.values.size() &&
       std::lexicographical_compare(sb.values.begin(), sb.values.end(), sa.values.begin(), sa.values.end()));
  Sorted& first = swapped ? sb : sa;
  Sorted& second = swapped ? sa : sb;

  const double origin = std::min(first.values.front(), second.values.front());
  for (double& v : first.values) v -= origin;
  for (double& v : second.values) v -= origin;

  Solver solver(first.values, second.values, cfg.epsilon);
  SinkhornResult res = solver.run(cfg, with_gradient);
  if (!with_gradient) return res;

  std::vector<double> g_first(first.index.size()), g_second(second.index.size());
  for (std::size_t k = 0; k < first.index.size(); ++k) g_first[first.index[k]] = res.grad_a[k];
  for (std::size_t k = 0; k < second.index.size(); ++k) g_second[second.index[k]] = res.grad_b[k];
  res.grad_a = swapped ? std::move(g_second) : std::move(g_first);
  res.grad_b = swapped ? std::move(g_first) : std::move(g_second);
  return res;
}

nn::Var sinkhorn_distance(nn::Tape& tape, nn::Var a, nn::Var b, const SinkhornConfig& cfg, SinkhornResult* info) {
  const nn::Matrix& va = tape.value(a);
  const nn::Matrix& vb = tape.value(b);
  const bool want_grad = tape.requires_grad(a) || tape.requires_grad(b);
  SinkhornResult res = sinkhorn(std::span<const double>(va.data(), static_cast<std::size_t>(va.size())),
                                std::span<const double>(vb.data(), static_cast<std::size_t>(vb.size())), cfg,
                                want_grad);
  nn::Matrix ga, gb;
  if (want_grad) {
    ga = Eigen::Map<const nn::Matrix>(res.grad_a.data(), va.rows(), va.cols());
    gb = Eigen::Map<const nn::Matrix>(res.grad_b.data(), vb.rows(), vb.cols());
  }
  const double value = res.value;
  if (info) *info = std::move(res);
  return tape.custom({a, b}, nn::Matrix::Constant(1, 1, value),
                     [a, b, ga = std::move(ga), gb = std::move(gb)](nn::Tape& t, const nn::Matrix& up) {
                       t.accumulate(a, ga * up(0, 0));
                       t.accumulate(b, gb * up(0, 0));
                     });
}

}  // namespace fairppm::transport
