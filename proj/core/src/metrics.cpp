#include "sifr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sifr/error.hpp"

namespace sifr {

namespace {

double dcg(const std::vector<int>& grades, int k) {
  double sum = 0.0;
  const int n = std::min<int>(k, static_cast<int>(grades.size()));
  for (int i = 0; i < n; ++i)
    sum += (std::exp2(grades[i]) - 1.0) / std::log2(static_cast<double>(i) + 2.0);
  return sum;
}

}  // namespace

double ndcg_at_k(const std::vector<int>& ranked_grades,
                 const std::vector<int>& ideal_grades, int k) {
  if (k < 1) throw Error("ndcg_at_k: k must be >= 1");
  std::vector<int> ideal = ideal_grades;
  std::sort(ideal.begin(), ideal.end(), std::greater<int>());
  double idcg = dcg(ideal, k);
  if (idcg <= 0.0) return -1.0;
  return dcg(ranked_grades, k) / idcg;
}

double err_at_k(const std::vector<int>& ranked_grades, int k, int g_max) {
  if (k < 1) throw Error("err_at_k: k must be >= 1");
  double err = 0.0;
  double not_stopped = 1.0;
  const int n = std::min<int>(k, static_cast<int>(ranked_grades.size()));
  const double denom = std::exp2(g_max);
  for (int i = 0; i < n; ++i) {
    double r = (std::exp2(ranked_grades[i]) - 1.0) / denom;
    err += not_stopped * r / static_cast<double>(i + 1);
    not_stopped *= (1.0 - r);
  }
  return err;
}

double reciprocal_rank(const std::vector<int>& ranked_grades) {
  for (std::size_t i = 0; i < ranked_grades.size(); ++i)
    if (ranked_grades[i] > 0) return 1.0 / static_cast<double>(i + 1);
  return 0.0;
}

double propensity_mae(const std::vector<double>& learned,
                      const std::vector<double>& oracle) {
  if (learned.empty() || learned.size() != oracle.size())
    throw Error("propensity_mae: empty or mismatched evaluation grid");
  double sum = 0.0;
  for (std::size_t i = 0; i < learned.size(); ++i) sum += std::abs(learned[i] - oracle[i]);
  return sum / static_cast<double>(learned.size());
}

MetricReport evaluate_ranking(const std::vector<QueryGroup>& groups, const ScoreFn& score,
                              const std::vector<int>& cutoffs, int g_max) {
  MetricReport rep;
  for (int k : cutoffs) {
    rep.ndcg_at[k] = 0.0;
    rep.err_at[k] = 0.0;
  }
  double mrr_sum = 0.0;
  for (const auto& g : groups) {
    std::vector<std::size_t> order(g.docs.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> s(g.docs.size());
    for (std::size_t i = 0; i < g.docs.size(); ++i) s[i] = score(g.docs[i]);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
    std::vector<int> ranked, ideal;
    ranked.reserve(g.docs.size());
    ideal.reserve(g.docs.size());
    for (std::size_t i : order) ranked.push_back(g.docs[i].relevance);
    for (const auto& d : g.docs) ideal.push_back(d.relevance);

    bool any_relevant = std::any_of(ideal.begin(), ideal.end(), [](int x) { return x > 0; });
    if (!any_relevant) {
      ++rep.n_skipped;
      continue;
    }
    ++rep.n_queries;
    for (int k : cutoffs) {
      rep.ndcg_at[k] += ndcg_at_k(ranked, ideal, k);
      rep.err_at[k] += err_at_k(ranked, k, g_max);
    }
    mrr_sum += reciprocal_rank(ranked);
  }
  if (rep.n_queries > 0) {
    for (auto& [k, v] : rep.ndcg_at) v /= static_cast<double>(rep.n_queries);
    for (auto& [k, v] : rep.err_at) v /= static_cast<double>(rep.n_queries);
    rep.mrr = mrr_sum / static_cast<double>(rep.n_queries);
  }
  return rep;
}

}  // namespace sifr
