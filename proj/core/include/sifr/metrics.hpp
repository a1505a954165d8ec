#pragma once

#include <functional>
#include <map>
#include <vector>

#include "sifr/dataset.hpp"

namespace sifr {

struct MetricReport {
  std::map<int, double> ndcg_at;
  std::map<int, double> err_at;
  double mrr = 0.0;
  std::size_t n_queries = 0;
  // Queries skipped because every grade was zero (no ideal DCG / no
  // relevant document); excluded from the averages, not scored 0.
  std::size_t n_skipped = 0;
};

// NDCG@k with gain 2^g - 1 and discount log2(i + 1). `ideal_grades` is the
// multiset of grades used to build the ideal ordering. Returns -1 when the
// ideal DCG is zero (callers exclude such queries from averages).
double ndcg_at_k(const std::vector<int>& ranked_grades,
                 const std::vector<int>& ideal_grades, int k);

// ERR@k with stop probability R_i = (2^g - 1) / 2^g_max.
double err_at_k(const std::vector<int>& ranked_grades, int k, int g_max);

// Reciprocal rank of the first document with grade > 0; 0 when none.
double reciprocal_rank(const std::vector<int>& ranked_grades);

// Mean |learned - oracle| over an evaluation grid.
double propensity_mae(const std::vector<double>& learned,
                      const std::vector<double>& oracle);

using ScoreFn = std::function<double(const Document&)>;

// Ranks every group by `score` (descending, stable) and averages the ranking
// metrics at the requested cutoffs over queries with nonzero ideal DCG.
MetricReport evaluate_ranking(const std::vector<QueryGroup>& groups, const ScoreFn& score,
                              const std::vector<int>& cutoffs, int g_max);

}  // namespace sifr
