#include "sifr/estimators.hpp"

#include <algorithm>
#include <cmath>

#include "sifr/error.hpp"

namespace sifr {

namespace {

// Chunked accumulation with a fixed pairwise order, so parallel callers can
// reproduce the exact same sum.
constexpr std::size_t kChunk = 4096;

double chunked_sum(const std::vector<double>& v) {
  double total = 0.0;
  for (std::size_t base = 0; base < v.size(); base += kChunk) {
    double part = 0.0;
    std::size_t end = std::min(v.size(), base + kChunk);
    for (std::size_t i = base; i < end; ++i) part += v[i];
    total += part;
  }
  return total;
}

// Examination indicator per impression for one session.
std::vector<double> exposure_indicators(const Session& s, bool oracle, bool log_is_oracle) {
  std::vector<double> ind(s.impressions.size(), 0.0);
  if (oracle) {
    if (!log_is_oracle)
      throw Error("ips_risk: oracle exposure requested but the log hides latents");
    for (std::size_t i = 0; i < s.impressions.size(); ++i)
      ind[i] = s.impressions[i].exposure ? 1.0 : 0.0;
    return ind;
  }
  int deepest_click = 0;
  for (const auto& imp : s.impressions)
    if (imp.click) deepest_click = std::max(deepest_click, imp.position);
  for (std::size_t i = 0; i < s.impressions.size(); ++i)
    ind[i] = (s.impressions[i].click || s.impressions[i].position <= deepest_click) ? 1.0 : 0.0;
  return ind;
}

const Document& doc_of(const Dataset& data, const Session& s, const Impression& imp) {
  return data.groups[s.group_index].docs[imp.doc_index];
}

struct WeightedTerms {
  std::vector<double> weights;   // E / ê per impression
  std::vector<double> weighted;  // weight * loss
  std::vector<double> losses;
  std::size_t floored = 0;
};

WeightedTerms collect_terms(const Dataset& data, const ClickLog& log, const PropensityFn& prop,
                            const LossFn& loss, const EstimatorOptions& opts) {
  WeightedTerms t;
  t.weights.reserve(log.total_impressions());
  t.weighted.reserve(log.total_impressions());
  t.losses.reserve(log.total_impressions());
  for (const auto& s : log.sessions) {
    auto ind = exposure_indicators(s, opts.oracle_exposure, log.oracle);
    for (std::size_t i = 0; i < s.impressions.size(); ++i) {
      const auto& imp = s.impressions[i];
      const auto& doc = doc_of(data, s, imp);
      double e_hat = prop(imp, doc);
      if (e_hat < opts.propensity_floor) {
        e_hat = opts.propensity_floor;
        ++t.floored;
      }
      double w = ind[i] / e_hat;
      double l = loss(imp, doc);
      t.weights.push_back(w);
      t.losses.push_back(l);
      t.weighted.push_back(w * l);
    }
  }
  return t;
}

}  // namespace

double effective_sample_size(std::span<const double> weights) {
  if (weights.empty()) throw Error("effective_sample_size: empty weights");
  double sum = 0.0, sum_sq = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw Error("effective_sample_size: negative weight");
    sum += w;
    sum_sq += w * w;
  }
  if (sum_sq <= 0.0) throw Error("effective_sample_size: all-zero weights");
  return sum * sum / sum_sq;
}

RiskEstimate naive_risk(const Dataset& data, const ClickLog& log, const LossFn& loss) {
  if (log.sessions.empty()) throw Error("naive_risk: empty log");
  RiskEstimate est;
  std::vector<double> losses;
  losses.reserve(log.total_impressions());
  for (const auto& s : log.sessions)
    for (const auto& imp : s.impressions) losses.push_back(loss(imp, doc_of(data, s, imp)));
  if (losses.empty()) throw Error("naive_risk: empty log");
  est.n = losses.size();
  est.value = chunked_sum(losses) / static_cast<double>(est.n);
  est.weights.assign(est.n, 1.0);
  est.ess = static_cast<double>(est.n);
  return est;
}

RiskEstimate ips_risk(const Dataset& data, const ClickLog& log, const PropensityFn& prop,
                      const LossFn& loss, const EstimatorOptions& opts) {
  if (log.sessions.empty()) throw Error("ips_risk: empty log");
  auto t = collect_terms(data, log, prop, loss, opts);
  RiskEstimate est;
  est.n = t.weighted.size();
  est.value = chunked_sum(t.weighted) / static_cast<double>(est.n);
  est.weights = std::move(t.weights);
  est.floored = t.floored;
  double sum_sq = 0.0, sum = 0.0;
  for (double w : est.weights) {
    sum += w;
    sum_sq += w * w;
  }
  est.ess = sum_sq > 0.0 ? sum * sum / sum_sq : 0.0;
  return est;
}

RiskEstimate snips_risk(const Dataset& data, const ClickLog& log, const PropensityFn& prop,
                        const LossFn& loss, const EstimatorOptions& opts) {
  if (log.sessions.empty()) throw Error("snips_risk: empty log");
  auto t = collect_terms(data, log, prop, loss, opts);
  double wsum = chunked_sum(t.weights);
  if (wsum <= 0.0) throw Error("snips_risk: all weights are zero");
  RiskEstimate est;
  est.n = t.weighted.size();
  est.value = chunked_sum(t.weighted) / wsum;
  est.weights = std::move(t.weights);
  est.floored = t.floored;
  double sum_sq = 0.0;
  for (double w : est.weights) sum_sq += w * w;
  est.ess = wsum * wsum / sum_sq;
  return est;
}

RiskEstimate dr_risk(const Dataset& data, const ClickLog& log, const PropensityFn& prop,
                     const OutcomeFn& outcome, const LossFn& loss,
                     const EstimatorOptions& opts) {
  if (log.sessions.empty()) throw Error("dr_risk: empty log");
  RiskEstimate est;
  std::vector<double> terms;
  std::vector<double> weights;
  terms.reserve(log.total_impressions());
  weights.reserve(log.total_impressions());
  for (const auto& s : log.sessions) {
    auto ind = exposure_indicators(s, opts.oracle_exposure, log.oracle);
    for (std::size_t i = 0; i < s.impressions.size(); ++i) {
      const auto& imp = s.impressions[i];
      const auto& doc = doc_of(data, s, imp);
      double e_hat = prop(imp, doc);
      if (e_hat < opts.propensity_floor) {
        e_hat = opts.propensity_floor;
        ++est.floored;
      }
      double w = ind[i] / e_hat;
      double m = outcome(imp, doc);
      terms.push_back(m + w * (loss(imp, doc) - m));
      weights.push_back(w);
    }
  }
  est.n = terms.size();
  est.value = chunked_sum(terms) / static_cast<double>(est.n);
  est.weights = std::move(weights);
  double sum_sq = 0.0, sum = 0.0;
  for (double w : est.weights) {
    sum += w;
    sum_sq += w * w;
  }
  est.ess = sum_sq > 0.0 ? sum * sum / sum_sq : 0.0;
  return est;
}

double ClickCrossEntropy::operator()(const Impression& imp, const Document& doc) const {
  double p = 1.0 / (1.0 + std::exp(-score(doc)));
  p = std::clamp(p, 1e-6, 1.0 - 1e-6);
  return imp.click ? -std::log(p) : -std::log(1.0 - p);
}

double ClickCrossEntropy::l_max() { return -std::log(1e-6); }

PropensityFn oracle_propensity() {
  return [](const Impression& imp, const Document&) { return imp.oracle_propensity; };
}

PropensityFn position_propensity(std::vector<double> per_position) {
  return [v = std::move(per_position)](const Impression& imp, const Document&) {
    if (v.empty()) return 1.0;
    std::size_t idx = std::min<std::size_t>(imp.position - 1, v.size() - 1);
    return v[idx];
  };
}

}  // namespace sifr
