#include "sifr/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "sifr/error.hpp"
#include "sifr/metrics.hpp"

namespace sifr {

namespace {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

inline double softplus(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

struct FlatImpression {
  std::size_t session = 0;
  const Impression* imp = nullptr;
  const Document* doc = nullptr;
  double gmean = 0.0;
};

struct SessionSpan {
  std::size_t begin = 0, end = 0;
  bool usable_pairwise = false;  // at least one click and one non-click
};

double mean_g(const Document& doc, const std::vector<int>& g_indices) {
  if (g_indices.empty()) return 0.0;
  double acc = 0.0;
  int used = 0;
  for (int gi : g_indices) {
    if (gi >= 0 && gi < static_cast<int>(doc.features.size())) {
      acc += doc.features[gi];
      ++used;
    }
  }
  return used > 0 ? acc / used : 0.0;
}

}  // namespace

double dual_update(double lambda, double mi_smoothed, double eps, double eta_lambda) {
  if (!std::isfinite(lambda) || !std::isfinite(mi_smoothed))
    throw Error("dual_update: non-finite input");
  if (lambda < 0.0) throw Error("dual_update: lambda must be non-negative");
  return std::max(0.0, lambda + eta_lambda * (mi_smoothed - eps));
}

double pairwise_session_loss(std::span<const double> scores, std::span<const uint8_t> clicks,
                             std::span<const double> inv_propensity,
                             std::span<double> d_scores) {
  const std::size_t n = scores.size();
  std::size_t n_pairs = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!clicks[i]) continue;
    for (std::size_t j = 0; j < n; ++j)
      if (!clicks[j]) ++n_pairs;
  }
  if (n_pairs == 0) return 0.0;
  const double inv_pairs = 1.0 / static_cast<double>(n_pairs);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!clicks[i]) continue;
    const double w = inv_propensity[i] * inv_pairs;
    for (std::size_t j = 0; j < n; ++j) {
      if (clicks[j]) continue;
      double margin = scores[j] - scores[i];
      loss += w * softplus(margin);
      double slope = w * sigmoid(margin);
      d_scores[j] += slope;
      d_scores[i] -= slope;
    }
  }
  return loss;
}

RegressEmFit regress_em_fit(const Dataset& data, const ClickLog& log, int n_positions) {
  if (log.sessions.empty()) throw Error("regress_em_propensity: empty log");
  if (n_positions < 1) throw Error("regress_em_propensity: need at least one position");
  if (n_positions == 1) {
    RegressEmFit fit;
    fit.propensities = {1.0};
    fit.relevance_w.assign(data.dim, 0.0);
    return fit;
  }

  struct Row {
    const double* x;
    int k;
    bool click;
  };
  std::vector<Row> rows;
  rows.reserve(log.total_impressions());
  for (const auto& s : log.sessions)
    for (const auto& imp : s.impressions) {
      const auto& doc = data.groups[s.group_index].docs[imp.doc_index];
      rows.push_back({doc.features.data(),
                      std::min(imp.position, n_positions), imp.click != 0});
    }
  const int dim = data.dim;

  std::vector<double> theta(n_positions);
  for (int k = 0; k < n_positions; ++k) theta[k] = std::max(0.1, 1.0 / (k + 1));
  std::vector<double> w(dim, 0.0);
  double b = -1.0;

  std::vector<double> post_e(rows.size()), post_r(rows.size());
  int used_iterations = 0;
  for (int iter = 0; iter < 50; ++iter) {
    used_iterations = iter + 1;
    // E-step
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const Row& r = rows[i];
      if (r.click) {
        post_e[i] = 1.0;
        post_r[i] = 1.0;
        continue;
      }
      double z = b;
      for (int j = 0; j < dim; ++j) z += w[j] * r.x[j];
      double gamma = sigmoid(z);
      double th = theta[r.k - 1];
      double denom = std::max(1e-12, 1.0 - th * gamma);
      post_e[i] = th * (1.0 - gamma) / denom;
      post_r[i] = gamma * (1.0 - th) / denom;
    }
    // M-step: per-position examination frequencies.
    std::vector<double> sum(n_positions, 0.0), cnt(n_positions, 0.0);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      sum[rows[i].k - 1] += post_e[i];
      cnt[rows[i].k - 1] += 1.0;
    }
    double max_delta = 0.0;
    for (int k = 0; k < n_positions; ++k) {
      if (cnt[k] <= 0.0) continue;
      double next = std::clamp(sum[k] / cnt[k], 1e-4, 1.0);
      max_delta = std::max(max_delta, std::abs(next - theta[k]));
      theta[k] = next;
    }
    // M-step: a few full-batch logistic steps on the relevance posteriors.
    for (int inner = 0; inner < 8; ++inner) {
      std::vector<double> gw(dim, 0.0);
      double gb = 0.0;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const Row& r = rows[i];
        double z = b;
        for (int j = 0; j < dim; ++j) z += w[j] * r.x[j];
        double err = sigmoid(z) - post_r[i];
        for (int j = 0; j < dim; ++j) gw[j] += err * r.x[j];
        gb += err;
      }
      double inv_n = 1.0 / static_cast<double>(rows.size());
      for (int j = 0; j < dim; ++j) w[j] -= 0.5 * gw[j] * inv_n;
      b -= 0.5 * gb * inv_n;
    }
    if (max_delta < 1e-4 && iter > 0) break;
  }
  double anchor = theta[0] > 0 ? theta[0] : 1.0;
  for (auto& t : theta) t = std::clamp(t / anchor, 0.0, 1.0);
  theta[0] = 1.0;

  RegressEmFit fit;
  fit.propensities = std::move(theta);
  fit.relevance_w = std::move(w);
  fit.relevance_b = b;
  fit.iterations = used_iterations;
  return fit;
}

std::vector<double> regress_em_propensity(const Dataset& data, const ClickLog& log,
                                          int n_positions) {
  return regress_em_fit(data, log, n_positions).propensities;
}

namespace {

struct TrainerState {
  std::vector<FlatImpression> flat;
  std::vector<SessionSpan> spans;
  std::vector<std::size_t> usable_sessions;
  std::size_t cursor = 0;
  std::vector<std::size_t> order;
};

double validation_ndcg10(const std::vector<const QueryGroup*>& groups, const Ranker& ranker,
                         int g_max) {
  if (groups.empty()) return 0.0;
  double acc = 0.0;
  std::size_t used = 0;
  for (const auto* g : groups) {
    std::vector<std::size_t> order(g->docs.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> s(g->docs.size());
    for (std::size_t i = 0; i < g->docs.size(); ++i) s[i] = ranker.score(g->docs[i].features);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
    std::vector<int> ranked, ideal;
    for (std::size_t i : order) ranked.push_back(g->docs[i].relevance);
    for (const auto& d : g->docs) ideal.push_back(d.relevance);
    double v = ndcg_at_k(ranked, ideal, 10);
    if (v >= 0.0) {
      acc += v;
      ++used;
    }
  }
  (void)g_max;
  return used > 0 ? acc / static_cast<double>(used) : 0.0;
}

}  // namespace

TrainResult train(const TrainInputs& in, const TrainConfig& cfg) {
  if (!in.data || !in.log) throw Error("train: missing dataset or click log");
  if (cfg.iterations < 0) throw Error("train: negative iteration count");
  if (cfg.batch_size < 1) throw Error("train: batch size must be positive");
  const Dataset& data = *in.data;
  const ClickLog& log = *in.log;

  std::vector<int> g_indices = in.g_indices;
  if (g_indices.empty())
    for (int j = 0; j < std::min(5, data.dim); ++j) g_indices.push_back(j);

  TrainerState st;
  st.flat.reserve(log.total_impressions());
  st.spans.reserve(log.sessions.size());
  for (std::size_t s = 0; s < log.sessions.size(); ++s) {
    SessionSpan span;
    span.begin = st.flat.size();
    bool any_click = false, any_skip = false;
    for (const auto& imp : log.sessions[s].impressions) {
      const auto& doc = data.groups[log.sessions[s].group_index].docs[imp.doc_index];
      st.flat.push_back({s, &imp, &doc, mean_g(doc, g_indices)});
      (imp.click ? any_click : any_skip) = true;
    }
    span.end = st.flat.size();
    span.usable_pairwise = any_click && any_skip;
    st.spans.push_back(span);
  }
  TrainTrace trace;
  for (std::size_t s = 0; s < st.spans.size(); ++s) {
    if (st.spans[s].usable_pairwise)
      st.usable_sessions.push_back(s);
    else
      ++trace.skipped_sessions;
  }
  if (st.usable_sessions.empty() && cfg.iterations > 0 && !cfg.dr_loss &&
      cfg.objective != Objective::Dr)
    throw Error("train: no session has both clicks and non-clicks");

  Rng init_rng = Rng::substream(cfg.seed, 0xA11CE);
  Rng shuffle_rng = Rng::substream(cfg.seed, 0x5AFF1E);

  Ranker ranker = cfg.ranker_kind == Ranker::Kind::Linear
                      ? Ranker::linear(data.dim)
                      : Ranker::mlp1(data.dim, cfg.hidden_dim, init_rng);
  PropensityModel heads(std::max(1, log.n_positions));

  double lambda_e = cfg.lambda_init_exposure;
  double lambda_d = cfg.lambda_init_decision;
  double smooth_e = 0.0, smooth_d = 0.0;
  bool smooth_started = false;

  // Outcome model for the DR loss: per-position mean loss, refreshed each
  // trace window, held constant in between.
  std::vector<double> outcome(std::max(1, log.n_positions), -std::log(0.5));
  std::vector<double> outcome_sum(outcome.size(), 0.0), outcome_cnt(outcome.size(), 0.0);

  st.order = st.usable_sessions.empty() ? std::vector<std::size_t>{} : st.usable_sessions;
  if (cfg.objective == Objective::Dr || cfg.dr_loss) {
    // The pointwise DR loss uses every session.
    st.order.resize(st.spans.size());
    std::iota(st.order.begin(), st.order.end(), 0);
  }
  if (!st.order.empty()) shuffle_rng.shuffle(st.order);

  const int p1_end = static_cast<int>(cfg.phase1_frac * cfg.iterations);
  const int p2_end = static_cast<int>(cfg.phase2_frac * cfg.iterations);
  const bool is_sif = cfg.objective == Objective::Sif;
  const double l_max = ClickCrossEntropy::l_max();

  std::vector<double> grad(ranker.params.size());
  double last_loss = 0.0;

  for (int step = 0; step < cfg.iterations; ++step) {
    const int phase = step < p1_end ? 1 : (step < p2_end ? 2 : 3);
    // Draw the batch of sessions.
    std::vector<std::size_t> batch;
    batch.reserve(cfg.batch_size);
    if (!st.order.empty()) {
      for (int b = 0; b < cfg.batch_size; ++b) {
        if (st.cursor >= st.order.size()) {
          shuffle_rng.shuffle(st.order);
          st.cursor = 0;
        }
        batch.push_back(st.order[st.cursor++]);
      }
    }

    // Gather the batch impressions and score them.
    std::vector<std::size_t> idx;  // indices into st.flat
    for (std::size_t s : batch)
      for (std::size_t i = st.spans[s].begin; i < st.spans[s].end; ++i) idx.push_back(i);
    const std::size_t nb = idx.size();
    std::vector<double> scores(nb);
    for (std::size_t t = 0; t < nb; ++t)
      scores[t] = ranker.score(st.flat[idx[t]].doc->features);

    // Leakage samples share the batch layout. The score feeding the heads is
    // the current ranker score: the penalty is a function of theta.
    std::vector<LeakageSample> samples(nb);
    {
      std::size_t t = 0;
      for (std::size_t s : batch) {
        std::size_t lo = t, hi = t + (st.spans[s].end - st.spans[s].begin);
        // top-3 current scores within the session
        std::array<double, 3> top{0.0, 0.0, 0.0};
        std::vector<std::size_t> local(hi - lo);
        std::iota(local.begin(), local.end(), lo);
        std::stable_sort(local.begin(), local.end(),
                         [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
        for (std::size_t r = 0; r < 3 && r < local.size(); ++r) top[r] = scores[local[r]];
        for (std::size_t u = lo; u < hi; ++u) {
          const auto& f = st.flat[idx[u]];
          samples[u].position = f.imp->position;
          samples[u].score = scores[u];
          samples[u].gmean = f.gmean;
          samples[u].rank_top = top;
        }
        t = hi;
      }
    }

    // Inverse propensities per impression.
    std::vector<double> inv_prop(nb, 1.0);
    for (std::size_t t = 0; t < nb; ++t) {
      const auto& f = st.flat[idx[t]];
      double e_hat = 1.0;
      switch (cfg.weight_source) {
        case WeightSource::None: e_hat = 1.0; break;
        case WeightSource::Oracle: e_hat = f.imp->oracle_propensity; break;
        case WeightSource::RegressEm: {
          if (in.regress_em.empty()) throw Error("train: regress_em weights missing");
          std::size_t k = std::min<std::size_t>(f.imp->position - 1, in.regress_em.size() - 1);
          e_hat = in.regress_em[k];
          break;
        }
        case WeightSource::LearnedHead: e_hat = heads.exposure_cond(samples[t]); break;
      }
      inv_prop[t] = 1.0 / std::max(e_hat, cfg.propensity_floor);
    }
    if (cfg.objective == Objective::Snips) {
      double wsum = 0.0;
      std::size_t cnt = 0;
      for (std::size_t t = 0; t < nb; ++t)
        if (st.flat[idx[t]].imp->click) {
          wsum += inv_prop[t];
          ++cnt;
        }
      if (wsum > 0.0) {
        double scale = static_cast<double>(cnt) / wsum;
        for (auto& w : inv_prop) w *= scale;
      }
    }

    // Ranking loss and gradient w.r.t. scores.
    std::vector<double> d_scores(nb, 0.0);
    double rank_loss = 0.0;
    if (cfg.objective == Objective::Dr || cfg.dr_loss) {
      // Pointwise doubly robust: m(k) + ind/e (L - m(k)).
      std::size_t t0 = 0;
      for (std::size_t s : batch) {
        std::size_t count = st.spans[s].end - st.spans[s].begin;
        int deepest = 0;
        for (std::size_t u = t0; u < t0 + count; ++u)
          if (st.flat[idx[u]].imp->click)
            deepest = std::max(deepest, st.flat[idx[u]].imp->position);
        for (std::size_t u = t0; u < t0 + count; ++u) {
          const auto& f = st.flat[idx[u]];
          double ind = (f.imp->click || f.imp->position <= deepest) ? 1.0 : 0.0;
          double p = std::clamp(sigmoid(scores[u]), 1e-6, 1.0 - 1e-6);
          double l = f.imp->click ? -std::log(p) : -std::log(1.0 - p);
          std::size_t k = std::min<std::size_t>(f.imp->position - 1, outcome.size() - 1);
          rank_loss += outcome[k] + inv_prop[u] * ind * (l - outcome[k]);
          double dl = (p - (f.imp->click ? 1.0 : 0.0));
          d_scores[u] += inv_prop[u] * ind * dl / static_cast<double>(nb);
          outcome_sum[k] += ind * l;
          outcome_cnt[k] += ind;
        }
        t0 += count;
      }
      rank_loss /= static_cast<double>(std::max<std::size_t>(1, nb));
    } else {
      std::size_t t0 = 0;
      std::size_t used_sessions = 0;
      for (std::size_t s : batch) {
        std::size_t count = st.spans[s].end - st.spans[s].begin;
        std::vector<uint8_t> clicks(count);
        for (std::size_t u = 0; u < count; ++u) clicks[u] = st.flat[idx[t0 + u]].imp->click;
        double sess = pairwise_session_loss(
            std::span<const double>(scores.data() + t0, count),
            std::span<const uint8_t>(clicks.data(), count),
            std::span<const double>(inv_prop.data() + t0, count),
            std::span<double>(d_scores.data() + t0, count));
        rank_loss += sess;
        ++used_sessions;
        t0 += count;
      }
      if (used_sessions > 0) {
        rank_loss /= static_cast<double>(used_sessions);
        double inv = 1.0 / static_cast<double>(used_sessions);
        for (auto& d : d_scores) d *= inv;
      }
    }

    // MI penalties.
    ChannelLeakage leak_e, leak_d;
    leak_e.channel = Channel::Exposure;
    leak_d.channel = Channel::Decision;
    std::vector<double> head_pen_e, head_pen_d;
    if (nb > 0) {
      auto marg_e = heads.exposure_marginals(samples);
      auto ge = exposure_leakage_grad(samples, heads, marg_e);
      leak_e.mi_raw = ge.raw;
      leak_e.mi_nats = ge.clamped;
      leak_e.n_samples = nb;
      auto marg_d = heads.decision_marginals(samples);
      auto gd = decision_leakage_grad(samples, heads, marg_d);
      leak_d.mi_raw = gd.raw;
      leak_d.mi_nats = gd.clamped;
      leak_d.n_samples = nb;

      if (is_sif && phase >= 2) {
        if (cfg.channel_exposure && ge.raw > 0.0) {
          for (std::size_t t = 0; t < nb; ++t) d_scores[t] += lambda_e * ge.d_score[t];
          head_pen_e = ge.d_params;
          for (auto& v : head_pen_e) v *= lambda_e;
        }
        if (cfg.channel_decision && gd.raw > 0.0) {
          // rank_top gradients flow to the sessions' current top-3 scores.
          std::size_t t0 = 0;
          for (std::size_t s : batch) {
            std::size_t count = st.spans[s].end - st.spans[s].begin;
            std::vector<std::size_t> local(count);
            std::iota(local.begin(), local.end(), t0);
            std::stable_sort(local.begin(), local.end(), [&](std::size_t a, std::size_t b) {
              return scores[a] > scores[b];
            });
            for (std::size_t u = t0; u < t0 + count; ++u)
              for (std::size_t r = 0; r < 3 && r < local.size(); ++r)
                d_scores[local[r]] += lambda_d * gd.d_rank_top[u * 3 + r];
            t0 += count;
          }
          head_pen_d = gd.d_params;
          for (auto& v : head_pen_d) v *= lambda_d;
        }
      }
    }

    double objective_value = rank_loss +
                             (is_sif && phase >= 2
                                  ? (cfg.channel_exposure ? lambda_e * leak_e.mi_nats : 0.0) +
                                        (cfg.channel_decision ? lambda_d * leak_d.mi_nats : 0.0)
                                  : 0.0);
    if (!std::isfinite(objective_value))
      throw Error("train: loss diverged at step " + std::to_string(step));
    last_loss = rank_loss;

    // Ranker update.
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t t = 0; t < nb; ++t)
      if (d_scores[t] != 0.0)
        ranker.accumulate_score_grad(st.flat[idx[t]].doc->features, d_scores[t], grad);
    for (std::size_t p = 0; p < ranker.params.size(); ++p)
      ranker.params[p] -= cfg.lr * grad[p];

    // Propensity step: fit the factored click likelihood e * rel * d by BCE,
    // with the MI penalty and a light L2 on the non-position weights.
    if (nb > 0) {
      auto& we = heads.exposure_params();
      auto& wd = heads.decision_params();
      std::vector<double> ge(we.size(), 0.0), gd(wd.size(), 0.0);
      const std::size_t pe = heads.n_positions();
      for (std::size_t t = 0; t < nb; ++t) {
        const auto& f = st.flat[idx[t]];
        double e = heads.exposure_cond(samples[t]);
        double d = heads.decision_cond(samples[t]);
        double r = std::clamp(sigmoid(scores[t]), 1e-6, 1.0 - 1e-6);
        double q = std::clamp(e * r * d, 1e-9, 1.0 - 1e-9);
        double c = f.imp->click ? 1.0 : 0.0;
        double common = (q - c) / (1.0 - q);
        double dz_e = common * (1.0 - e);
        double dz_d = common * (1.0 - d);
        int k = std::clamp(f.imp->position, 1, static_cast<int>(pe));
        ge[k - 1] += dz_e;
        ge[pe] += dz_e * samples[t].score;
        ge[pe + 1] += dz_e * samples[t].gmean;
        ge[pe + 2] += dz_e;
        gd[k - 1] += dz_d;
        for (int r3 = 0; r3 < 3; ++r3) gd[pe + r3] += dz_d * samples[t].rank_top[r3];
        gd[pe + 3] += dz_d * samples[t].gmean;
        gd[pe + 4] += dz_d;
      }
      double inv_n = 1.0 / static_cast<double>(nb);
      for (auto& v : ge) v *= inv_n;
      for (auto& v : gd) v *= inv_n;
      // L2 on the score and context weights only.
      ge[pe] += cfg.head_l2 * we[pe];
      ge[pe + 1] += cfg.head_l2 * we[pe + 1];
      for (int r3 = 0; r3 < 3; ++r3) gd[pe + r3] += cfg.head_l2 * wd[pe + r3];
      gd[pe + 3] += cfg.head_l2 * wd[pe + 3];
      if (!head_pen_e.empty())
        for (std::size_t p = 0; p < ge.size(); ++p) ge[p] += head_pen_e[p];
      if (!head_pen_d.empty())
        for (std::size_t p = 0; p < gd.size(); ++p) gd[p] += head_pen_d[p];
      for (std::size_t p = 0; p < we.size(); ++p) we[p] -= cfg.lr_propensity * ge[p];
      for (std::size_t p = 0; p < wd.size(); ++p) wd[p] -= cfg.lr_propensity * gd[p];
    }

    // Smoothed leakage and dual control.
    if (!smooth_started) {
      smooth_e = leak_e.mi_nats;
      smooth_d = leak_d.mi_nats;
      smooth_started = true;
    } else {
      smooth_e = cfg.mi_smoothing * smooth_e + (1.0 - cfg.mi_smoothing) * leak_e.mi_nats;
      smooth_d = cfg.mi_smoothing * smooth_d + (1.0 - cfg.mi_smoothing) * leak_d.mi_nats;
    }
    if (is_sif && phase >= 3) {
      if (cfg.channel_exposure)
        lambda_e = dual_update(lambda_e, smooth_e, cfg.budget_eps, cfg.eta_lambda);
      if (cfg.channel_decision)
        lambda_d = dual_update(lambda_d, smooth_d, cfg.budget_eps, cfg.eta_lambda);
    }

    // Trace.
    if ((step + 1) % cfg.trace_every == 0 || step + 1 == cfg.iterations) {
      TraceRecord rec;
      rec.step = step + 1;
      rec.train_loss = rank_loss;
      rec.exposure = leak_e;
      rec.exposure.budget_eps = cfg.budget_eps;
      rec.exposure.lambda = lambda_e;
      rec.decision = leak_d;
      rec.decision.budget_eps = cfg.budget_eps;
      rec.decision.lambda = lambda_d;
      std::vector<double> click_weights;
      for (std::size_t t = 0; t < nb; ++t)
        if (st.flat[idx[t]].imp->click) click_weights.push_back(inv_prop[t]);
      rec.ess = click_weights.empty() ? 0.0 : effective_sample_size(click_weights);
      rec.val_ndcg10 = validation_ndcg10(in.validation, ranker, data.g_max);
      rec.risk_bound = 2.0 * l_max * std::sqrt(0.5 * (smooth_e + smooth_d));
      trace.records.push_back(rec);

      // Refresh the DR outcome model from the window that just closed.
      for (std::size_t k = 0; k < outcome.size(); ++k) {
        if (outcome_cnt[k] > 0.0) outcome[k] = outcome_sum[k] / outcome_cnt[k];
        outcome_sum[k] = 0.0;
        outcome_cnt[k] = 0.0;
      }
    }
  }

  TrainResult result;
  result.ranker = std::move(ranker);
  result.propensity = std::move(heads);
  result.trace = std::move(trace);
  return result;
}

void write_trace_csv(const TrainTrace& trace, const std::string& out_dir,
                     const std::string& prefix) {
  if (trace.records.empty()) throw Error("write_trace_csv: empty trace");
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  char buf[64];
  auto fmt = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return std::string(buf);
  };

  std::ofstream leak(fs::path(out_dir) / (prefix + "_leakage.csv"));
  leak << "step,channel,mi_raw,mi_clamped,lambda,budget\n";
  for (const auto& r : trace.records) {
    for (const ChannelLeakage* c : {&r.exposure, &r.decision}) {
      leak << r.step << ',' << channel_name(c->channel) << ',' << fmt(c->mi_raw) << ','
           << fmt(c->mi_nats) << ',' << fmt(c->lambda) << ',' << fmt(c->budget_eps) << '\n';
    }
  }

  std::ofstream ess(fs::path(out_dir) / (prefix + "_ess.csv"));
  ess << "step,ess\n";
  for (const auto& r : trace.records) ess << r.step << ',' << fmt(r.ess) << '\n';

  std::ofstream lam(fs::path(out_dir) / (prefix + "_lambda.csv"));
  lam << "step,channel,lambda\n";
  for (const auto& r : trace.records) {
    lam << r.step << ",exposure," << fmt(r.exposure.lambda) << '\n';
    lam << r.step << ",decision," << fmt(r.decision.lambda) << '\n';
  }

  std::ofstream ndcg(fs::path(out_dir) / (prefix + "_ndcg.csv"));
  ndcg << "step,val_ndcg10\n";
  for (const auto& r : trace.records) ndcg << r.step << ',' << fmt(r.val_ndcg10) << '\n';
}

}  // namespace sifr
