#include "sifr/leakage.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sifr/error.hpp"

namespace sifr {

namespace {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// d h(p) / d p at p = sigmoid(z) is ln((1-p)/p) = -z.
inline double entropy_slope_from_logit(double z) { return -z; }

constexpr std::size_t kStratumCap = 256;

// Representative sample indices per position stratum: sorted by key, strided.
std::vector<std::vector<std::size_t>> stratify(std::span<const LeakageSample> batch,
                                               int n_positions,
                                               double (*key)(const LeakageSample&)) {
  std::vector<std::vector<std::size_t>> strata(n_positions);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    int k = std::clamp(batch[i].position, 1, n_positions);
    strata[k - 1].push_back(i);
  }
  for (auto& s : strata) {
    std::stable_sort(s.begin(), s.end(), [&](std::size_t a, std::size_t b) {
      return key(batch[a]) < key(batch[b]);
    });
    if (s.size() > kStratumCap) {
      std::vector<std::size_t> picked;
      picked.reserve(kStratumCap);
      for (std::size_t j = 0; j < kStratumCap; ++j)
        picked.push_back(s[(j * s.size()) / kStratumCap]);
      s = std::move(picked);
    }
  }
  return strata;
}

double score_key(const LeakageSample& s) { return s.score; }
double rank_top_key(const LeakageSample& s) { return s.rank_top[0]; }

}  // namespace

std::string channel_name(Channel c) {
  return c == Channel::Exposure ? "exposure" : "decision";
}

double binary_entropy(double p) {
  if (p < 0.0 || p > 1.0) throw Error("binary_entropy: p outside [0,1]");
  double h = 0.0;
  if (p > 0.0) h -= p * std::log(p);
  if (p < 1.0) h -= (1.0 - p) * std::log(1.0 - p);
  return h;
}

PropensityModel::PropensityModel(int n_positions) : n_positions_(n_positions) {
  if (n_positions < 1) throw Error("PropensityModel: need at least one position");
  w_exp_.assign(n_positions + 3, 0.0);
  w_dec_.assign(n_positions + 5, 0.0);
}

double PropensityModel::exposure_logit(const LeakageSample& s) const {
  int k = std::clamp(s.position, 1, n_positions_);
  const std::size_t p = n_positions_;
  return w_exp_[k - 1] + w_exp_[p] * s.score + w_exp_[p + 1] * s.gmean + w_exp_[p + 2];
}

double PropensityModel::decision_logit(const LeakageSample& s) const {
  int k = std::clamp(s.position, 1, n_positions_);
  const std::size_t p = n_positions_;
  double z = w_dec_[k - 1];
  for (int t = 0; t < 3; ++t) z += w_dec_[p + t] * s.rank_top[t];
  z += w_dec_[p + 3] * s.gmean + w_dec_[p + 4];
  return z;
}

double PropensityModel::exposure_cond(const LeakageSample& s) const {
  return sigmoid(exposure_logit(s));
}

double PropensityModel::decision_cond(const LeakageSample& s) const {
  return sigmoid(decision_logit(s));
}

std::vector<double> PropensityModel::exposure_marginals(
    std::span<const LeakageSample> batch) const {
  auto strata = stratify(batch, n_positions_, &score_key);
  std::vector<double> out(batch.size(), 0.5);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& s = batch[i];
    int k = std::clamp(s.position, 1, n_positions_);
    const auto& members = strata[k - 1];
    if (members.empty()) continue;
    LeakageSample probe = s;
    double acc = 0.0;
    for (std::size_t j : members) {
      probe.score = batch[j].score;
      acc += exposure_cond(probe);
    }
    out[i] = acc / static_cast<double>(members.size());
  }
  return out;
}

std::vector<double> PropensityModel::decision_marginals(
    std::span<const LeakageSample> batch) const {
  auto strata = stratify(batch, n_positions_, &rank_top_key);
  std::vector<double> out(batch.size(), 0.5);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& s = batch[i];
    int k = std::clamp(s.position, 1, n_positions_);
    const auto& members = strata[k - 1];
    if (members.empty()) continue;
    LeakageSample probe = s;
    double acc = 0.0;
    for (std::size_t j : members) {
      probe.rank_top = batch[j].rank_top;
      acc += decision_cond(probe);
    }
    out[i] = acc / static_cast<double>(members.size());
  }
  return out;
}

namespace {

ChannelLeakage entropy_difference(Channel channel, std::span<const LeakageSample> batch,
                                  const std::vector<double>& marginals,
                                  const std::vector<double>& conditionals) {
  if (batch.empty()) throw Error("leakage: empty batch");
  double acc = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i)
    acc += binary_entropy(marginals[i]) - binary_entropy(conditionals[i]);
  ChannelLeakage out;
  out.channel = channel;
  out.mi_raw = acc / static_cast<double>(batch.size());
  out.mi_nats = std::max(0.0, out.mi_raw);
  out.n_samples = batch.size();
  return out;
}

}  // namespace

ChannelLeakage exposure_leakage(std::span<const LeakageSample> batch,
                                const PropensityModel& model) {
  if (batch.empty()) throw Error("exposure_leakage: empty batch");
  auto marg = model.exposure_marginals(batch);
  std::vector<double> cond(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) cond[i] = model.exposure_cond(batch[i]);
  return entropy_difference(Channel::Exposure, batch, marg, cond);
}

ChannelLeakage decision_leakage(std::span<const LeakageSample> batch,
                                const PropensityModel& model) {
  if (batch.empty()) throw Error("decision_leakage: empty batch");
  auto marg = model.decision_marginals(batch);
  std::vector<double> cond(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) cond[i] = model.decision_cond(batch[i]);
  return entropy_difference(Channel::Decision, batch, marg, cond);
}

LeakageGradient exposure_leakage_grad(std::span<const LeakageSample> batch,
                                      const PropensityModel& model,
                                      std::span<const double> frozen_marginals) {
  if (batch.empty()) throw Error("exposure_leakage_grad: empty batch");
  const std::size_t p = model.n_positions();
  LeakageGradient g;
  g.d_score.assign(batch.size(), 0.0);
  g.d_params.assign(model.exposure_params().size(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  const double w_score = model.exposure_params()[p];
  double acc = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    double z = model.exposure_logit(batch[i]);
    double c = sigmoid(z);
    acc += binary_entropy(frozen_marginals[i]) - binary_entropy(c);
    // d(-h(c))/d z = -h'(c) sigma'(z)
    double dz = -entropy_slope_from_logit(z) * c * (1.0 - c) * inv_n;
    g.d_score[i] = dz * w_score;
    int k = std::clamp(batch[i].position, 1, static_cast<int>(p));
    g.d_params[k - 1] += dz;
    g.d_params[p] += dz * batch[i].score;
    g.d_params[p + 1] += dz * batch[i].gmean;
    g.d_params[p + 2] += dz;
  }
  g.raw = acc * inv_n;
  g.clamped = std::max(0.0, g.raw);
  return g;
}

LeakageGradient decision_leakage_grad(std::span<const LeakageSample> batch,
                                      const PropensityModel& model,
                                      std::span<const double> frozen_marginals) {
  if (batch.empty()) throw Error("decision_leakage_grad: empty batch");
  const std::size_t p = model.n_positions();
  LeakageGradient g;
  g.d_rank_top.assign(batch.size() * 3, 0.0);
  g.d_params.assign(model.decision_params().size(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    double z = model.decision_logit(batch[i]);
    double c = sigmoid(z);
    acc += binary_entropy(frozen_marginals[i]) - binary_entropy(c);
    double dz = -entropy_slope_from_logit(z) * c * (1.0 - c) * inv_n;
    for (int t = 0; t < 3; ++t) {
      g.d_rank_top[i * 3 + t] = dz * model.decision_params()[p + t];
      g.d_params[p + t] += dz * batch[i].rank_top[t];
    }
    int k = std::clamp(batch[i].position, 1, static_cast<int>(p));
    g.d_params[k - 1] += dz;
    g.d_params[p + 3] += dz * batch[i].gmean;
    g.d_params[p + 4] += dz;
  }
  g.raw = acc * inv_n;
  g.clamped = std::max(0.0, g.raw);
  return g;
}

double channel_divergence(std::span<const double> p_obs, std::span<const double> p_tgt) {
  if (p_obs.size() != p_tgt.size() || p_obs.empty())
    throw Error("channel_divergence: support mismatch");
  double kl = 0.0;
  for (std::size_t i = 0; i < p_obs.size(); ++i) {
    if (p_obs[i] < 0.0 || p_tgt[i] < 0.0) throw Error("channel_divergence: negative mass");
    if (p_obs[i] == 0.0) continue;
    if (p_tgt[i] <= 0.0) throw Error("channel_divergence: target lacks support");
    kl += p_obs[i] * std::log(p_obs[i] / p_tgt[i]);
  }
  return kl;
}

double cmi_discrete(const JointTable& joint) {
  if (joint.nz < 1 || joint.ny < 1 || joint.nw < 1 ||
      joint.p.size() != static_cast<std::size_t>(joint.nz) * joint.ny * joint.nw)
    throw Error("cmi_discrete: invalid table shape");
  double total = 0.0;
  for (double v : joint.p) {
    if (v < 0.0) throw Error("cmi_discrete: negative entry");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9) throw Error("cmi_discrete: table does not sum to 1");

  std::vector<double> p_w(joint.nw, 0.0);
  std::vector<double> p_zw(static_cast<std::size_t>(joint.nz) * joint.nw, 0.0);
  std::vector<double> p_yw(static_cast<std::size_t>(joint.ny) * joint.nw, 0.0);
  for (int z = 0; z < joint.nz; ++z)
    for (int y = 0; y < joint.ny; ++y)
      for (int w = 0; w < joint.nw; ++w) {
        double v = joint.at(z, y, w);
        p_w[w] += v;
        p_zw[z * joint.nw + w] += v;
        p_yw[y * joint.nw + w] += v;
      }

  double mi = 0.0;
  for (int z = 0; z < joint.nz; ++z)
    for (int y = 0; y < joint.ny; ++y)
      for (int w = 0; w < joint.nw; ++w) {
        double v = joint.at(z, y, w);
        if (v <= 0.0) continue;
        // p(z,y|w) / (p(z|w) p(y|w)) = p(z,y,w) p(w) / (p(z,w) p(y,w))
        mi += v * std::log(v * p_w[w] / (p_zw[z * joint.nw + w] * p_yw[y * joint.nw + w]));
      }
  return mi;
}

}  // namespace sifr
