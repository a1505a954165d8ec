#include "sifr/scm.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>

#include "sifr/error.hpp"

namespace sifr {

namespace {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void mix_double(std::uint64_t& h, double v) {
  std::uint64_t bits;
  static_assert(sizeof(bits) == sizeof(v));
  std::memcpy(&bits, &v, sizeof(bits));
  h = fnv1a64_mix(h, bits);
}

}  // namespace

std::uint64_t ScmConfig::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  h = fnv1a64_mix(h, static_cast<std::uint64_t>(exposure.kind));
  mix_double(h, exposure.eta);
  for (double a : exposure.position_logits) mix_double(h, a);
  for (double b : exposure.weights) mix_double(h, b);
  for (int g : exposure.g_indices) h = fnv1a64_mix(h, static_cast<std::uint64_t>(g));
  h = fnv1a64_mix(h, static_cast<std::uint64_t>(trust.kind));
  mix_double(h, trust.beta_r);
  mix_double(h, trust.beta_t);
  mix_double(h, trust.alpha);
  mix_double(h, trust.delta);
  mix_double(h, trust.gamma);
  mix_double(h, logging_score_noise);
  mix_double(h, click_noise_eps);
  h = fnv1a64_mix(h, static_cast<std::uint64_t>(cutoff));
  return h;
}

std::size_t ClickLog::total_impressions() const {
  std::size_t n = 0;
  for (const auto& s : sessions) n += s.impressions.size();
  return n;
}

std::vector<double> logging_scores(const QueryGroup& group, const std::vector<double>& w_s,
                                   double noise, Rng& rng) {
  if (group.docs.empty()) throw Error("logging_scores: empty group");
  if (group.docs.front().features.size() != w_s.size())
    throw Error("logging_scores: weight dimension mismatch");
  std::vector<double> out(group.docs.size());
  for (std::size_t i = 0; i < group.docs.size(); ++i) {
    const auto& x = group.docs[i].features;
    double s = std::inner_product(w_s.begin(), w_s.end(), x.begin(), 0.0);
    out[i] = s + (noise > 0.0 ? rng.normal(0.0, noise) : 0.0);
  }
  return out;
}

GroupScoreFn linear_logging_policy(std::vector<double> w_s, double noise) {
  return [w_s = std::move(w_s), noise](const QueryGroup& g, Rng& rng) {
    return logging_scores(g, w_s, noise, rng);
  };
}

std::vector<int> rank_by_scores(const std::vector<double>& scores) {
  for (double s : scores)
    if (std::isnan(s)) throw Error("rank_by_scores: NaN score");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<int> position(scores.size());
  for (std::size_t rank = 0; rank < order.size(); ++rank)
    position[order[rank]] = static_cast<int>(rank + 1);
  return position;
}

double exposure_prob(const ExposureModel& model, int k, const std::vector<double>& x) {
  if (k < 1) throw Error("exposure_prob: position must be >= 1");
  if (model.kind == ExposureKind::PositionPower) {
    return std::pow(1.0 / static_cast<double>(k), model.eta);
  }
  double a = 0.0;
  if (!model.position_logits.empty()) {
    std::size_t idx = std::min<std::size_t>(k - 1, model.position_logits.size() - 1);
    a = model.position_logits[idx];
  }
  double dot = 0.0;
  for (std::size_t j = 0; j < model.g_indices.size() && j < model.weights.size(); ++j) {
    int gi = model.g_indices[j];
    if (gi >= 0 && gi < static_cast<int>(x.size())) dot += model.weights[j] * x[gi];
  }
  return sigmoid(a + dot);
}

double relevance_click_prob(int grade, double eps, int g_max) {
  if (grade < 0 || grade > g_max) throw Error("relevance_click_prob: grade out of range");
  double denom = std::exp2(g_max) - 1.0;
  return eps + (1.0 - eps) * (std::exp2(grade) - 1.0) / denom;
}

DecisionOutcome decision_prob(const TrustModel& trust, int k, int grade, int g_max,
                              double r_s) {
  if (k < 1) throw Error("decision_prob: position must be >= 1");
  switch (trust.kind) {
    case TrustKind::Off:
      return {1.0, 1.0};
    case TrustKind::Bernoulli: {
      double r_norm = g_max > 0 ? static_cast<double>(grade) / g_max : 0.0;
      double p = sigmoid(trust.beta_r * r_norm +
                         trust.beta_t * std::exp(-trust.delta * (k - 1)));
      return {p, 1.0};
    }
    case TrustKind::Multiplicative: {
      double f = 1.0 + trust.alpha * std::exp(-trust.delta * (k - 1)) *
                           sigmoid(trust.gamma * r_s);
      // The trust excess lives in the click probability (clamped there);
      // the latent gate is degenerate at 1 once exposed.
      return {1.0, f};
    }
  }
  return {1.0, 1.0};
}

std::vector<Impression> sample_session(const QueryGroup& group, const GroupScoreFn& policy,
                                       const ScmConfig& config, int g_max, Rng& rng) {
  if (group.docs.empty()) throw Error("sample_session: empty group");
  std::vector<double> scores = policy(group, rng);
  std::vector<int> position = rank_by_scores(scores);
  const int shown = std::min<int>(config.cutoff, static_cast<int>(group.docs.size()));

  std::vector<Impression> session(shown);
  for (std::size_t i = 0; i < group.docs.size(); ++i) {
    int k = position[i];
    // Fixed three-uniform consumption per shown document keeps substreams
    // aligned no matter which branches fire.
    if (k > shown) continue;
    const Document& doc = group.docs[i];
    double u_e = rng.uniform();
    double u_d = rng.uniform();
    double u_c = rng.uniform();

    Impression imp;
    imp.qid = group.qid;
    imp.doc_id = doc.doc_id;
    imp.doc_index = static_cast<int>(i);
    imp.grade = doc.relevance;
    imp.position = k;
    imp.logging_score = scores[i];

    double e = exposure_prob(config.exposure, k, doc.features);
    DecisionOutcome d = decision_prob(config.trust, k, doc.relevance, g_max, scores[i]);
    double base = relevance_click_prob(doc.relevance, config.click_noise_eps, g_max);
    double p_click_given_ed = std::clamp(base * d.factor, 0.0, 1.0);

    imp.exposure = u_e < e ? 1 : 0;
    imp.decision = (imp.exposure && u_d < d.p_decision) ? 1 : 0;
    imp.click = (imp.decision && u_c < p_click_given_ed) ? 1 : 0;
    imp.oracle_propensity = e;
    imp.oracle_click_prob = e * std::clamp(d.p_decision * base * d.factor, 0.0, 1.0);
    session[k - 1] = std::move(imp);
  }
  return session;
}

ClickLog sample_click_log(const Dataset& data, const GroupScoreFn& policy,
                          const ScmConfig& config, std::size_t n_sessions,
                          std::uint64_t seed, int threads) {
  if (n_sessions < 1) throw Error("sample_click_log: need at least one session");
  if (data.groups.empty()) throw Error("sample_click_log: empty dataset");

  ClickLog log;
  log.sessions.resize(n_sessions);
  log.config_fingerprint = config.fingerprint();
  log.seed = seed;
  log.n_positions = config.cutoff;
  log.oracle = true;

  auto run_range = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t s = lo; s < hi; ++s) {
      Rng rng = Rng::substream(seed, s);
      std::size_t q = static_cast<std::size_t>(rng.uniform_index(data.groups.size()));
      Session& out = log.sessions[s];
      out.session_id = s;
      out.group_index = static_cast<int>(q);
      out.impressions = sample_session(data.groups[q], policy, config, data.g_max, rng);
    }
  };

  int n_threads = std::max(1, threads);
  if (n_threads == 1 || n_sessions < 1024) {
    run_range(0, n_sessions);
  } else {
    std::vector<std::thread> pool;
    std::size_t chunk = (n_sessions + n_threads - 1) / n_threads;
    for (int t = 0; t < n_threads; ++t) {
      std::size_t lo = t * chunk;
      std::size_t hi = std::min(n_sessions, lo + chunk);
      if (lo >= hi) break;
      pool.emplace_back(run_range, lo, hi);
    }
    for (auto& th : pool) th.join();
  }
  return log;
}

ClickLog sample_click_log(const Dataset& data, const ScmConfig& config,
                          std::size_t n_sessions, std::uint64_t seed, int threads) {
  if (data.logging_direction.empty())
    throw Error("sample_click_log: dataset has no logging direction; pass a policy");
  return sample_click_log(
      data, linear_logging_policy(data.logging_direction, config.logging_score_noise),
      config, n_sessions, seed, threads);
}

void write_click_log(const ClickLog& log, std::ostream& out, bool oracle) {
  char buf[40];
  out << "# config_fingerprint=" << log.config_fingerprint << " seed=" << log.seed
      << " positions=" << log.n_positions << " oracle=" << (oracle ? 1 : 0) << "\n";
  out << "session_id,qid,doc_id,position,r_s";
  if (oracle) out << ",exposure,decision";
  out << ",click,oracle_propensity,oracle_click_prob\n";
  for (const auto& s : log.sessions) {
    for (const auto& imp : s.impressions) {
      out << s.session_id << ',' << imp.qid << ',' << imp.doc_id << ',' << imp.position;
      std::snprintf(buf, sizeof(buf), "%.17g", imp.logging_score);
      out << ',' << buf;
      if (oracle) out << ',' << int(imp.exposure) << ',' << int(imp.decision);
      out << ',' << int(imp.click);
      std::snprintf(buf, sizeof(buf), "%.17g", imp.oracle_propensity);
      out << ',' << buf;
      std::snprintf(buf, sizeof(buf), "%.17g", imp.oracle_click_prob);
      out << ',' << buf << '\n';
    }
  }
}

void save_click_log(const ClickLog& log, const std::string& path, bool oracle) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write click log: " + path);
  write_click_log(log, out, oracle);
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

ClickLog read_click_log(std::istream& in, const Dataset& data) {
  // qid -> (group index, doc_id -> doc index)
  std::map<std::string, std::pair<int, std::map<std::string, int>>> index;
  for (std::size_t g = 0; g < data.groups.size(); ++g) {
    auto& entry = index[data.groups[g].qid];
    entry.first = static_cast<int>(g);
    for (std::size_t d = 0; d < data.groups[g].docs.size(); ++d)
      entry.second[data.groups[g].docs[d].doc_id] = static_cast<int>(d);
  }

  ClickLog log;
  std::string line;
  if (!std::getline(in, line)) throw ParseError("click log: empty file");
  {
    std::istringstream hdr(line);
    std::string tag;
    hdr >> tag;
    if (tag != "#") throw ParseError("click log: missing metadata header");
    std::string kv;
    while (hdr >> kv) {
      auto eq = kv.find('=');
      if (eq == std::string::npos) continue;
      std::string key = kv.substr(0, eq);
      std::string val = kv.substr(eq + 1);
      if (key == "config_fingerprint") log.config_fingerprint = std::stoull(val);
      else if (key == "seed") log.seed = std::stoull(val);
      else if (key == "positions") log.n_positions = std::stoi(val);
      else if (key == "oracle") log.oracle = val == "1";
    }
  }
  if (!std::getline(in, line)) throw ParseError("click log: missing column header");
  const bool has_latents = log.oracle;

  Session* cur = nullptr;
  std::uint64_t cur_id = 0;
  std::size_t line_no = 2;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto f = split_csv(line);
    const std::size_t expect = has_latents ? 10u : 8u;
    if (f.size() != expect)
      throw ParseError("click log line " + std::to_string(line_no) + ": expected " +
                       std::to_string(expect) + " fields, got " + std::to_string(f.size()));
    std::size_t c = 0;
    std::uint64_t sid = std::stoull(f[c++]);
    Impression imp;
    imp.qid = f[c++];
    imp.doc_id = f[c++];
    imp.position = std::stoi(f[c++]);
    imp.logging_score = std::stod(f[c++]);
    if (has_latents) {
      imp.exposure = static_cast<std::uint8_t>(std::stoi(f[c++]));
      imp.decision = static_cast<std::uint8_t>(std::stoi(f[c++]));
    }
    imp.click = static_cast<std::uint8_t>(std::stoi(f[c++]));
    imp.oracle_propensity = std::stod(f[c++]);
    imp.oracle_click_prob = std::stod(f[c++]);

    auto it = index.find(imp.qid);
    if (it == index.end())
      throw ParseError("click log line " + std::to_string(line_no) + ": unknown qid " + imp.qid);
    auto dit = it->second.second.find(imp.doc_id);
    if (dit == it->second.second.end())
      throw ParseError("click log line " + std::to_string(line_no) + ": unknown doc " + imp.doc_id);
    imp.doc_index = dit->second;
    imp.grade = data.groups[it->second.first].docs[dit->second].relevance;

    if (!cur || sid != cur_id) {
      log.sessions.push_back(Session{});
      cur = &log.sessions.back();
      cur->session_id = sid;
      cur->group_index = it->second.first;
      cur_id = sid;
    }
    cur->impressions.push_back(std::move(imp));
  }
  if (log.sessions.empty()) throw ParseError("click log: no sessions");
  return log;
}

ClickLog load_click_log(const std::string& path, const Dataset& data) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open click log: " + path);
  return read_click_log(in, data);
}

}  // namespace sifr
