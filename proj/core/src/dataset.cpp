#include "sifr/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "sifr/error.hpp"
#include "sifr/rng.hpp"

namespace sifr {

std::size_t Dataset::total_docs() const {
  std::size_t n = 0;
  for (const auto& g : groups) n += g.docs.size();
  return n;
}

namespace {

double parse_double(std::string_view tok, std::string_view whole) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    throw ParseError("bad numeric value in token '" + std::string(whole) + "'");
  return v;
}

long parse_long(std::string_view tok, std::string_view whole) {
  long v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    throw ParseError("bad integer in token '" + std::string(whole) + "'");
  return v;
}

}  // namespace

ParsedLine parse_letor_line(std::string_view line) {
  if (auto hash = line.find('#'); hash != std::string_view::npos)
    line = line.substr(0, hash);

  ParsedLine out;
  std::size_t pos = 0;
  int field = 0;
  while (pos < line.size()) {
    while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t' || line[pos] == '\r'))
      ++pos;
    if (pos >= line.size()) break;
    std::size_t end = pos;
    while (end < line.size() && line[end] != ' ' && line[end] != '\t' && line[end] != '\r')
      ++end;
    std::string_view tok = line.substr(pos, end - pos);
    pos = end;

    if (field == 0) {
      long label = parse_long(tok, tok);
      if (label < 0) throw ParseError("negative relevance label '" + std::string(tok) + "'");
      out.relevance = static_cast<int>(label);
    } else if (field == 1) {
      if (tok.substr(0, 4) != "qid:" || tok.size() == 4)
        throw ParseError("expected qid:<id>, got '" + std::string(tok) + "'");
      out.qid = std::string(tok.substr(4));
    } else {
      auto colon = tok.find(':');
      if (colon == std::string_view::npos || colon == 0 || colon + 1 == tok.size())
        throw ParseError("malformed feature token '" + std::string(tok) + "'");
      long idx = parse_long(tok.substr(0, colon), tok);
      if (idx < 1) throw ParseError("feature index must be >= 1 in token '" + std::string(tok) + "'");
      double val = parse_double(tok.substr(colon + 1), tok);
      auto [it, inserted] = out.features.emplace(static_cast<int>(idx - 1), val);
      (void)it;
      if (!inserted)
        throw ParseError("duplicate feature index in token '" + std::string(tok) + "'");
    }
    ++field;
  }
  if (field == 0) throw ParseError("empty line");
  if (field == 1) throw ParseError("missing qid field");
  return out;
}

namespace {

void normalize_features(Dataset& ds, const Normalization* reuse) {
  const int dim = ds.dim;
  if (reuse) {
    if (static_cast<int>(reuse->feature_min.size()) != dim)
      throw Error("normalization constants do not match dataset dimensionality");
    ds.norm = *reuse;
  } else {
    ds.norm.feature_min.assign(dim, std::numeric_limits<double>::infinity());
    ds.norm.feature_max.assign(dim, -std::numeric_limits<double>::infinity());
    for (const auto& g : ds.groups)
      for (const auto& d : g.docs)
        for (int j = 0; j < dim; ++j) {
          ds.norm.feature_min[j] = std::min(ds.norm.feature_min[j], d.features[j]);
          ds.norm.feature_max[j] = std::max(ds.norm.feature_max[j], d.features[j]);
        }
  }
  for (auto& g : ds.groups)
    for (auto& d : g.docs)
      for (int j = 0; j < dim; ++j) {
        double lo = ds.norm.feature_min[j], hi = ds.norm.feature_max[j];
        double range = hi - lo;
        if (range <= 0.0) {
          d.features[j] = 0.0;  // constant feature
        } else {
          d.features[j] = std::clamp((d.features[j] - lo) / range, 0.0, 1.0);
        }
      }
}

}  // namespace

Dataset parse_dataset(std::istream& in, std::optional<int> dim_opt,
                      const Normalization* reuse_norm) {
  Dataset ds;
  std::string line;
  std::size_t line_no = 0;
  int max_index = -1;
  int max_grade = 0;
  std::set<std::string> closed_qids;
  std::vector<std::pair<ParsedLine, std::string>> rows;  // parsed line + doc id

  std::string current_qid;
  std::size_t doc_counter = 0;
  while (std::getline(in, line)) {
    ++line_no;
    // Skip blank and comment-only lines.
    std::size_t first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    ParsedLine pl;
    try {
      pl = parse_letor_line(line);
    } catch (const ParseError& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (pl.qid != current_qid) {
      if (closed_qids.count(pl.qid))
        throw ParseError("line " + std::to_string(line_no) +
                         ": non-contiguous query group 'qid:" + pl.qid + "'");
      if (!current_qid.empty()) closed_qids.insert(current_qid);
      current_qid = pl.qid;
    }
    if (!pl.features.empty()) max_index = std::max(max_index, pl.features.rbegin()->first);
    max_grade = std::max(max_grade, pl.relevance);
    rows.emplace_back(std::move(pl), std::to_string(doc_counter++));
  }
  if (rows.empty()) throw Error("empty dataset");

  int dim = dim_opt.value_or(max_index + 1);
  if (dim <= 0) throw Error("dataset dimensionality must be positive");
  if (max_index + 1 > dim)
    throw Error("explicit dim " + std::to_string(dim) +
                " inconsistent with observed feature index " + std::to_string(max_index + 1));
  ds.dim = dim;
  ds.g_max = std::max(1, max_grade);

  for (auto& [pl, doc_id] : rows) {
    if (ds.groups.empty() || ds.groups.back().qid != pl.qid) {
      ds.groups.push_back(QueryGroup{pl.qid, {}});
    }
    Document doc;
    doc.doc_id = std::move(doc_id);
    doc.relevance = pl.relevance;
    doc.features.assign(dim, 0.0);
    for (const auto& [idx, val] : pl.features) doc.features[idx] = val;
    ds.groups.back().docs.push_back(std::move(doc));
  }

  normalize_features(ds, reuse_norm);
  return ds;
}

Dataset load_dataset(const std::string& path, std::optional<int> dim,
                     const Normalization* reuse_norm) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open dataset file: " + path);
  return parse_dataset(in, dim, reuse_norm);
}

void write_letor(const Dataset& ds, std::ostream& out) {
  char buf[40];
  for (const auto& g : ds.groups) {
    for (const auto& d : g.docs) {
      out << d.relevance << " qid:" << g.qid;
      for (int j = 0; j < ds.dim; ++j) {
        std::snprintf(buf, sizeof(buf), "%.17g", d.features[j]);
        out << ' ' << (j + 1) << ':' << buf;
      }
      out << '\n';
    }
  }
}

void save_letor(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write dataset file: " + path);
  write_letor(ds, out);
}

Dataset synth_dataset(const SynthParams& p) {
  if (p.n_queries <= 0 || p.docs_per_query <= 0 || p.dim <= 0)
    throw Error("synth_dataset: counts must be positive");
  if (p.rho < 0.0 || p.rho > 1.0) throw Error("synth_dataset: rho must be in [0,1]");
  if (p.g_max < 1) throw Error("synth_dataset: g_max must be >= 1");

  Rng rng(p.seed);
  const std::size_t n = static_cast<std::size_t>(p.n_queries) * p.docs_per_query;
  const int dim = p.dim;

  std::vector<std::vector<double>> feats(n, std::vector<double>(dim));
  for (auto& row : feats)
    for (auto& v : row) v = rng.normal();

  // Relevance direction w_R, and an orthogonal direction for the rho mix.
  std::vector<double> w_r(dim), ortho(dim);
  for (auto& v : w_r) v = rng.normal();
  for (auto& v : ortho) v = rng.normal();
  auto unit = [](std::vector<double>& v) {
    double nrm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
    if (nrm > 0)
      for (auto& x : v) x /= nrm;
  };
  unit(w_r);
  double proj = std::inner_product(ortho.begin(), ortho.end(), w_r.begin(), 0.0);
  for (int j = 0; j < dim; ++j) ortho[j] -= proj * w_r[j];
  unit(ortho);

  std::vector<double> w_s(dim);
  double mix = std::sqrt(std::max(0.0, 1.0 - p.rho * p.rho));
  for (int j = 0; j < dim; ++j) w_s[j] = p.rho * w_r[j] + mix * ortho[j];

  // Min-max normalize per feature, then grade from the normalized features.
  std::vector<double> lo(dim, std::numeric_limits<double>::infinity());
  std::vector<double> hi(dim, -std::numeric_limits<double>::infinity());
  for (const auto& row : feats)
    for (int j = 0; j < dim; ++j) {
      lo[j] = std::min(lo[j], row[j]);
      hi[j] = std::max(hi[j], row[j]);
    }
  for (auto& row : feats)
    for (int j = 0; j < dim; ++j) {
      double range = hi[j] - lo[j];
      row[j] = range > 0 ? (row[j] - lo[j]) / range : 0.0;
    }

  std::vector<double> signal(n);
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    signal[i] = std::inner_product(w_r.begin(), w_r.end(), feats[i].begin(), 0.0);
    mean += signal[i];
  }
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double s : signal) var += (s - mean) * (s - mean);
  double sigma = std::sqrt(var / std::max<std::size_t>(1, n - 1));

  std::vector<double> rstar(n);
  for (std::size_t i = 0; i < n; ++i)
    rstar[i] = signal[i] + rng.normal(0.0, p.relevance_noise * sigma);

  // Quantile binning into g_max + 1 grades; all grades populated.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return rstar[a] < rstar[b]; });
  std::vector<int> grade(n);
  for (std::size_t rank = 0; rank < n; ++rank) {
    int g = static_cast<int>((rank * static_cast<std::size_t>(p.g_max + 1)) / n);
    grade[order[rank]] = std::min(g, p.g_max);
  }

  Dataset ds;
  ds.dim = dim;
  ds.g_max = p.g_max;
  ds.norm.feature_min.assign(dim, 0.0);
  ds.norm.feature_max.assign(dim, 1.0);
  ds.logging_direction = w_s;
  ds.groups.reserve(p.n_queries);
  std::size_t idx = 0;
  for (int q = 0; q < p.n_queries; ++q) {
    QueryGroup g;
    g.qid = std::to_string(q + 1);
    g.docs.reserve(p.docs_per_query);
    for (int d = 0; d < p.docs_per_query; ++d, ++idx) {
      Document doc;
      doc.doc_id = std::to_string(idx);
      doc.relevance = grade[idx];
      doc.features = std::move(feats[idx]);
      g.docs.push_back(std::move(doc));
    }
    ds.groups.push_back(std::move(g));
  }
  return ds;
}

}  // namespace sifr
