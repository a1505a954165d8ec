#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sifr {

struct Document {
  std::string doc_id;
  int relevance = 0;
  std::vector<double> features;

  bool operator==(const Document&) const = default;
};

struct QueryGroup {
  std::string qid;
  std::vector<Document> docs;

  bool operator==(const QueryGroup&) const = default;
};

// Per-feature min/max observed before scaling; reused to normalize
// validation/test splits with the training constants.
struct Normalization {
  std::vector<double> feature_min;
  std::vector<double> feature_max;
};

struct Dataset {
  std::vector<QueryGroup> groups;
  int dim = 0;
  int g_max = 1;
  Normalization norm;
  // Synthetic datasets carry the logging score direction w_S; parsed
  // datasets leave it empty.
  std::vector<double> logging_direction;

  std::size_t total_docs() const;

  // Semantic equality: groups, dim, and grade scale. Normalization constants
  // and the synthetic logging direction are bookkeeping, not content.
  bool operator==(const Dataset& o) const {
    return dim == o.dim && g_max == o.g_max && groups == o.groups;
  }
};

struct ParsedLine {
  int relevance = 0;
  std::string qid;
  std::map<int, double> features;  // 0-based indices
};

// One LETOR/SVMLight line: "<label> qid:<id> <i>:<v> ... [# comment]".
// Feature indices are 1-based in the text and converted to 0-based here.
ParsedLine parse_letor_line(std::string_view line);

// Parses a whole file. Query groups must be contiguous; features are
// densified to `dim` (inferred as max index + 1 when absent) and min-max
// normalized to [0,1] over the whole file. Constant features map to 0.
Dataset load_dataset(const std::string& path, std::optional<int> dim = {},
                     const Normalization* reuse_norm = nullptr);
Dataset parse_dataset(std::istream& in, std::optional<int> dim = {},
                      const Normalization* reuse_norm = nullptr);

// Dense LETOR text with round-trip-exact doubles.
void write_letor(const Dataset& ds, std::ostream& out);
void save_letor(const Dataset& ds, const std::string& path);

struct SynthParams {
  int n_queries = 100;
  int docs_per_query = 10;
  int dim = 10;
  double rho = 0.8;        // corr(w_S . x, r*)
  int g_max = 4;
  double relevance_noise = 0.1;  // relative to the signal scale
  std::uint64_t seed = 1;
};

// Synthetic dataset: normalized i.i.d. Gaussian features, latent relevance
// r* = w_R . x + noise graded by quantile binning, and a stored logging
// direction w_S with corr(w_S . x, r*) controlled by rho.
Dataset synth_dataset(const SynthParams& p);

}  // namespace sifr
