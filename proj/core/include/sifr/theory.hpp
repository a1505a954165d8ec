#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sifr/rng.hpp"

namespace sifr {

// 1/2 sum |p_i - q_i| over a shared finite support.
double tv_distance(std::span<const double> p, std::span<const double> q);

// sum p_i ln(p_i / q_i), with 0 ln 0 = 0. Requires q > 0 wherever p > 0.
double kl_divergence(std::span<const double> p, std::span<const double> q);

struct BoundReport {
  std::string theorem;
  double lhs = 0.0;
  double rhs = 0.0;
  // rhs - lhs for inequalities; -|lhs - rhs| for identities. The checks pass
  // while slack >= -1e-9.
  double slack = 0.0;
  bool ok = true;
};

// --- Enumerable instances -------------------------------------------------
//
// All expectations below are exact sums over small supports; tolerances are
// purely floating-point allowances.

// Regimes that differ only in the bias-channel mechanism given (X, K): shared
// p(x,k), shared click kernel p(c | x, k, y), distinct p(y | x, k).
struct RegimePair {
  int nx = 2, nk = 2, ny = 2, nc = 2;
  int n_channels = 1;                     // 1, or 2 binary channels (ny = 4)
  std::vector<double> p_xk;               // nx * nk
  std::vector<double> y_obs, y_tgt;       // (x,k) -> dist over y
  // Per-channel Bernoulli(p of value 1) tables when n_channels == 2 and the
  // channels are conditionally independent in both regimes.
  std::vector<double> ch_obs, ch_tgt;     // (x,k,channel) -> p(value 1)
  std::vector<double> click_kernel;       // (x,k,y) -> dist over c
  std::vector<double> loss;               // (x,k,c)
  double l_max = 1.0;
};

// A bias source Z feeding channel(s) Y through a shared kernel; regimes
// differ only in p(z | x, k). Conforms to the SDPI premise with c_Y = 1 by
// construction (the generator rejects or shrinks until it holds per (x,k)).
struct LeakageInstance {
  int nx = 2, nk = 2, nz = 2, nc = 2;
  std::vector<int> channel_sizes;         // e.g. {2} or {2, 2}
  std::vector<double> p_xk;               // nx * nk
  std::vector<double> z_obs, z_tgt;       // (x,k) -> dist over z
  std::vector<double> y_kernel;           // (z,x,k) -> dist over joint y
  std::vector<double> click_kernel;       // (x,k,y) -> dist over c
  std::vector<double> loss;               // (x,k,c)
  double l_max = 1.0;

  int ny() const;
};

// Four-node discrete SCM over (W, U, B, Z) with W exogenous; edges among
// (U, B, Z) follow a random topological order, and any node may have W as a
// parent. U (with W) blocks every indirect path between B and Z.
struct AdjustmentGraph {
  int nw = 1, nu = 2, nb = 2, nz = 2;
  std::vector<int> order;                 // permutation of {0:U, 1:B, 2:Z}
  std::vector<double> p_w;                // nw
  // CPT per non-root node: for each (w, earlier-node values) row, a
  // distribution over the node's support. Parent participation is encoded by
  // boolean masks; absent parents are marginalized out of the row index.
  struct Node {
    int size = 2;
    bool parent_w = false;
    bool parent_prev[2] = {false, false};  // earlier non-root nodes, in order
    std::vector<double> cpt;               // row-major over active parents
  };
  Node nodes[3];
};

// --- Checks ----------------------------------------------------------------

// |E_P f - E_Q f| <= 2B TV(P, Q) for |f| <= B.
BoundReport check_lemma1(std::span<const double> p, std::span<const double> q,
                         std::span<const double> f, double bound);

// TV(P K, Q K) <= TV(P, Q) for a row-stochastic kernel K.
BoundReport check_lemma2(std::span<const double> p, std::span<const double> q,
                         const std::vector<std::vector<double>>& kernel);

// TV <= sqrt(KL / 2).
BoundReport check_pinsker(std::span<const double> p, std::span<const double> q);

// Risk gap vs the joint-KL bound, and the channel-decomposed bound when the
// channels are conditionally independent.
BoundReport check_theorem1(const RegimePair& inst);

// E[CI_Y] <= E[I(Z;Y|X,K)] with c_Y = 1 on conforming instances.
BoundReport check_theorem2(const LeakageInstance& inst);

// |R_pi - R_pi*| <= L sum_B sqrt(2 I(Z;Y_B|X,K)), with L the largest loss
// swing across channel configurations at fixed (x,k).
BoundReport check_result1(const LeakageInstance& inst);

// Interventional CMI via truncated factorization vs the observational
// adjustment formula I(B;Z,U|W) - I(B;U|W); equality within 1e-9.
BoundReport check_backdoor_identity(const AdjustmentGraph& g);

// |E[CI_E] - I(E;X|K)| for the position-only exposure target, both sides
// computed by different exact routes.
double position_only_identity_gap(int nx, int nk, Rng& rng);

// --- Generators ------------------------------------------------------------

RegimePair gen_regime_pair(Rng& rng, bool two_channels, bool epsilon_mass = false);
LeakageInstance gen_leakage_instance(Rng& rng, int n_channels, bool deterministic_kernel = false);
AdjustmentGraph gen_adjustment_graph(Rng& rng);

// --- Suite -----------------------------------------------------------------

struct TheoremSuiteResult {
  std::string name;
  int instances = 0;
  int failures = 0;
  double worst_slack = 0.0;
  double seconds = 0.0;
};

// Runs every check on freshly generated instances. Violations dump the
// offending instance to a replayable fixture under fixture_dir (when set).
std::vector<TheoremSuiteResult> run_theory_suite(int n_per_check, std::uint64_t seed,
                                                 const std::string& fixture_dir = "");

void dump_fixture(const std::string& path, const std::string& title,
                  const std::vector<std::pair<std::string, std::vector<double>>>& tables);

}  // namespace sifr
