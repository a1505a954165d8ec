#include "sifr/theory.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "sifr/error.hpp"
#include "sifr/leakage.hpp"

namespace sifr {

double tv_distance(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size() || p.empty()) throw Error("tv_distance: support mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) acc += std::abs(p[i] - q[i]);
  return 0.5 * acc;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size() || p.empty()) throw Error("kl_divergence: support mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) throw Error("kl_divergence: absolute continuity violated");
    acc += p[i] * std::log(p[i] / q[i]);
  }
  return acc;
}

int LeakageInstance::ny() const {
  int n = 1;
  for (int s : channel_sizes) n *= s;
  return n;
}

namespace {

constexpr double kSlackTol = 1e-9;

// I(Z;Y) for a small joint given as p[z * ny + y].
double mutual_information(std::span<const double> joint, int nz, int ny) {
  std::vector<double> pz(nz, 0.0), py(ny, 0.0);
  double total = 0.0;
  for (int z = 0; z < nz; ++z)
    for (int y = 0; y < ny; ++y) {
      double v = joint[z * ny + y];
      pz[z] += v;
      py[y] += v;
      total += v;
    }
  double mi = 0.0;
  for (int z = 0; z < nz; ++z)
    for (int y = 0; y < ny; ++y) {
      double v = joint[z * ny + y];
      if (v <= 0.0) continue;
      mi += v * std::log(v * total / (pz[z] * py[y]));
    }
  return mi;
}

double expected_risk(const RegimePair& inst, const std::vector<double>& y_dist) {
  double risk = 0.0;
  for (int x = 0; x < inst.nx; ++x)
    for (int k = 0; k < inst.nk; ++k) {
      int xk = x * inst.nk + k;
      double cell = 0.0;
      for (int y = 0; y < inst.ny; ++y) {
        double py = y_dist[xk * inst.ny + y];
        if (py <= 0.0) continue;
        double m = 0.0;
        for (int c = 0; c < inst.nc; ++c)
          m += inst.click_kernel[(static_cast<std::size_t>(xk) * inst.ny + y) * inst.nc + c] *
               inst.loss[xk * inst.nc + c];
        cell += py * m;
      }
      risk += inst.p_xk[xk] * cell;
    }
  return risk;
}

// Induced channel distribution and conditional-MI bookkeeping for a
// LeakageInstance at fixed (x,k).
struct CellView {
  std::vector<double> y_obs, y_tgt;   // induced dists over joint y
  std::vector<double> joint_obs;      // p(z, y) under the obs regime
  double mi_joint = 0.0;              // I_obs(Z; Y | x, k)
};

CellView cell_view(const LeakageInstance& inst, int x, int k) {
  const int ny = inst.ny();
  const int xk = x * inst.nk + k;
  CellView v;
  v.y_obs.assign(ny, 0.0);
  v.y_tgt.assign(ny, 0.0);
  v.joint_obs.assign(static_cast<std::size_t>(inst.nz) * ny, 0.0);
  for (int z = 0; z < inst.nz; ++z) {
    double pz_obs = inst.z_obs[xk * inst.nz + z];
    double pz_tgt = inst.z_tgt[xk * inst.nz + z];
    for (int y = 0; y < ny; ++y) {
      double ker = inst.y_kernel[(static_cast<std::size_t>(z) * inst.nx + x) * inst.nk * ny +
                                 k * ny + y];
      v.y_obs[y] += pz_obs * ker;
      v.y_tgt[y] += pz_tgt * ker;
      v.joint_obs[z * ny + y] += pz_obs * ker;
    }
  }
  v.mi_joint = mutual_information(v.joint_obs, inst.nz, ny);
  return v;
}

double risk_from_induced(const LeakageInstance& inst, bool target) {
  double risk = 0.0;
  const int ny = inst.ny();
  for (int x = 0; x < inst.nx; ++x)
    for (int k = 0; k < inst.nk; ++k) {
      auto v = cell_view(inst, x, k);
      const auto& dist = target ? v.y_tgt : v.y_obs;
      int xk = x * inst.nk + k;
      double cell = 0.0;
      for (int y = 0; y < ny; ++y) {
        double m = 0.0;
        for (int c = 0; c < inst.nc; ++c)
          m += inst.click_kernel[(static_cast<std::size_t>(xk) * ny + y) * inst.nc + c] *
               inst.loss[xk * inst.nc + c];
        cell += dist[y] * m;
      }
      risk += inst.p_xk[xk] * cell;
    }
  return risk;
}

}  // namespace

BoundReport check_lemma1(std::span<const double> p, std::span<const double> q,
                         std::span<const double> f, double bound) {
  if (f.size() != p.size()) throw Error("check_lemma1: f support mismatch");
  double ep = 0.0, eq = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    ep += p[i] * f[i];
    eq += q[i] * f[i];
  }
  BoundReport r;
  r.theorem = "lemma1";
  r.lhs = std::abs(ep - eq);
  r.rhs = 2.0 * bound * tv_distance(p, q);
  r.slack = r.rhs - r.lhs;
  r.ok = r.slack >= -kSlackTol;
  return r;
}

BoundReport check_lemma2(std::span<const double> p, std::span<const double> q,
                         const std::vector<std::vector<double>>& kernel) {
  if (kernel.size() != p.size() || kernel.empty()) throw Error("check_lemma2: kernel shape");
  const std::size_t out_n = kernel.front().size();
  std::vector<double> pc(out_n, 0.0), qc(out_n, 0.0);
  for (std::size_t y = 0; y < p.size(); ++y)
    for (std::size_t c = 0; c < out_n; ++c) {
      pc[c] += p[y] * kernel[y][c];
      qc[c] += q[y] * kernel[y][c];
    }
  BoundReport r;
  r.theorem = "lemma2";
  r.lhs = tv_distance(pc, qc);
  r.rhs = tv_distance(p, q);
  r.slack = r.rhs - r.lhs;
  r.ok = r.slack >= -kSlackTol;
  return r;
}

BoundReport check_pinsker(std::span<const double> p, std::span<const double> q) {
  BoundReport r;
  r.theorem = "pinsker";
  r.lhs = tv_distance(p, q);
  r.rhs = std::sqrt(0.5 * kl_divergence(p, q));
  r.slack = r.rhs - r.lhs;
  r.ok = r.slack >= -kSlackTol;
  return r;
}

BoundReport check_theorem1(const RegimePair& inst) {
  double l_train = expected_risk(inst, inst.y_obs);
  double l_tgt = expected_risk(inst, inst.y_tgt);

  double e_kl_joint = 0.0;
  for (int xk = 0; xk < inst.nx * inst.nk; ++xk) {
    std::span<const double> po(inst.y_obs.data() + static_cast<std::size_t>(xk) * inst.ny,
                               inst.ny);
    std::span<const double> pt(inst.y_tgt.data() + static_cast<std::size_t>(xk) * inst.ny,
                               inst.ny);
    e_kl_joint += inst.p_xk[xk] * kl_divergence(po, pt);
  }
  double rhs_joint = 2.0 * inst.l_max * std::sqrt(0.5 * e_kl_joint);

  BoundReport r;
  r.theorem = inst.n_channels == 2 ? "theorem1_two_channel" : "theorem1_single";
  r.lhs = std::abs(l_tgt - l_train);
  r.rhs = rhs_joint;
  r.slack = rhs_joint - r.lhs;
  r.ok = r.slack >= -kSlackTol;

  if (inst.n_channels == 2) {
    double e_kl_sum = 0.0;
    for (int xk = 0; xk < inst.nx * inst.nk; ++xk)
      for (int ch = 0; ch < 2; ++ch) {
        double po = inst.ch_obs[xk * 2 + ch];
        double pt = inst.ch_tgt[xk * 2 + ch];
        double row_o[2] = {1.0 - po, po};
        double row_t[2] = {1.0 - pt, pt};
        e_kl_sum += inst.p_xk[xk] * kl_divergence(row_o, row_t);
      }
    double rhs_dec = 2.0 * inst.l_max * std::sqrt(0.5 * e_kl_sum);
    // Chain-rule ordering: the joint bound never exceeds the decomposed one.
    r.ok = r.ok && (r.lhs <= rhs_dec + kSlackTol) && (rhs_joint <= rhs_dec + kSlackTol);
    r.slack = std::min(r.slack, rhs_dec - r.lhs);
    r.slack = std::min(r.slack, rhs_dec - rhs_joint);
  }
  return r;
}

BoundReport check_theorem2(const LeakageInstance& inst) {
  double e_ci = 0.0, e_mi = 0.0;
  for (int x = 0; x < inst.nx; ++x)
    for (int k = 0; k < inst.nk; ++k) {
      auto v = cell_view(inst, x, k);
      int xk = x * inst.nk + k;
      e_ci += inst.p_xk[xk] * kl_divergence(v.y_obs, v.y_tgt);
      e_mi += inst.p_xk[xk] * v.mi_joint;
    }
  BoundReport r;
  r.theorem = "theorem2";
  r.lhs = e_ci;
  r.rhs = e_mi;  // c_Y = 1
  r.slack = r.rhs - r.lhs;
  r.ok = r.slack >= -kSlackTol;
  return r;
}

BoundReport check_result1(const LeakageInstance& inst) {
  const int ny = inst.ny();
  double l_train = risk_from_induced(inst, false);
  double l_tgt = risk_from_induced(inst, true);

  // Discrete Lipschitz constant: worst loss swing across channel
  // configurations at fixed (x, k).
  double lip = 0.0;
  for (int xk = 0; xk < inst.nx * inst.nk; ++xk) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (int y = 0; y < ny; ++y) {
      double m = 0.0;
      for (int c = 0; c < inst.nc; ++c)
        m += inst.click_kernel[(static_cast<std::size_t>(xk) * ny + y) * inst.nc + c] *
             inst.loss[xk * inst.nc + c];
      lo = std::min(lo, m);
      hi = std::max(hi, m);
    }
    lip = std::max(lip, hi - lo);
  }

  // Aggregated per-channel leakage I(Z; Y_b | X, K).
  const int n_ch = static_cast<int>(inst.channel_sizes.size());
  std::vector<double> leakage(n_ch, 0.0);
  double e_kl_joint = 0.0;
  for (int x = 0; x < inst.nx; ++x)
    for (int k = 0; k < inst.nk; ++k) {
      auto v = cell_view(inst, x, k);
      int xk = x * inst.nk + k;
      e_kl_joint += inst.p_xk[xk] * kl_divergence(v.y_obs, v.y_tgt);
      // Channel marginals of the joint (z, y) table.
      for (int b = 0; b < n_ch; ++b) {
        int size_b = inst.channel_sizes[b];
        std::vector<double> jb(static_cast<std::size_t>(inst.nz) * size_b, 0.0);
        for (int z = 0; z < inst.nz; ++z)
          for (int y = 0; y < ny; ++y) {
            // decode channel b's value from the mixed-radix joint index
            int rem = y, val = 0;
            for (int c = n_ch - 1; c >= 0; --c) {
              int digit = rem % inst.channel_sizes[c];
              rem /= inst.channel_sizes[c];
              if (c == b) val = digit;
            }
            jb[z * size_b + val] += v.joint_obs[z * ny + y];
          }
        leakage[b] += inst.p_xk[xk] * mutual_information(jb, inst.nz, size_b);
      }
    }

  double rhs = 0.0;
  for (double i_b : leakage) rhs += std::sqrt(2.0 * std::max(0.0, i_b));
  rhs *= lip;
  double rhs_thm1 = 2.0 * inst.l_max * std::sqrt(0.5 * e_kl_joint);

  BoundReport r;
  r.theorem = "result1";
  r.lhs = std::abs(l_tgt - l_train);
  r.rhs = rhs;
  r.slack = std::min(rhs - r.lhs, rhs_thm1 - r.lhs);
  r.ok = r.slack >= -kSlackTol;
  return r;
}

namespace {

// CPT row index for a node given (w, earlier node values).
std::size_t row_index(const AdjustmentGraph& g, int node, int w, int v0, int v1) {
  const auto& nd = g.nodes[node];
  std::size_t idx = 0;
  if (nd.parent_w) idx = idx * g.nw + w;
  if (node >= 1 && nd.parent_prev[0]) idx = idx * g.nodes[0].size + v0;
  if (node >= 2 && nd.parent_prev[1]) idx = idx * g.nodes[1].size + v1;
  return idx;
}

double cpt_prob(const AdjustmentGraph& g, int node, int w, int v0, int v1, int value) {
  const auto& nd = g.nodes[node];
  return nd.cpt[row_index(g, node, w, v0, v1) * nd.size + value];
}

}  // namespace

BoundReport check_backdoor_identity(const AdjustmentGraph& g) {
  // Role of each node slot: position in `order` holding 0 is U, 1 is B, 2 is Z.
  int slot_u = -1, slot_b = -1, slot_z = -1;
  for (int i = 0; i < 3; ++i) {
    if (g.order[i] == 0) slot_u = i;
    if (g.order[i] == 1) slot_b = i;
    if (g.order[i] == 2) slot_z = i;
  }
  const int s0 = g.nodes[0].size, s1 = g.nodes[1].size, s2 = g.nodes[2].size;
  auto size_of_role = [&](int slot) { return g.nodes[slot].size; };
  const int nu = size_of_role(slot_u), nb = size_of_role(slot_b), nz = size_of_role(slot_z);

  // Observational joint p(w, v0, v1, v2).
  std::vector<double> joint(static_cast<std::size_t>(g.nw) * s0 * s1 * s2, 0.0);
  for (int w = 0; w < g.nw; ++w)
    for (int v0 = 0; v0 < s0; ++v0)
      for (int v1 = 0; v1 < s1; ++v1)
        for (int v2 = 0; v2 < s2; ++v2) {
          double p = g.p_w[w] * cpt_prob(g, 0, w, 0, 0, v0) *
                     cpt_prob(g, 1, w, v0, 0, v1) * cpt_prob(g, 2, w, v0, v1, v2);
          joint[((static_cast<std::size_t>(w) * s0 + v0) * s1 + v1) * s2 + v2] = p;
        }

  auto value_of = [&](int slot, int v0, int v1, int v2) {
    return slot == 0 ? v0 : (slot == 1 ? v1 : v2);
  };

  // Interventional side: clamp W = w via truncated factorization, compute
  // I(B; Z | U) in each mutilated model, average with the observational p(w).
  double lhs = 0.0;
  for (int w = 0; w < g.nw; ++w) {
    JointTable t;  // (Z-slot = B, Y-slot = Z, W-slot = U)
    t.nz = nb;
    t.ny = nz;
    t.nw = nu;
    t.p.assign(static_cast<std::size_t>(nb) * nz * nu, 0.0);
    for (int v0 = 0; v0 < s0; ++v0)
      for (int v1 = 0; v1 < s1; ++v1)
        for (int v2 = 0; v2 < s2; ++v2) {
          double p = cpt_prob(g, 0, w, 0, 0, v0) * cpt_prob(g, 1, w, v0, 0, v1) *
                     cpt_prob(g, 2, w, v0, v1, v2);
          t.at(value_of(slot_b, v0, v1, v2), value_of(slot_z, v0, v1, v2),
               value_of(slot_u, v0, v1, v2)) += p;
        }
    lhs += g.p_w[w] * cmi_discrete(t);
  }

  // Observational side: I(B; Z, U | W) - I(B; U | W).
  JointTable t_bzu_w;
  t_bzu_w.nz = nb;
  t_bzu_w.ny = nz * nu;
  t_bzu_w.nw = g.nw;
  t_bzu_w.p.assign(static_cast<std::size_t>(nb) * nz * nu * g.nw, 0.0);
  JointTable t_bu_w;
  t_bu_w.nz = nb;
  t_bu_w.ny = nu;
  t_bu_w.nw = g.nw;
  t_bu_w.p.assign(static_cast<std::size_t>(nb) * nu * g.nw, 0.0);
  for (int w = 0; w < g.nw; ++w)
    for (int v0 = 0; v0 < s0; ++v0)
      for (int v1 = 0; v1 < s1; ++v1)
        for (int v2 = 0; v2 < s2; ++v2) {
          double p = joint[((static_cast<std::size_t>(w) * s0 + v0) * s1 + v1) * s2 + v2];
          int u = value_of(slot_u, v0, v1, v2);
          int b = value_of(slot_b, v0, v1, v2);
          int z = value_of(slot_z, v0, v1, v2);
          t_bzu_w.at(b, z * nu + u, w) += p;
          t_bu_w.at(b, u, w) += p;
        }
  double rhs = cmi_discrete(t_bzu_w) - cmi_discrete(t_bu_w);

  BoundReport r;
  r.theorem = "backdoor_identity";
  r.lhs = lhs;
  r.rhs = rhs;
  r.slack = -std::abs(lhs - rhs);
  r.ok = r.slack >= -kSlackTol;
  return r;
}

double position_only_identity_gap(int nx, int nk, Rng& rng) {
  std::vector<double> p_xk = rng.dirichlet_uniform(static_cast<std::size_t>(nx) * nk);
  std::vector<double> e(static_cast<std::size_t>(nx) * nk);
  for (auto& v : e) v = 0.05 + 0.9 * rng.uniform();

  // Route A: expected channel divergence against the position-only target
  // p_tgt(E | x, k) = p_obs(E | k).
  std::vector<double> p_k(nk, 0.0), e_bar(nk, 0.0);
  for (int x = 0; x < nx; ++x)
    for (int k = 0; k < nk; ++k) {
      p_k[k] += p_xk[x * nk + k];
      e_bar[k] += p_xk[x * nk + k] * e[x * nk + k];
    }
  for (int k = 0; k < nk; ++k) e_bar[k] /= p_k[k];
  double route_a = 0.0;
  for (int x = 0; x < nx; ++x)
    for (int k = 0; k < nk; ++k) {
      double po[2] = {1.0 - e[x * nk + k], e[x * nk + k]};
      double pt[2] = {1.0 - e_bar[k], e_bar[k]};
      route_a += p_xk[x * nk + k] * kl_divergence(po, pt);
    }

  // Route B: exact I(E; X | K) from the joint table.
  JointTable t;
  t.nz = 2;
  t.ny = nx;
  t.nw = nk;
  t.p.assign(static_cast<std::size_t>(2) * nx * nk, 0.0);
  for (int x = 0; x < nx; ++x)
    for (int k = 0; k < nk; ++k) {
      t.at(1, x, k) = p_xk[x * nk + k] * e[x * nk + k];
      t.at(0, x, k) = p_xk[x * nk + k] * (1.0 - e[x * nk + k]);
    }
  double route_b = cmi_discrete(t);
  return std::abs(route_a - route_b);
}

// --- Generators ------------------------------------------------------------

namespace {

std::vector<double> near_point_mass(std::size_t n, std::size_t peak) {
  std::vector<double> row(n, 1e-8);
  row[peak] = 1.0 - 1e-8 * static_cast<double>(n - 1);
  return row;
}

}  // namespace

RegimePair gen_regime_pair(Rng& rng, bool two_channels, bool epsilon_mass) {
  RegimePair inst;
  inst.nx = 2 + static_cast<int>(rng.uniform_index(3));  // 2..4
  inst.nk = 2 + static_cast<int>(rng.uniform_index(2));  // 2..3
  inst.nc = 2;
  inst.n_channels = two_channels ? 2 : 1;
  inst.ny = two_channels ? 4 : 2 + static_cast<int>(rng.uniform_index(2));
  const int cells = inst.nx * inst.nk;

  inst.p_xk = rng.dirichlet_uniform(cells);
  auto gen_dist = [&](int n) {
    if (epsilon_mass && rng.uniform() < 0.5)
      return near_point_mass(n, rng.uniform_index(n));
    return rng.dirichlet_uniform(n);
  };

  if (two_channels) {
    inst.ch_obs.resize(cells * 2);
    inst.ch_tgt.resize(cells * 2);
    for (auto& v : inst.ch_obs) v = epsilon_mass && rng.uniform() < 0.3
                                        ? (rng.uniform() < 0.5 ? 1e-8 : 1.0 - 1e-8)
                                        : 0.02 + 0.96 * rng.uniform();
    for (auto& v : inst.ch_tgt) v = 0.02 + 0.96 * rng.uniform();
    inst.y_obs.assign(static_cast<std::size_t>(cells) * 4, 0.0);
    inst.y_tgt.assign(static_cast<std::size_t>(cells) * 4, 0.0);
    for (int xk = 0; xk < cells; ++xk)
      for (int y0 = 0; y0 < 2; ++y0)
        for (int y1 = 0; y1 < 2; ++y1) {
          int y = y0 * 2 + y1;
          auto bern = [](double p1, int v) { return v == 1 ? p1 : 1.0 - p1; };
          inst.y_obs[xk * 4 + y] =
              bern(inst.ch_obs[xk * 2], y0) * bern(inst.ch_obs[xk * 2 + 1], y1);
          inst.y_tgt[xk * 4 + y] =
              bern(inst.ch_tgt[xk * 2], y0) * bern(inst.ch_tgt[xk * 2 + 1], y1);
        }
  } else {
    inst.y_obs.reserve(static_cast<std::size_t>(cells) * inst.ny);
    inst.y_tgt.reserve(static_cast<std::size_t>(cells) * inst.ny);
    for (int xk = 0; xk < cells; ++xk) {
      auto o = gen_dist(inst.ny);
      auto t = rng.dirichlet_uniform(inst.ny);
      inst.y_obs.insert(inst.y_obs.end(), o.begin(), o.end());
      inst.y_tgt.insert(inst.y_tgt.end(), t.begin(), t.end());
    }
  }

  inst.click_kernel.reserve(static_cast<std::size_t>(cells) * inst.ny * inst.nc);
  for (int i = 0; i < cells * inst.ny; ++i) {
    auto row = rng.dirichlet_uniform(inst.nc);
    inst.click_kernel.insert(inst.click_kernel.end(), row.begin(), row.end());
  }
  inst.loss.resize(static_cast<std::size_t>(cells) * inst.nc);
  for (auto& v : inst.loss) v = rng.uniform();
  inst.l_max = 1.0;
  return inst;
}

LeakageInstance gen_leakage_instance(Rng& rng, int n_channels, bool deterministic_kernel) {
  LeakageInstance inst;
  inst.nx = 2 + static_cast<int>(rng.uniform_index(3));
  inst.nk = 2 + static_cast<int>(rng.uniform_index(2));
  inst.nz = 2 + static_cast<int>(rng.uniform_index(2));
  inst.nc = 2;
  if (n_channels == 2) {
    inst.channel_sizes = {2, 2};
  } else {
    inst.channel_sizes = {deterministic_kernel ? inst.nz
                                               : 2 + static_cast<int>(rng.uniform_index(2))};
  }
  const int ny = inst.ny();
  const int cells = inst.nx * inst.nk;

  inst.p_xk = rng.dirichlet_uniform(cells);
  inst.z_obs.reserve(static_cast<std::size_t>(cells) * inst.nz);
  inst.z_tgt.reserve(static_cast<std::size_t>(cells) * inst.nz);
  for (int i = 0; i < cells; ++i) {
    auto o = rng.dirichlet_uniform(inst.nz);
    auto t = rng.dirichlet_uniform(inst.nz);
    inst.z_obs.insert(inst.z_obs.end(), o.begin(), o.end());
    inst.z_tgt.insert(inst.z_tgt.end(), t.begin(), t.end());
  }

  inst.y_kernel.assign(static_cast<std::size_t>(inst.nz) * cells * ny, 0.0);
  for (int z = 0; z < inst.nz; ++z)
    for (int x = 0; x < inst.nx; ++x)
      for (int k = 0; k < inst.nk; ++k) {
        std::vector<double> row;
        if (deterministic_kernel) {
          row.assign(ny, 0.0);
          row[z % ny] = 1.0;
        } else if (n_channels == 2) {
          auto r0 = rng.dirichlet_uniform(2);
          auto r1 = rng.dirichlet_uniform(2);
          row = {r0[0] * r1[0], r0[0] * r1[1], r0[1] * r1[0], r0[1] * r1[1]};
        } else {
          row = rng.dirichlet_uniform(ny);
        }
        for (int y = 0; y < ny; ++y)
          inst.y_kernel[(static_cast<std::size_t>(z) * inst.nx + x) * inst.nk * ny + k * ny + y] =
              row[y];
      }

  inst.click_kernel.reserve(static_cast<std::size_t>(cells) * ny * inst.nc);
  for (int i = 0; i < cells * ny; ++i) {
    auto row = rng.dirichlet_uniform(inst.nc);
    inst.click_kernel.insert(inst.click_kernel.end(), row.begin(), row.end());
  }
  inst.loss.resize(static_cast<std::size_t>(cells) * inst.nc);
  for (auto& v : inst.loss) v = rng.uniform();
  inst.l_max = 1.0;

  // Enforce the SDPI premise with c_Y = 1 cell by cell: shrink p_tgt(z|x,k)
  // toward p_obs(z|x,k) until KL(y_obs || y_tgt) <= I(Z;Y|x,k). The kernel and
  // the obs regime stay fixed, so the mixing always terminates (KL -> 0).
  for (int x = 0; x < inst.nx; ++x)
    for (int k = 0; k < inst.nk; ++k) {
      int xk = x * inst.nk + k;
      for (int tries = 0; tries < 200; ++tries) {
        auto v = cell_view(inst, x, k);
        if (kl_divergence(v.y_obs, v.y_tgt) <= v.mi_joint + 1e-15) break;
        for (int z = 0; z < inst.nz; ++z)
          inst.z_tgt[xk * inst.nz + z] =
              0.5 * (inst.z_tgt[xk * inst.nz + z] + inst.z_obs[xk * inst.nz + z]);
        if (tries == 199)
          for (int z = 0; z < inst.nz; ++z)
            inst.z_tgt[xk * inst.nz + z] = inst.z_obs[xk * inst.nz + z];
      }
    }
  return inst;
}

AdjustmentGraph gen_adjustment_graph(Rng& rng) {
  AdjustmentGraph g;
  g.nw = 1 + static_cast<int>(rng.uniform_index(2));  // 1 means "no W"
  g.order = {0, 1, 2};
  rng.shuffle(g.order);
  g.p_w = rng.dirichlet_uniform(g.nw);
  for (int i = 0; i < 3; ++i) {
    auto& nd = g.nodes[i];
    nd.size = 2 + static_cast<int>(rng.uniform_index(2));
    nd.parent_w = g.nw > 1 && rng.uniform() < 0.5;
    if (i >= 1) nd.parent_prev[0] = rng.uniform() < 0.6;
    if (i >= 2) nd.parent_prev[1] = rng.uniform() < 0.6;
    std::size_t rows = 1;
    if (nd.parent_w) rows *= g.nw;
    if (i >= 1 && nd.parent_prev[0]) rows *= g.nodes[0].size;
    if (i >= 2 && nd.parent_prev[1]) rows *= g.nodes[1].size;
    nd.cpt.clear();
    for (std::size_t r = 0; r < rows; ++r) {
      auto row = rng.dirichlet_uniform(nd.size);
      nd.cpt.insert(nd.cpt.end(), row.begin(), row.end());
    }
  }
  // Record the role sizes for reporting convenience.
  for (int i = 0; i < 3; ++i) {
    if (g.order[i] == 0) g.nu = g.nodes[i].size;
    if (g.order[i] == 1) g.nb = g.nodes[i].size;
    if (g.order[i] == 2) g.nz = g.nodes[i].size;
  }
  return g;
}

// --- Suite -----------------------------------------------------------------

void dump_fixture(const std::string& path, const std::string& title,
                  const std::vector<std::pair<std::string, std::vector<double>>>& tables) {
  std::ofstream out(path);
  if (!out) return;
  out << "# " << title << "\n";
  char buf[40];
  for (const auto& [name, values] : tables) {
    out << name << ":";
    for (double v : values) {
      std::snprintf(buf, sizeof(buf), " %.17g", v);
      out << buf;
    }
    out << "\n";
  }
}

namespace {

template <typename GenFn, typename CheckFn>
TheoremSuiteResult run_check(const std::string& name, int n, std::uint64_t seed,
                             const std::string& fixture_dir, GenFn gen, CheckFn check) {
  auto t0 = std::chrono::steady_clock::now();
  TheoremSuiteResult res;
  res.name = name;
  res.instances = n;
  res.worst_slack = std::numeric_limits<double>::infinity();
  Rng rng = Rng::substream(seed, fnv1a64(name.data(), name.size()));
  for (int i = 0; i < n; ++i) {
    auto inst = gen(rng);
    BoundReport rep = check(inst);
    res.worst_slack = std::min(res.worst_slack, rep.slack);
    if (!rep.ok) {
      ++res.failures;
      if (!fixture_dir.empty()) {
        std::filesystem::create_directories(fixture_dir);
        dump_fixture(fixture_dir + "/fixture_" + name + "_" + std::to_string(i) + ".txt",
                     name + " violation: lhs=" + std::to_string(rep.lhs) +
                         " rhs=" + std::to_string(rep.rhs),
                     {{"lhs_rhs_slack", {rep.lhs, rep.rhs, rep.slack}}});
      }
    }
  }
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

struct Lemma1Instance {
  std::vector<double> p, q, f;
};

struct Lemma2Instance {
  std::vector<double> p, q;
  std::vector<std::vector<double>> kernel;
};

struct PinskerInstance {
  std::vector<double> p, q;
};

}  // namespace

std::vector<TheoremSuiteResult> run_theory_suite(int n_per_check, std::uint64_t seed,
                                                 const std::string& fixture_dir) {
  std::vector<TheoremSuiteResult> out;

  out.push_back(run_check(
      "lemma1", n_per_check, seed, fixture_dir,
      [](Rng& rng) {
        Lemma1Instance in;
        std::size_t n = 2 + rng.uniform_index(5);  // support <= 6
        in.p = rng.dirichlet_uniform(n);
        in.q = rng.dirichlet_uniform(n);
        in.f.resize(n);
        for (auto& v : in.f) v = 2.0 * rng.uniform() - 1.0;
        return in;
      },
      [](const Lemma1Instance& in) { return check_lemma1(in.p, in.q, in.f, 1.0); }));

  out.push_back(run_check(
      "lemma2", n_per_check, seed, fixture_dir,
      [](Rng& rng) {
        Lemma2Instance in;
        std::size_t n = 2 + rng.uniform_index(4);
        std::size_t m = 2 + rng.uniform_index(4);
        in.p = rng.dirichlet_uniform(n);
        in.q = rng.dirichlet_uniform(n);
        in.kernel.resize(n);
        for (auto& row : in.kernel) row = rng.dirichlet_uniform(m);
        return in;
      },
      [](const Lemma2Instance& in) { return check_lemma2(in.p, in.q, in.kernel); }));

  out.push_back(run_check(
      "pinsker", n_per_check, seed, fixture_dir,
      [](Rng& rng) {
        PinskerInstance in;
        std::size_t n = 2 + rng.uniform_index(5);
        in.p = rng.dirichlet_uniform(n);
        in.q = rng.dirichlet_uniform(n);
        return in;
      },
      [](const PinskerInstance& in) { return check_pinsker(in.p, in.q); }));

  out.push_back(run_check(
      "theorem1_single", n_per_check, seed, fixture_dir,
      [](Rng& rng) { return gen_regime_pair(rng, false); },
      [](const RegimePair& in) { return check_theorem1(in); }));

  out.push_back(run_check(
      "theorem1_two_channel", n_per_check, seed, fixture_dir,
      [](Rng& rng) { return gen_regime_pair(rng, true); },
      [](const RegimePair& in) { return check_theorem1(in); }));

  out.push_back(run_check(
      "theorem2", n_per_check, seed, fixture_dir,
      [](Rng& rng) { return gen_leakage_instance(rng, 1); },
      [](const LeakageInstance& in) { return check_theorem2(in); }));

  out.push_back(run_check(
      "result1", n_per_check, seed, fixture_dir,
      [](Rng& rng) {
        return gen_leakage_instance(rng, rng.uniform() < 0.5 ? 1 : 2);
      },
      [](const LeakageInstance& in) { return check_result1(in); }));

  out.push_back(run_check(
      "backdoor_identity", n_per_check, seed, fixture_dir,
      [](Rng& rng) { return gen_adjustment_graph(rng); },
      [](const AdjustmentGraph& in) { return check_backdoor_identity(in); }));

  struct IdentityInstance {
    int nx, nk;
    Rng* rng;
  };
  {
    auto t0 = std::chrono::steady_clock::now();
    TheoremSuiteResult res;
    res.name = "position_only_identity";
    res.instances = std::min(n_per_check, 100);
    res.worst_slack = std::numeric_limits<double>::infinity();
    Rng rng = Rng::substream(seed, 0x1DE17);
    for (int i = 0; i < res.instances; ++i) {
      int nx = 2 + static_cast<int>(rng.uniform_index(3));
      int nk = 2 + static_cast<int>(rng.uniform_index(2));
      double gap = position_only_identity_gap(nx, nk, rng);
      res.worst_slack = std::min(res.worst_slack, 1e-12 - gap);
      if (gap > 1e-12) ++res.failures;
    }
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.push_back(res);
  }

  return out;
}

}  // namespace sifr
