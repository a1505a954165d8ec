#include "sifr/ranker.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "sifr/error.hpp"

namespace sifr {

Ranker Ranker::linear(int dim) {
  if (dim < 1) throw Error("Ranker::linear: dim must be positive");
  Ranker r;
  r.kind = Kind::Linear;
  r.dim = dim;
  r.params.assign(dim + 1, 0.0);
  return r;
}

Ranker Ranker::mlp1(int dim, int hidden, Rng& rng) {
  if (dim < 1 || hidden < 1) throw Error("Ranker::mlp1: dims must be positive");
  Ranker r;
  r.kind = Kind::Mlp1;
  r.dim = dim;
  r.hidden = hidden;
  r.params.assign(static_cast<std::size_t>(hidden) * dim + 2 * hidden + 1, 0.0);
  double w_bound = 1.0 / std::sqrt(static_cast<double>(dim));
  double v_bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  std::size_t i = 0;
  for (; i < static_cast<std::size_t>(hidden) * dim; ++i)
    r.params[i] = (2.0 * rng.uniform() - 1.0) * w_bound;
  for (int h = 0; h < hidden; ++h) r.params[i++] = (2.0 * rng.uniform() - 1.0) * w_bound;
  for (int h = 0; h < hidden; ++h) r.params[i++] = (2.0 * rng.uniform() - 1.0) * v_bound;
  r.params[i] = 0.0;  // output bias
  return r;
}

double Ranker::score(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != dim) throw Error("Ranker::score: dimension mismatch");
  if (kind == Kind::Linear) {
    double s = params[dim];
    for (int j = 0; j < dim; ++j) s += params[j] * x[j];
    return s;
  }
  const double* W = params.data();
  const double* c = W + static_cast<std::size_t>(hidden) * dim;
  const double* v = c + hidden;
  double b = v[hidden];
  double s = b;
  for (int h = 0; h < hidden; ++h) {
    double z = c[h];
    const double* row = W + static_cast<std::size_t>(h) * dim;
    for (int j = 0; j < dim; ++j) z += row[j] * x[j];
    s += v[h] * std::tanh(z);
  }
  return s;
}

void Ranker::accumulate_score_grad(std::span<const double> x, double coef,
                                   std::span<double> grad) const {
  if (grad.size() != params.size()) throw Error("Ranker::accumulate_score_grad: bad buffer");
  if (kind == Kind::Linear) {
    for (int j = 0; j < dim; ++j) grad[j] += coef * x[j];
    grad[dim] += coef;
    return;
  }
  const double* W = params.data();
  const double* c = W + static_cast<std::size_t>(hidden) * dim;
  const double* v = c + hidden;
  double* gW = grad.data();
  double* gc = gW + static_cast<std::size_t>(hidden) * dim;
  double* gv = gc + hidden;
  for (int h = 0; h < hidden; ++h) {
    double z = c[h];
    const double* row = W + static_cast<std::size_t>(h) * dim;
    for (int j = 0; j < dim; ++j) z += row[j] * x[j];
    double t = std::tanh(z);
    gv[h] += coef * t;
    double back = coef * v[h] * (1.0 - t * t);
    gc[h] += back;
    double* grow = gW + static_cast<std::size_t>(h) * dim;
    for (int j = 0; j < dim; ++j) grow[j] += back * x[j];
  }
  gv[hidden] += coef;  // output bias
}

namespace {

void put_u16(std::ofstream& out, std::uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>(v >> 8)};
  out.write(reinterpret_cast<char*>(b), 2);
}

void put_u32(std::ofstream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<char*>(b), 4);
}

void put_u64(std::ofstream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<char*>(b), 8);
}

std::uint16_t get_u16(std::ifstream& in) {
  unsigned char b[2];
  in.read(reinterpret_cast<char*>(b), 2);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint32_t get_u32(std::ifstream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::ifstream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

void save_ranker(const Ranker& r, const std::string& path, const std::string& sidecar) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write model file: " + path);
  out.write("SIFR", 4);
  put_u16(out, 1);  // version
  put_u16(out, r.kind == Ranker::Kind::Linear ? 0 : 1);
  put_u32(out, static_cast<std::uint32_t>(r.dim));
  put_u32(out, static_cast<std::uint32_t>(r.hidden));
  put_u64(out, r.params.size());
  for (double p : r.params) {
    std::uint64_t bits;
    std::memcpy(&bits, &p, 8);
    put_u64(out, bits);
  }
  if (!out) throw Error("write failure: " + path);
  std::ofstream side(path + ".txt");
  if (!side) throw Error("cannot write sidecar: " + path + ".txt");
  side << sidecar;
}

Ranker load_ranker(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open model file: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "SIFR", 4) != 0)
    throw Error("bad model file (missing SIFR magic): " + path);
  std::uint16_t version = get_u16(in);
  if (version != 1) throw Error("unsupported model version " + std::to_string(version));
  std::uint16_t kind = get_u16(in);
  Ranker r;
  r.kind = kind == 0 ? Ranker::Kind::Linear : Ranker::Kind::Mlp1;
  r.dim = static_cast<int>(get_u32(in));
  r.hidden = static_cast<int>(get_u32(in));
  std::uint64_t n = get_u64(in);
  r.params.resize(n);
  for (auto& p : r.params) {
    std::uint64_t bits = get_u64(in);
    std::memcpy(&p, &bits, 8);
  }
  if (!in) throw Error("truncated model file: " + path);
  return r;
}

}  // namespace sifr
