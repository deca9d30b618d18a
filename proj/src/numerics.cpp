#include "cepnet/numerics.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <thread>

namespace cep {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw ContractError(what);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

ComplexMat::ComplexMat(std::size_t rows, std::size_t cols, std::vector<cplx> entries)
    : rows_(rows), cols_(cols), v_(std::move(entries)) {
  require(v_.size() == rows_ * cols_, "ComplexMat: entry count must equal rows*cols");
}

ComplexMat ComplexMat::identity(std::size_t n) {
  ComplexMat m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

namespace kernel {

// Hand-expanded complex arithmetic: std::complex operator* goes through the
// Annex G NaN-recovery path, which is several times slower here.
void matvec(const ComplexMat& h, std::span<const cplx> x, std::span<cplx> out) {
  const std::size_t cols = h.cols();
  const cplx* a = h.data();
  for (std::size_t r = 0; r < h.rows(); ++r) {
    double re = 0.0;
    double im = 0.0;
    const cplx* row = a + r * cols;
    for (std::size_t c = 0; c < cols; ++c) {
      const double ar = row[c].real(), ai = row[c].imag();
      const double xr = x[c].real(), xi = x[c].imag();
      re += ar * xr - ai * xi;
      im += ar * xi + ai * xr;
    }
    out[r] = {re, im};
  }
}

void matvec_adjoint(const ComplexMat& h, std::span<const cplx> y, std::span<cplx> out) {
  const std::size_t cols = h.cols();
  const cplx* a = h.data();
  for (std::size_t c = 0; c < cols; ++c) out[c] = 0.0;
  for (std::size_t r = 0; r < h.rows(); ++r) {
    const double yr = y[r].real(), yi = y[r].imag();
    const cplx* row = a + r * cols;
    for (std::size_t c = 0; c < cols; ++c) {
      // conj(a) * y
      const double ar = row[c].real(), ai = row[c].imag();
      out[c] = {out[c].real() + ar * yr + ai * yi, out[c].imag() + ar * yi - ai * yr};
    }
  }
}

double real_inner(std::span<const cplx> a, std::span<const cplx> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i].real() * b[i].real() + a[i].imag() * b[i].imag();
  return acc;
}

}  // namespace kernel

ComplexVec matvec(const ComplexMat& h, const ComplexVec& x) {
  require(h.cols() == x.size(), "matvec: H.cols must equal x.length");
  ComplexVec out(h.rows());
  kernel::matvec(h, x.span(), out.span());
  return out;
}

ComplexVec matvec_adjoint(const ComplexMat& h, const ComplexVec& y) {
  require(h.rows() == y.size(), "matvec_adjoint: H.rows must equal y.length");
  ComplexVec out(h.cols());
  kernel::matvec_adjoint(h, y.span(), out.span());
  return out;
}

ComplexVec hadamard(const ComplexVec& a, const ComplexVec& b) {
  require(a.size() == b.size(), "hadamard: length mismatch");
  ComplexVec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

double real_inner(const ComplexVec& a, const ComplexVec& b) {
  require(a.size() == b.size(), "real_inner: length mismatch");
  return kernel::real_inner(a.span(), b.span());
}

double norm_sq(const ComplexVec& a) { return kernel::real_inner(a.span(), a.span()); }

double frobenius_sq(const ComplexMat& h) {
  double acc = 0.0;
  for (const cplx& v : h.values()) acc += std::norm(v);
  return acc;
}

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t s = a ^ rotl(b * 0x9e3779b97f4a7c15ULL, 17);
  splitmix64(s);
  return splitmix64(s);
}

SeededRng::SeededRng(std::uint64_t seed) : seed_(seed) {
  std::uint64_t st = seed;
  for (auto& w : s_) w = splitmix64(st);
}

SeededRng SeededRng::derive(std::uint64_t seed, std::uint64_t stream) {
  return SeededRng(mix_seed(seed, stream));
}

std::uint64_t SeededRng::next_u64() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double SeededRng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double SeededRng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::uint64_t SeededRng::below(std::uint64_t n) {
  require(n > 0, "SeededRng::below: n must be positive");
  // Lemire-style rejection keeps the draw unbiased.
  const std::uint64_t limit = (~std::uint64_t{0} - n + 1) % n;
  for (;;) {
    const std::uint64_t r = next_u64();
    if (r >= limit) return r % n;
  }
}

cplx SeededRng::complex_gaussian() {
  // Box-Muller in polar form of the output: |z|^2 ~ Exp(1), phase uniform.
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  const double r = std::sqrt(-std::log(u1));
  const double phi = 2.0 * std::numbers::pi * u2;
  return {r * std::cos(phi), r * std::sin(phi)};
}

ComplexVec standard_complex_gaussian(SeededRng& rng, std::size_t n) {
  require(n >= 1, "standard_complex_gaussian: empty request (n == 0)");
  ComplexVec out(n);
  for (auto& v : out) v = rng.complex_gaussian();
  return out;
}

unsigned default_threads() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : n;
}

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n || failed.load()) return;
        try {
          body(i);
        } catch (...) {
          if (!failed.exchange(true)) error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::uint64_t fnv1a(std::span<const unsigned char> bytes, std::uint64_t h) {
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a(const std::string& s, std::uint64_t h) {
  return fnv1a(std::span<const unsigned char>(reinterpret_cast<const unsigned char*>(s.data()), s.size()), h);
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace cep
