#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cep {

using cplx = std::complex<double>;

/// Raised when an operation's preconditions (dimensions, ranges) are violated.
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// File-system or file-format failure.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Fixed-length complex vector.
class ComplexVec {
 public:
  ComplexVec() = default;
  explicit ComplexVec(std::size_t n, cplx fill = {}) : v_(n, fill) {}
  ComplexVec(std::initializer_list<cplx> il) : v_(il) {}
  explicit ComplexVec(std::vector<cplx> v) : v_(std::move(v)) {}

  std::size_t size() const { return v_.size(); }
  bool empty() const { return v_.empty(); }

  cplx& operator[](std::size_t i) { return v_[i]; }
  const cplx& operator[](std::size_t i) const { return v_[i]; }

  cplx* data() { return v_.data(); }
  const cplx* data() const { return v_.data(); }
  std::span<cplx> span() { return v_; }
  std::span<const cplx> span() const { return v_; }

  auto begin() { return v_.begin(); }
  auto end() { return v_.end(); }
  auto begin() const { return v_.begin(); }
  auto end() const { return v_.end(); }

  const std::vector<cplx>& values() const { return v_; }

  friend bool operator==(const ComplexVec&, const ComplexVec&) = default;

 private:
  std::vector<cplx> v_;
};

/// Row-major complex matrix (rows = users, cols = antennas for a channel).
class ComplexMat {
 public:
  ComplexMat() = default;
  ComplexMat(std::size_t rows, std::size_t cols, cplx fill = {})
      : rows_(rows), cols_(cols), v_(rows * cols, fill) {}
  ComplexMat(std::size_t rows, std::size_t cols, std::vector<cplx> entries);

  static ComplexMat identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  cplx& operator()(std::size_t r, std::size_t c) { return v_[r * cols_ + c]; }
  const cplx& operator()(std::size_t r, std::size_t c) const { return v_[r * cols_ + c]; }

  std::span<cplx> row(std::size_t r) { return {v_.data() + r * cols_, cols_}; }
  std::span<const cplx> row(std::size_t r) const { return {v_.data() + r * cols_, cols_}; }

  const std::vector<cplx>& values() const { return v_; }
  cplx* data() { return v_.data(); }
  const cplx* data() const { return v_.data(); }

  friend bool operator==(const ComplexMat&, const ComplexMat&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<cplx> v_;
};

// Products and norms. All throw ContractError on dimension mismatch.

ComplexVec matvec(const ComplexMat& h, const ComplexVec& x);
/// H^H y.
ComplexVec matvec_adjoint(const ComplexMat& h, const ComplexVec& y);
ComplexVec hadamard(const ComplexVec& a, const ComplexVec& b);

/// Real inner product Re{a^H b}.
double real_inner(const ComplexVec& a, const ComplexVec& b);
double norm_sq(const ComplexVec& a);
double frobenius_sq(const ComplexMat& h);

// Allocation-free kernels used on the solver hot path. Spans must be sized
// by the caller; no checks are performed.
namespace kernel {
void matvec(const ComplexMat& h, std::span<const cplx> x, std::span<cplx> out);
void matvec_adjoint(const ComplexMat& h, std::span<const cplx> y, std::span<cplx> out);
double real_inner(std::span<const cplx> a, std::span<const cplx> b);
}  // namespace kernel

/// xoshiro256** seeded through splitmix64. The stream depends only on the
/// seed, and the real-valued draws are built from raw 64-bit outputs, so a
/// seed reproduces the same sequence on every platform with IEEE doubles.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on [lo, hi).
  double uniform(double lo, double hi);
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  /// Circularly-symmetric N_C(0,1): real and imaginary parts each N(0, 1/2).
  cplx complex_gaussian();

  /// Independent child stream; children with distinct (seed, stream) pairs
  /// do not overlap in practice.
  static SeededRng derive(std::uint64_t seed, std::uint64_t stream);

 private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
};

std::uint64_t splitmix64(std::uint64_t& state);
/// Mixes two words into one seed.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

ComplexVec standard_complex_gaussian(SeededRng& rng, std::size_t n);

/// Runs body(i) for i in [0, n) over up to `threads` workers. Each index is
/// processed exactly once; callers store per-index results and reduce them
/// in index order, so outputs do not depend on the thread count.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body);

/// Default worker count (hardware concurrency, at least 1).
unsigned default_threads();

/// 64-bit FNV-1a, used for dataset and file fingerprints.
std::uint64_t fnv1a(std::span<const unsigned char> bytes, std::uint64_t h = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

}  // namespace cep
