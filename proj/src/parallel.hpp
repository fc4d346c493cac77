#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <span>
#include <vector>

#include "tep/core.hpp"

namespace tep::detail {

inline constexpr std::size_t kBlock = 1024;

// Collects the first exception thrown inside an OpenMP region so it can be
// rethrown on the calling thread.
class ExceptionSlot {
 public:
  template <typename Fn>
  void run(Fn&& fn) noexcept {
    try {
      fn();
    } catch (...) {
      std::lock_guard lock(mutex_);
      if (!error_) error_ = std::current_exception();
    }
  }
  void rethrow() const {
    if (error_) std::rethrow_exception(error_);
  }

 private:
  std::mutex mutex_;
  std::exception_ptr error_;
};

// Runs body(i) for i in [0, n); parallel over i unless exec is Serial.
template <typename Body>
void for_each_index(std::size_t n, Exec exec, Body body) {
  if (exec == Exec::Serial) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  ExceptionSlot slot;
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    slot.run([&] { body(static_cast<std::size_t>(i)); });
  }
  slot.rethrow();
}

inline std::size_t block_count(std::size_t n) { return (n + kBlock - 1) / kBlock; }

// Σ_i term(i) over [0, n). Parallel mode sums fixed blocks independently and
// combines them in block order; serial mode is a single left-to-right loop.
template <typename Term>
double reduce_sum(std::size_t n, Exec exec, Term term) {
  if (exec == Exec::Serial) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += term(i);
    return acc;
  }
  const std::size_t nb = block_count(n);
  std::vector<double> partial(nb, 0.0);
  ExceptionSlot slot;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(nb); ++b) {
    slot.run([&] {
      const std::size_t lo = static_cast<std::size_t>(b) * kBlock;
      const std::size_t hi = std::min(n, lo + kBlock);
      double acc = 0.0;
      for (std::size_t i = lo; i < hi; ++i) acc += term(i);
      partial[static_cast<std::size_t>(b)] = acc;
    });
  }
  slot.rethrow();
  double acc = 0.0;
  for (double v : partial) acc += v;
  return acc;
}

// Vector-valued version: accumulate(lo, hi, out) adds the terms of [lo, hi) into out.
template <typename Accumulate>
std::vector<double> reduce_vector(std::size_t n, std::size_t dim, Exec exec, Accumulate accumulate) {
  std::vector<double> total(dim, 0.0);
  if (exec == Exec::Serial) {
    accumulate(std::size_t{0}, n, std::span<double>(total));
    return total;
  }
  const std::size_t nb = block_count(n);
  std::vector<double> partial(nb * dim, 0.0);
  ExceptionSlot slot;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(nb); ++b) {
    slot.run([&] {
      const std::size_t lo = static_cast<std::size_t>(b) * kBlock;
      const std::size_t hi = std::min(n, lo + kBlock);
      accumulate(lo, hi, std::span<double>(partial).subspan(static_cast<std::size_t>(b) * dim, dim));
    });
  }
  slot.rethrow();
  for (std::size_t b = 0; b < nb; ++b) {
    for (std::size_t k = 0; k < dim; ++k) total[k] += partial[b * dim + k];
  }
  return total;
}

}  // namespace tep::detail
