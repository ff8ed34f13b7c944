// Shared error taxonomy and numeric helpers for the hierarchical
// maximum-entropy toolkit. Everything downstream distinguishes three
// failure classes: malformed inputs (schema_error), constraints outside
// the achievable range (infeasible_error), and numeric breakdown
// (numeric_error). The CLI maps these to exit codes 2 / 3 / 4.
#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace hime {

class schema_error : public std::invalid_argument {
public:
  explicit schema_error(const std::string& what) : std::invalid_argument(what) {}
};

class infeasible_error : public std::runtime_error {
public:
  explicit infeasible_error(const std::string& what) : std::runtime_error(what) {}
};

class numeric_error : public std::runtime_error {
public:
  explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

// Disjoint supports under a strict (0,1) interpolation exponent.
class degenerate_support_error : public numeric_error {
public:
  explicit degenerate_support_error(const std::string& what) : numeric_error(what) {}
};

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kPi = 3.14159265358979323846;

// Relative-entropy computations use +inf as an explicit absolute-continuity
// failure signal, never an exception, so sweeps can record it.
inline bool is_inf_signal(double x) { return std::isinf(x) && x > 0; }

// log(sum(exp(v))) with the usual max shift; empty input -> -inf.
inline double log_sum_exp(const std::vector<double>& v) {
  double m = -kInf;
  for (double x : v)
    if (x > m) m = x;
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

// log(cosh(x)) without overflow for |x| beyond ~350.
inline double log_cosh(double x) {
  const double a = std::fabs(x);
  return a + std::log1p(std::exp(-2.0 * a)) - std::log(2.0);
}

// x*log(x) with the 0*log 0 := 0 convention.
inline double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

// Worker cap: HIME_THREADS when set, hardware concurrency otherwise, >= 1.
inline unsigned thread_count() {
  if (const char* env = std::getenv("HIME_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && v >= 1) return static_cast<unsigned>(v);
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1u : hc;
}

// Runs fn(i) for i in [0, n) across at most thread_count() workers.
// Indices are pre-partitioned into contiguous stripes and every result is
// written by index on the caller's side, so the outcome is bitwise identical
// to a sequential loop.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(thread_count(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::exception_ptr first_error;
  std::mutex guard;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      const std::size_t lo = n * w / workers;
      const std::size_t hi = n * (w + 1) / workers;
      try {
        for (std::size_t i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lk(guard);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace hime
