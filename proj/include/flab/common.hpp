#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace flab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Error taxonomy mirrored by the C API status codes and the CLI exit codes:
// validation problems (bad config, bad arguments) vs numerical failures
// (blow-up budgets, non-convergent solves, degenerate diffusions).
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

class EllipticityError : public NumericError {
 public:
  explicit EllipticityError(const std::string& msg) : NumericError(msg) {}
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ValidationError(msg);
}

// Neumaier compensated summation. Cross-path reductions must be
// order-independent up to the fixed path ordering, so aggregation fills
// per-index slots in parallel and reduces serially with this.
class KahanSum {
 public:
  void add(double x) {
    double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline double ksum(const std::vector<double>& xs) {
  KahanSum s;
  for (double x : xs) s.add(x);
  return s.value();
}

// Static partition of [0, n) over worker threads. Each job writes only its
// own output slots; results are deterministic for any thread count. The
// first worker exception is rethrown on the calling thread.
inline void parallel_for(std::int64_t n, int n_threads,
                         const std::function<void(std::int64_t)>& body) {
  if (n <= 0) return;
  if (n_threads <= 1 || n == 1) {
    for (std::int64_t i = 0; i < n; ++i) body(i);
    return;
  }
  int workers = static_cast<int>(std::min<std::int64_t>(n_threads, n));
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      try {
        for (std::int64_t i = w; i < n; i += workers) body(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline bool all_finite(const Vec& v) { return v.allFinite(); }
inline bool all_finite(const Mat& m) { return m.allFinite(); }

inline double sgn0(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

inline Vec sgn0(const Vec& v) {
  Vec out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) out[i] = sgn0(v[i]);
  return out;
}

}  // namespace flab
