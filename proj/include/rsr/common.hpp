#pragma once

#include <array>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace rsr {

// Maximum supported state dimension. Benchmark systems use 1 and 2;
// grid-based dynamic programming above 4 dimensions is impractical.
inline constexpr int kMaxDim = 4;

// Fixed-size state/control vector, no heap traffic in hot loops.
using Vec = std::array<double, kMaxDim>;

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

// Error taxonomy. The CLI maps these to distinct exit codes.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/** Neumaier compensated accumulator. Keeps long sums accurate to a few ulps
 *  so that dual/primal CVaR routes agree far inside the 1e-12 gate. */
class StableSum {
  public:
    void add(double x) {
        double t = s_ + x;
        if (std::abs(s_) >= std::abs(x))
            c_ += (s_ - t) + x;
        else
            c_ += (x - t) + s_;
        s_ = t;
    }
    double value() const { return s_ + c_; }

  private:
    double s_ = 0.0;
    double c_ = 0.0;
};

inline double clamp(double x, double lo, double hi) {
    return x < lo ? lo : (x > hi ? hi : x);
}

inline bool finite(double x) { return std::isfinite(x); }

/** Inverse standard normal CDF. Acklam's rational approximation refined by
 *  one Halley step against erfc, accurate to ~1e-15 over (0,1). */
inline double inverse_normal_cdf(double p) {
    if (!(p > 0.0 && p < 1.0))
        throw ValidationError("inverse_normal_cdf: p must lie in (0,1), got " + std::to_string(p));
    static constexpr double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                    -2.759285104469687e+02, 1.383577518672690e+02,
                                    -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                    -1.556989798598866e+02, 6.680131188771972e+01,
                                    -1.328068155288572e+01};
    static constexpr double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                    -2.400758277161838e+00, -2.549732539343734e+00,
                                    4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                    2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;
    double x;
    if (p < plow) {
        double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - plow) {
        double q = p - 0.5;
        double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    // Halley refinement: e = Phi(x) - p
    double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
    double u = e * std::sqrt(2.0 * M_PI) * std::exp(x * x / 2.0);
    x = x - u / (1.0 + x * u / 2.0);
    return x;
}

/** Runs fn(i) for i in [0,n) on up to n_threads workers. Each index is handled
 *  exactly once; callers write to disjoint slots so results are deterministic
 *  regardless of thread count. n_threads <= 1 runs inline. The first exception
 *  thrown by fn stops the sweep and is rethrown on the calling thread. */
template <class Fn>
void parallel_for(std::size_t n, const Fn& fn, unsigned n_threads) {
    if (n == 0) return;
    unsigned hw = std::thread::hardware_concurrency();
    if (n_threads == 0) n_threads = hw ? hw : 1;
    if (n_threads > n) n_threads = static_cast<unsigned>(n);
    if (n_threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    std::exception_ptr err;
    std::mutex err_mu;
    std::atomic<bool> stop{false};
    for (unsigned w = 0; w < n_threads; ++w) {
        pool.emplace_back([&, w]() {
            try {
                for (std::size_t i = w; i < n; i += n_threads) {
                    if (stop.load(std::memory_order_relaxed)) return;
                    fn(i);
                }
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mu);
                if (!err) err = std::current_exception();
                stop.store(true, std::memory_order_relaxed);
            }
        });
    }
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

}  // namespace rsr
