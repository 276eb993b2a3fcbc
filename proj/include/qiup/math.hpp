#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <mutex>
#include <thread>
#include <vector>

namespace qiup {

// sin(x)/x. The series branch keeps the value exact to double precision
// through the removable singularity; at the cutoff the x^4 term is ~1e-18.
inline double sinc(double x) {
    if (std::abs(x) < 1e-4) return 1.0 - x * x / 6.0;
    return std::sin(x) / x;
}

struct QuadRule {
    std::vector<double> x;  // nodes on [-1, 1], ascending
    std::vector<double> w;
};

namespace detail {

inline QuadRule make_gauss_legendre(int n) {
    QuadRule r;
    r.x.resize(n);
    r.w.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        // Chebyshev-based initial guess, then Newton on P_n
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        r.x[i] = -x;
        r.x[n - 1 - i] = x;
        double w = 2.0 / ((1.0 - x * x) * dp * dp);
        r.w[i] = w;
        r.w[n - 1 - i] = w;
    }
    return r;
}

}

// Cached Gauss-Legendre rule of order n on [-1, 1].
inline const QuadRule& gauss_legendre(int n) {
    static std::map<int, QuadRule> cache;
    static std::mutex mtx;
    std::lock_guard<std::mutex> lock(mtx);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, detail::make_gauss_legendre(n)).first;
    return it->second;
}

struct MappedRule {
    std::vector<double> x, w;
};

inline MappedRule map_rule(int n, double a, double b) {
    const QuadRule& gl = gauss_legendre(n);
    MappedRule r;
    r.x.resize(n);
    r.w.resize(n);
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    for (int i = 0; i < n; ++i) {
        r.x[i] = mid + half * gl.x[i];
        r.w[i] = half * gl.w[i];
    }
    return r;
}

// Interval in sin(theta) coordinates; empty when lo >= hi.
struct SinWindow {
    double lo = 1.0, hi = -1.0;
    bool empty() const { return !(lo < hi); }
    SinWindow intersect(const SinWindow& o) const {
        return {std::max(lo, o.lo), std::min(hi, o.hi)};
    }
    static SinWindow full() { return {-1.0, 1.0}; }
};

// n points from -half to +half, mirrored exactly: x[n-1-i] == -x[i].
inline std::vector<double> symmetric_linspace(double half, int n) {
    std::vector<double> x(n);
    const double step = 2.0 * half / (n - 1);
    for (int i = 0; i <= (n - 1) / 2; ++i) {
        x[i] = -half + i * step;
        x[n - 1 - i] = -x[i];
    }
    return x;
}

// Value at xq of the parabola through (xs[k], ys[k]).
inline double quad_interp3(const double* xs, const double* ys, double xq) {
    double s = 0.0;
    for (int k = 0; k < 3; ++k) {
        double l = 1.0;
        for (int j = 0; j < 3; ++j)
            if (j != k) l *= (xq - xs[j]) / (xs[k] - xs[j]);
        s += ys[k] * l;
    }
    return s;
}

// Runs fn(i) for i in [0, n); contiguous chunks across at most `jobs` threads.
template <class F>
void parallel_for(std::size_t n, int jobs, F&& fn) {
    if (jobs <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const std::size_t nt = std::min<std::size_t>(jobs, n);
    std::vector<std::thread> threads;
    threads.reserve(nt);
    for (std::size_t t = 0; t < nt; ++t) {
        threads.emplace_back([&, t] {
            const std::size_t lo = n * t / nt, hi = n * (t + 1) / nt;
            for (std::size_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& th : threads) th.join();
}

}
