#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>
#include <vector>

namespace ampere2d {

inline int thread_cap() {
    if (const char* env = std::getenv("AMPERE2D_THREADS")) {
        int n = std::atoi(env);
        if (n > 0) return n;
    }
    unsigned hc = std::thread::hardware_concurrency();
    return hc ? static_cast<int>(hc) : 1;
}

/// Runs body(i) for i in [begin, end) across worker threads. The body must
/// write only per-index state; chunking is contiguous so results do not
/// depend on the thread count.
template <class F>
inline void parallel_for(std::size_t begin, std::size_t end, F&& body) {
    const std::size_t n = end > begin ? end - begin : 0;
    std::size_t nt = std::min<std::size_t>(static_cast<std::size_t>(thread_cap()), n);
    if (nt <= 1) {
        for (std::size_t i = begin; i < end; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(nt);
    const std::size_t chunk = (n + nt - 1) / nt;
    for (std::size_t t = 0; t < nt; ++t) {
        std::size_t lo = begin + t * chunk;
        std::size_t hi = std::min(end, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &body] {
            for (std::size_t i = lo; i < hi; ++i) body(i);
        });
    }
    for (auto& th : pool) th.join();
}

struct Vec2 {
    double x = 0, y = 0;
    double norm() const { return std::hypot(x, y); }
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }

/// Symmetric 2x2 matrix stored as (xx, xy, yy).
struct SymMat2 {
    double xx = 0, xy = 0, yy = 0;

    double det() const { return xx * yy - xy * xy; }
    double trace() const { return xx + yy; }
    double eig_min() const {
        double m = 0.5 * (xx + yy);
        double h = std::hypot(0.5 * (xx - yy), xy);
        return m - h;
    }
    double eig_max() const {
        double m = 0.5 * (xx + yy);
        double h = std::hypot(0.5 * (xx - yy), xy);
        return m + h;
    }
};

inline Vec2 mat_vec(const SymMat2& m, Vec2 v) {
    return {m.xx * v.x + m.xy * v.y, m.xy * v.x + m.yy * v.y};
}

inline double sq(double x) { return x * x; }

}  // namespace ampere2d
