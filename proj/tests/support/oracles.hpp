// Independent reference computations shared by unit and acceptance tests.
// Nothing here calls into the library code under test.
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

namespace oracle {

/// Closed-form standard DH matrix.
inline Eigen::Matrix4d dh_matrix(double a, double alpha, double d, double theta) {
    const double ct = std::cos(theta), st = std::sin(theta), ca = std::cos(alpha), sa = std::sin(alpha);
    Eigen::Matrix4d m;
    m << ct, -st * ca, st * sa, a * ct,
         st, ct * ca, -ct * sa, a * st,
         0, sa, ca, d,
         0, 0, 0, 1;
    return m;
}

struct DhRow {
    double a, alpha, d, offset;
};

/// Joint origins by explicit matrix products.
inline std::vector<Eigen::Vector3d> joint_origins(const Eigen::Matrix4d& base, const std::vector<DhRow>& rows,
                                                  const std::vector<double>& q) {
    std::vector<Eigen::Vector3d> out;
    Eigen::Matrix4d t = base;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        t = t * dh_matrix(rows[i].a, rows[i].alpha, rows[i].d, q[i] + rows[i].offset);
        out.push_back(t.block<3, 1>(0, 3));
    }
    return out;
}

/// Minimum distance by sampling `per_segment` + 1 evenly spaced points on each segment.
inline double dense_min_distance(const std::vector<std::pair<Eigen::Vector3d, Eigen::Vector3d>>& segments,
                                 const std::vector<Eigen::Vector3d>& points, int per_segment = 10000) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& [a, b] : segments) {
        for (int k = 0; k <= per_segment; ++k) {
            const Eigen::Vector3d s = a + (b - a) * (double(k) / per_segment);
            for (const auto& p : points) best = std::min(best, (s - p).norm());
        }
    }
    return best;
}

/// Local maxima above `threshold` at least `refractory` seconds apart.
inline std::vector<double> peak_times(const std::vector<double>& t, const std::vector<double>& x, double threshold,
                                      double refractory) {
    std::vector<double> peaks;
    for (std::size_t i = 1; i + 1 < x.size(); ++i) {
        if (x[i] > threshold && x[i] >= x[i - 1] && x[i] > x[i + 1]) {
            if (!peaks.empty() && t[i] - peaks.back() < refractory) continue;
            // Parabolic refinement through the three samples.
            const double denom = x[i - 1] - 2 * x[i] + x[i + 1];
            const double shift = denom == 0 ? 0 : 0.5 * (x[i - 1] - x[i + 1]) / denom;
            peaks.push_back(t[i] + shift * (t[i + 1] - t[i]));
        }
    }
    return peaks;
}

/// Mean heart rate in bpm from successive peak times.
inline double heart_rate(const std::vector<double>& peaks) {
    if (peaks.size() < 2) return 0;
    return 60.0 * double(peaks.size() - 1) / (peaks.back() - peaks.front());
}

/// Golden-section maximum of a unimodal function on [lo, hi].
template <typename F>
double argmax(F f, double lo, double hi, double tol = 1e-10) {
    const double g = (std::sqrt(5.0) - 1) / 2;
    double a = lo, b = hi;
    while (b - a > tol) {
        const double c = b - g * (b - a), d = a + g * (b - a);
        if (f(c) > f(d)) b = d;
        else a = c;
    }
    return (a + b) / 2;
}

} // namespace oracle
