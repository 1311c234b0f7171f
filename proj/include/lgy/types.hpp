#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

namespace lgy {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

/// Skew matrix [v]_x so that crossMatrix(a)*b == a.cross(b).
inline Mat3 crossMatrix(const Vec3& a) {
    Mat3 m;
    m << 0.0, -a.z(), a.y(), a.z(), 0.0, -a.x(), -a.y(), a.x(), 0.0;
    return m;
}

namespace detail {

inline double pairwiseCombine(std::span<const double> parts) {
    // Fixed-shape reduction tree over the partials; independent of thread count.
    std::vector<double> buf(parts.begin(), parts.end());
    std::size_t n = buf.size();
    while (n > 1) {
        std::size_t half = (n + 1) / 2;
        for (std::size_t i = 0; i + half < n; ++i) buf[i] += buf[i + half];
        n = half;
    }
    return buf.empty() ? 0.0 : buf[0];
}

} // namespace detail

/// Deterministic sum: fixed 4096-element chunks, sequential within a chunk,
/// pairwise tree across chunk partials. The chunk layout depends only on the
/// array length, so the result is bitwise reproducible for any thread count.
double pairwiseSum(const double* p, std::size_t n);

/// Deterministic dot product with the same chunking scheme.
double pairwiseDot(const double* a, const double* b, std::size_t n);

/// Uniform double in [-1, 1) from a 64-bit state stream; identical on every
/// platform (no std::uniform_real_distribution).
inline double uniformSym(std::uint64_t bits) {
    return static_cast<double>(bits >> 11) * 0x1.0p-52 - 1.0;
}

} // namespace lgy
