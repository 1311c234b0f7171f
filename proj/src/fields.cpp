#include "lgy/fields.hpp"

#include <fftw3.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <mutex>
#include <random>
#include <vector>

// Parallel slabs only when the grid is large enough to beat the fork/join
// cost; reductions stay bitwise thread-count independent either way. Gated
// pragmas reference a local `ompBig`.
#if defined(_OPENMP)
#define LGY_OMP_FOR _Pragma("omp parallel for schedule(static)")
#define LGY_OMP_FOR_IF _Pragma("omp parallel for schedule(static) if(ompBig)")
#else
#define LGY_OMP_FOR
#define LGY_OMP_FOR_IF
#endif

namespace {
constexpr int kOmpMinSlabs = 48;
}

namespace lgy {

double pairwiseSum(const double* p, std::size_t n) {
    constexpr std::size_t C = 4096;
    const std::size_t nc = (n + C - 1) / C;
    if (nc == 0) return 0.0;
    std::vector<double> parts(nc);
    const bool ompBig = nc >= 64;
    (void)ompBig;
    LGY_OMP_FOR_IF
    for (std::int64_t c = 0; c < static_cast<std::int64_t>(nc); ++c) {
        const std::size_t b = static_cast<std::size_t>(c) * C;
        const std::size_t e = std::min(n, b + C);
        double s = 0.0;
        for (std::size_t i = b; i < e; ++i) s += p[i];
        parts[static_cast<std::size_t>(c)] = s;
    }
    return detail::pairwiseCombine(parts);
}

double pairwiseDot(const double* a, const double* b, std::size_t n) {
    constexpr std::size_t C = 4096;
    const std::size_t nc = (n + C - 1) / C;
    if (nc == 0) return 0.0;
    std::vector<double> parts(nc);
    const bool ompBig = nc >= 64;
    (void)ompBig;
    LGY_OMP_FOR_IF
    for (std::int64_t c = 0; c < static_cast<std::int64_t>(nc); ++c) {
        const std::size_t be = static_cast<std::size_t>(c) * C;
        const std::size_t e = std::min(n, be + C);
        double s = 0.0;
        for (std::size_t i = be; i < e; ++i) s += a[i] * b[i];
        parts[static_cast<std::size_t>(c)] = s;
    }
    return detail::pairwiseCombine(parts);
}

} // namespace lgy

namespace lgy::fields {

namespace {

template <class F>
double reduceSlabs(int nz, F&& slab) {
    std::vector<double> parts(static_cast<std::size_t>(nz));
    const bool ompBig = nz >= kOmpMinSlabs;
    (void)ompBig;
    LGY_OMP_FOR_IF
    for (int k = 0; k < nz; ++k) parts[static_cast<std::size_t>(k)] = slab(k);
    return detail::pairwiseCombine(parts);
}

template <class F>
Vec3 reduceSlabsVec3(int nz, F&& slab) {
    std::vector<double> px(static_cast<std::size_t>(nz)), py(px), pz(px);
    const bool ompBig = nz >= kOmpMinSlabs;
    (void)ompBig;
    LGY_OMP_FOR_IF
    for (int k = 0; k < nz; ++k) {
        const Vec3 s = slab(k);
        px[static_cast<std::size_t>(k)] = s.x();
        py[static_cast<std::size_t>(k)] = s.y();
        pz[static_cast<std::size_t>(k)] = s.z();
    }
    return {detail::pairwiseCombine(px), detail::pairwiseCombine(py), detail::pairwiseCombine(pz)};
}

} // namespace

// ---------------------------------------------------------------------------
// Grid / containers
// ---------------------------------------------------------------------------

Grid::Grid(int nx, int ny, int nz, double Lx, double Ly, double Lz)
    : nx_(nx), ny_(ny), nz_(nz), Lx_(Lx), Ly_(Ly), Lz_(Lz) {
    if (nx < 2 || ny < 2 || nz < 2) throw std::invalid_argument("Grid: cell counts must be >= 2");
    if (!(Lx > 0.0) || !(Ly > 0.0) || !(Lz > 0.0) || !std::isfinite(Lx + Ly + Lz))
        throw std::invalid_argument("Grid: dimensions must be positive and finite");
}

CellScalar::CellScalar(const Grid& g) : grid_(g), a_(Eigen::ArrayXd::Zero(g.cellCount())) {}

double CellScalar::mean() const {
    return pairwiseSum(a_.data(), static_cast<std::size_t>(a_.size())) / static_cast<double>(a_.size());
}

void CellScalar::removeMean() { a_ -= mean(); }

FaceField::FaceField(const Grid& g)
    : u(Eigen::ArrayXd::Zero(std::int64_t(g.nx() + 1) * g.ny() * g.nz())),
      v(Eigen::ArrayXd::Zero(std::int64_t(g.nx()) * (g.ny() + 1) * g.nz())),
      w(Eigen::ArrayXd::Zero(std::int64_t(g.nx()) * g.ny() * (g.nz() + 1))),
      grid_(g) {}

FaceField FaceField::sampled(const Grid& g, const std::function<Vec3(const Vec3&)>& f) {
    FaceField F(g);
    for (int k = 0; k < g.nz(); ++k)
        for (int j = 0; j < g.ny(); ++j)
            for (int i = 0; i <= g.nx(); ++i)
                F.uAt(i, j, k) = f(Vec3(g.xf(i), g.yc(j), g.zc(k))).x();
    for (int k = 0; k < g.nz(); ++k)
        for (int j = 0; j <= g.ny(); ++j)
            for (int i = 0; i < g.nx(); ++i)
                F.vAt(i, j, k) = f(Vec3(g.xc(i), g.yf(j), g.zc(k))).y();
    for (int k = 0; k <= g.nz(); ++k)
        for (int j = 0; j < g.ny(); ++j)
            for (int i = 0; i < g.nx(); ++i)
                F.wAt(i, j, k) = f(Vec3(g.xc(i), g.yc(j), g.zf(k))).z();
    return F;
}

void FaceField::setZero() {
    u.setZero();
    v.setZero();
    w.setZero();
}

void FaceField::zeroNormalBoundary() {
    const int nx = grid_.nx(), ny = grid_.ny(), nz = grid_.nz();
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j) {
            uAt(0, j, k) = 0.0;
            uAt(nx, j, k) = 0.0;
        }
    for (int k = 0; k < nz; ++k)
        for (int i = 0; i < nx; ++i) {
            vAt(i, 0, k) = 0.0;
            vAt(i, ny, k) = 0.0;
        }
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            wAt(i, j, 0) = 0.0;
            wAt(i, j, nz) = 0.0;
        }
}

bool FaceField::allFinite() const { return u.isFinite().all() && v.isFinite().all() && w.isFinite().all(); }

double FaceField::maxAbs() const {
    double m = 0.0;
    if (u.size()) m = std::max(m, u.abs().maxCoeff());
    if (v.size()) m = std::max(m, v.abs().maxCoeff());
    if (w.size()) m = std::max(m, w.abs().maxCoeff());
    return m;
}

double FaceField::maxNormalBoundary() const {
    const int nx = grid_.nx(), ny = grid_.ny(), nz = grid_.nz();
    double m = 0.0;
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            m = std::max({m, std::abs(uAt(0, j, k)), std::abs(uAt(nx, j, k))});
    for (int k = 0; k < nz; ++k)
        for (int i = 0; i < nx; ++i)
            m = std::max({m, std::abs(vAt(i, 0, k)), std::abs(vAt(i, ny, k))});
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i)
            m = std::max({m, std::abs(wAt(i, j, 0)), std::abs(wAt(i, j, nz))});
    return m;
}

FaceField& FaceField::operator+=(const FaceField& o) {
    u += o.u;
    v += o.v;
    w += o.w;
    return *this;
}

FaceField& FaceField::operator-=(const FaceField& o) {
    u -= o.u;
    v -= o.v;
    w -= o.w;
    return *this;
}

FaceField& FaceField::operator*=(double s) {
    u *= s;
    v *= s;
    w *= s;
    return *this;
}

// ---------------------------------------------------------------------------
// Stencils
// ---------------------------------------------------------------------------

void divergenceInto(const FaceField& V, CellScalar& out) {
    const Grid& g = V.grid();
    const int nx = g.nx(), ny = g.ny(), nz = g.nz();
    const bool ompBig = nz >= kOmpMinSlabs;
    (void)ompBig;
    const double ihx = 1.0 / g.hx(), ihy = 1.0 / g.hy(), ihz = 1.0 / g.hz();
    LGY_OMP_FOR_IF
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i)
                out.at(i, j, k) = (V.uAt(i + 1, j, k) - V.uAt(i, j, k)) * ihx +
                                  (V.vAt(i, j + 1, k) - V.vAt(i, j, k)) * ihy +
                                  (V.wAt(i, j, k + 1) - V.wAt(i, j, k)) * ihz;
}

CellScalar divergence(const FaceField& V) {
    CellScalar out(V.grid());
    divergenceInto(V, out);
    return out;
}

void gradientInto(const CellScalar& P, FaceField& out) {
    const Grid& g = P.grid();
    const int nx = g.nx(), ny = g.ny(), nz = g.nz();
    const bool ompBig = nz >= kOmpMinSlabs;
    (void)ompBig;
    const double ihx = 1.0 / g.hx(), ihy = 1.0 / g.hy(), ihz = 1.0 / g.hz();
    out.setZero();
    LGY_OMP_FOR_IF
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 1; i < nx; ++i)
                out.uAt(i, j, k) = (P.at(i, j, k) - P.at(i - 1, j, k)) * ihx;
    LGY_OMP_FOR_IF
    for (int k = 0; k < nz; ++k)
        for (int j = 1; j < ny; ++j)
            for (int i = 0; i < nx; ++i)
                out.vAt(i, j, k) = (P.at(i, j, k) - P.at(i, j - 1, k)) * ihy;
    LGY_OMP_FOR_IF
    for (int k = 1; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i)
                out.wAt(i, j, k) = (P.at(i, j, k) - P.at(i, j, k - 1)) * ihz;
}

FaceField gradient(const CellScalar& P) {
    FaceField out(P.grid());
    gradientInto(P, out);
    return out;
}

void subtractGradient(const CellScalar& P, FaceField& out) {
    const Grid& g = P.grid();
    const int nx = g.nx(), ny = g.ny(), nz = g.nz();
    const bool ompBig = nz >= kOmpMinSlabs;
    (void)ompBig;
    const double ihx = 1.0 / g.hx(), ihy = 1.0 / g.hy(), ihz = 1.0 / g.hz();
    LGY_OMP_FOR_IF
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 1; i < nx; ++i)
                out.uAt(i, j, k) -= (P.at(i, j, k) - P.at(i - 1, j, k)) * ihx;
    LGY_OMP_FOR_IF
    for (int k = 0; k < nz; ++k)
        for (int j = 1; j < ny; ++j)
            for (int i = 0; i < nx; ++i)
                out.vAt(i, j, k) -= (P.at(i, j, k) - P.at(i, j - 1, k)) * ihy;
    LGY_OMP_FOR_IF
    for (int k = 1; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i)
                out.wAt(i, j, k) -= (P.at(i, j, k) - P.at(i, j, k - 1)) * ihz;
}

void laplacianInto(const FaceField& V, FaceField& out) {
    const Grid& g = V.grid();
    const int nx = g.nx(), ny = g.ny(), nz = g.nz();
    const bool ompBig = nz >= kOmpMinSlabs;
    (void)ompBig;
    const double ix2 = 1.0 / (g.hx() * g.hx()), iy2 = 1.0 / (g.hy() * g.hy()), iz2 = 1.0 / (g.hz() * g.hz());
    out.setZero();

    // u on x-faces: Dirichlet values on the wall faces themselves (x), ghost
    // reflection across the tangential walls (y, z).
    LGY_OMP_FOR_IF
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 1; i < nx; ++i) {
                const double c = V.uAt(i, j, k);
                double d2 = (V.uAt(i + 1, j, k) - 2.0 * c + V.uAt(i - 1, j, k)) * ix2;
                if (j == 0)
                    d2 += (V.uAt(i, 1, k) - 3.0 * c) * iy2;
                else if (j == ny - 1)
                    d2 += (V.uAt(i, ny - 2, k) - 3.0 * c) * iy2;
                else
                    d2 += (V.uAt(i, j + 1, k) - 2.0 * c + V.uAt(i, j - 1, k)) * iy2;
                if (k == 0)
                    d2 += (V.uAt(i, j, 1) - 3.0 * c) * iz2;
                else if (k == nz - 1)
                    d2 += (V.uAt(i, j, nz - 2) - 3.0 * c) * iz2;
                else
                    d2 += (V.uAt(i, j, k + 1) - 2.0 * c + V.uAt(i, j, k - 1)) * iz2;
                out.uAt(i, j, k) = d2;
            }

    LGY_OMP_FOR_IF
    for (int k = 0; k < nz; ++k)
        for (int j = 1; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                const double c = V.vAt(i, j, k);
                double d2 = (V.vAt(i, j + 1, k) - 2.0 * c + V.vAt(i, j - 1, k)) * iy2;
                if (i == 0)
                    d2 += (V.vAt(1, j, k) - 3.0 * c) * ix2;
                else if (i == nx - 1)
                    d2 += (V.vAt(nx - 2, j, k) - 3.0 * c) * ix2;
                else
                    d2 += (V.vAt(i + 1, j, k) - 2.0 * c + V.vAt(i - 1, j, k)) * ix2;
                if (k == 0)
                    d2 += (V.vAt(i, j, 1) - 3.0 * c) * iz2;
                else if (k == nz - 1)
                    d2 += (V.vAt(i, j, nz - 2) - 3.0 * c) * iz2;
                else
                    d2 += (V.vAt(i, j, k + 1) - 2.0 * c + V.vAt(i, j, k - 1)) * iz2;
                out.vAt(i, j, k) = d2;
            }

    LGY_OMP_FOR_IF
    for (int k = 1; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                const double c = V.wAt(i, j, k);
                double d2 = (V.wAt(i, j, k + 1) - 2.0 * c + V.wAt(i, j, k - 1)) * iz2;
                if (i == 0)
                    d2 += (V.wAt(1, j, k) - 3.0 * c) * ix2;
                else if (i == nx - 1)
                    d2 += (V.wAt(nx - 2, j, k) - 3.0 * c) * ix2;
                else
                    d2 += (V.wAt(i + 1, j, k) - 2.0 * c + V.wAt(i - 1, j, k)) * ix2;
                if (j == 0)
                    d2 += (V.wAt(i, 1, k) - 3.0 * c) * iy2;
                else if (j == ny - 1)
                    d2 += (V.wAt(i, ny - 2, k) - 3.0 * c) * iy2;
                else
                    d2 += (V.wAt(i, j + 1, k) - 2.0 * c + V.wAt(i, j - 1, k)) * iy2;
                out.wAt(i, j, k) = d2;
            }
}

FaceField laplacian(const FaceField& V) {
    FaceField out(V.grid());
    laplacianInto(V, out);
    return out;
}

void advectInto(const FaceField& V, FaceField& out) {
    const Grid& g = V.grid();
    const int nx = g.nx(), ny = g.ny(), nz = g.nz();
    const bool ompBig = nz >= kOmpMinSlabs;
    (void)ompBig;
    const double i2hx = 0.5 / g.hx(), i2hy = 0.5 / g.hy(), i2hz = 0.5 / g.hz();
    out.setZero();

    LGY_OMP_FOR_IF
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 1; i < nx; ++i) {
                const double uc = V.uAt(i, j, k);
                const double dudx = (V.uAt(i + 1, j, k) - V.uAt(i - 1, j, k)) * i2hx;
                double dudy;
                if (j == 0)
                    dudy = (V.uAt(i, 1, k) + uc) * i2hy;  // ghost = -u(i,0,k)
                else if (j == ny - 1)
                    dudy = (-uc - V.uAt(i, ny - 2, k)) * i2hy;
                else
                    dudy = (V.uAt(i, j + 1, k) - V.uAt(i, j - 1, k)) * i2hy;
                double dudz;
                if (k == 0)
                    dudz = (V.uAt(i, j, 1) + uc) * i2hz;
                else if (k == nz - 1)
                    dudz = (-uc - V.uAt(i, j, nz - 2)) * i2hz;
                else
                    dudz = (V.uAt(i, j, k + 1) - V.uAt(i, j, k - 1)) * i2hz;
                const double vbar = 0.25 * (V.vAt(i - 1, j, k) + V.vAt(i - 1, j + 1, k) + V.vAt(i, j, k) + V.vAt(i, j + 1, k));
                const double wbar = 0.25 * (V.wAt(i - 1, j, k) + V.wAt(i - 1, j, k + 1) + V.wAt(i, j, k) + V.wAt(i, j, k + 1));
                out.uAt(i, j, k) = uc * dudx + vbar * dudy + wbar * dudz;
            }

    LGY_OMP_FOR_IF
    for (int k = 0; k < nz; ++k)
        for (int j = 1; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                const double vc = V.vAt(i, j, k);
                const double dvdy = (V.vAt(i, j + 1, k) - V.vAt(i, j - 1, k)) * i2hy;
                double dvdx;
                if (i == 0)
                    dvdx = (V.vAt(1, j, k) + vc) * i2hx;
                else if (i == nx - 1)
                    dvdx = (-vc - V.vAt(nx - 2, j, k)) * i2hx;
                else
                    dvdx = (V.vAt(i + 1, j, k) - V.vAt(i - 1, j, k)) * i2hx;
                double dvdz;
                if (k == 0)
                    dvdz = (V.vAt(i, j, 1) + vc) * i2hz;
                else if (k == nz - 1)
                    dvdz = (-vc - V.vAt(i, j, nz - 2)) * i2hz;
                else
                    dvdz = (V.vAt(i, j, k + 1) - V.vAt(i, j, k - 1)) * i2hz;
                const double ubar = 0.25 * (V.uAt(i, j - 1, k) + V.uAt(i + 1, j - 1, k) + V.uAt(i, j, k) + V.uAt(i + 1, j, k));
                const double wbar = 0.25 * (V.wAt(i, j - 1, k) + V.wAt(i, j - 1, k + 1) + V.wAt(i, j, k) + V.wAt(i, j, k + 1));
                out.vAt(i, j, k) = ubar * dvdx + vc * dvdy + wbar * dvdz;
            }

    LGY_OMP_FOR_IF
    for (int k = 1; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                const double wc = V.wAt(i, j, k);
                const double dwdz = (V.wAt(i, j, k + 1) - V.wAt(i, j, k - 1)) * i2hz;
                double dwdx;
                if (i == 0)
                    dwdx = (V.wAt(1, j, k) + wc) * i2hx;
                else if (i == nx - 1)
                    dwdx = (-wc - V.wAt(nx - 2, j, k)) * i2hx;
                else
                    dwdx = (V.wAt(i + 1, j, k) - V.wAt(i - 1, j, k)) * i2hx;
                double dwdy;
                if (j == 0)
                    dwdy = (V.wAt(i, 1, k) + wc) * i2hy;
                else if (j == ny - 1)
                    dwdy = (-wc - V.wAt(i, ny - 2, k)) * i2hy;
                else
                    dwdy = (V.wAt(i, j + 1, k) - V.wAt(i, j - 1, k)) * i2hy;
                const double ubar = 0.25 * (V.uAt(i, j, k - 1) + V.uAt(i + 1, j, k - 1) + V.uAt(i, j, k) + V.uAt(i + 1, j, k));
                const double vbar = 0.25 * (V.vAt(i, j, k - 1) + V.vAt(i, j + 1, k - 1) + V.vAt(i, j, k) + V.vAt(i, j + 1, k));
                out.wAt(i, j, k) = ubar * dwdx + vbar * dwdy + wc * dwdz;
            }
}

FaceField advect(const FaceField& V) {
    FaceField out(V.grid());
    advectInto(V, out);
    return out;
}

void coriolisInto(const FaceField& V, const Vec3& omega, FaceField& out) {
    const Grid& g = V.grid();
    const int nx = g.nx(), ny = g.ny(), nz = g.nz();
    const bool ompBig = nz >= kOmpMinSlabs;
    (void)ompBig;
    const double wx = omega.x(), wy = omega.y(), wz = omega.z();
    out.setZero();
    LGY_OMP_FOR_IF
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 1; i < nx; ++i) {
                const double vbar = 0.25 * (V.vAt(i - 1, j, k) + V.vAt(i - 1, j + 1, k) + V.vAt(i, j, k) + V.vAt(i, j + 1, k));
                const double wbar = 0.25 * (V.wAt(i - 1, j, k) + V.wAt(i - 1, j, k + 1) + V.wAt(i, j, k) + V.wAt(i, j, k + 1));
                out.uAt(i, j, k) = wy * wbar - wz * vbar;
            }
    LGY_OMP_FOR_IF
    for (int k = 0; k < nz; ++k)
        for (int j = 1; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                const double ubar = 0.25 * (V.uAt(i, j - 1, k) + V.uAt(i + 1, j - 1, k) + V.uAt(i, j, k) + V.uAt(i + 1, j, k));
                const double wbar = 0.25 * (V.wAt(i, j - 1, k) + V.wAt(i, j - 1, k + 1) + V.wAt(i, j, k) + V.wAt(i, j, k + 1));
                out.vAt(i, j, k) = wz * ubar - wx * wbar;
            }
    LGY_OMP_FOR_IF
    for (int k = 1; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                const double ubar = 0.25 * (V.uAt(i, j, k - 1) + V.uAt(i + 1, j, k - 1) + V.uAt(i, j, k) + V.uAt(i + 1, j, k));
                const double vbar = 0.25 * (V.vAt(i, j, k - 1) + V.vAt(i, j + 1, k - 1) + V.vAt(i, j, k) + V.vAt(i, j + 1, k));
                out.wAt(i, j, k) = wx * vbar - wy * ubar;
            }
}

Vec3 angular_moment(const FaceField& V) {
    const Grid& g = V.grid();
    const int nx = g.nx(), ny = g.ny();
    const Vec3 sum = reduceSlabsVec3(g.nz(), [&](int k) {
        Vec3 s = Vec3::Zero();
        const double z = g.zc(k);
        for (int j = 0; j < ny; ++j) {
            const double y = g.yc(j);
            for (int i = 0; i < nx; ++i) {
                const double x = g.xc(i);
                const double uc = 0.5 * (V.uAt(i, j, k) + V.uAt(i + 1, j, k));
                const double vc = 0.5 * (V.vAt(i, j, k) + V.vAt(i, j + 1, k));
                const double wc = 0.5 * (V.wAt(i, j, k) + V.wAt(i, j, k + 1));
                s.x() += y * wc - z * vc;
                s.y() += z * uc - x * wc;
                s.z() += x * vc - y * uc;
            }
        }
        return s;
    });
    return sum * g.cellVolume();
}

double inner(const FaceField& a, const FaceField& b) {
    const Grid& g = a.grid();
    const int nx = g.nx(), ny = g.ny(), nz = g.nz();
    const double s = reduceSlabs(nz, [&](int k) {
        double acc = 0.0;
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i <= nx; ++i) {
                double t = a.uAt(i, j, k) * b.uAt(i, j, k);
                if (i == 0 || i == nx) t *= 0.5;
                acc += t;
            }
        for (int j = 0; j <= ny; ++j)
            for (int i = 0; i < nx; ++i) {
                double t = a.vAt(i, j, k) * b.vAt(i, j, k);
                if (j == 0 || j == ny) t *= 0.5;
                acc += t;
            }
        return acc;
    });
    // w faces: one extra k-plane.
    const double sw = reduceSlabs(nz + 1, [&](int k) {
        double acc = 0.0;
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                double t = a.wAt(i, j, k) * b.wAt(i, j, k);
                if (k == 0 || k == nz) t *= 0.5;
                acc += t;
            }
        return acc;
    });
    return (s + sw) * g.cellVolume();
}

double inner(const CellScalar& a, const CellScalar& b) {
    return pairwiseDot(a.data().data(), b.data().data(), static_cast<std::size_t>(a.data().size())) *
           a.grid().cellVolume();
}

double l2_norm(const FaceField& V) { return std::sqrt(std::max(0.0, inner(V, V))); }

double l2_norm(const CellScalar& P) { return std::sqrt(std::max(0.0, inner(P, P))); }

double h1_seminorm(const FaceField& V) {
    const Grid& g = V.grid();
    const int nx = g.nx(), ny = g.ny(), nz = g.nz();
    const double ix2 = 1.0 / (g.hx() * g.hx()), iy2 = 1.0 / (g.hy() * g.hy()), iz2 = 1.0 / (g.hz() * g.hz());

    const double su = reduceSlabs(nz, [&](int k) {
        double acc = 0.0;
        for (int j = 0; j < ny; ++j) {
            for (int i = 0; i < nx; ++i) {
                const double d = V.uAt(i + 1, j, k) - V.uAt(i, j, k);
                acc += d * d * ix2;
            }
            for (int i = 1; i < nx; ++i) {
                const double c = V.uAt(i, j, k);
                if (j == 0 || j == ny - 1) acc += 2.0 * c * c * iy2;
                if (j + 1 < ny) {
                    const double d = V.uAt(i, j + 1, k) - c;
                    acc += d * d * iy2;
                }
                if (k == 0 || k == nz - 1) acc += 2.0 * c * c * iz2;
                if (k + 1 < nz) {
                    const double d = V.uAt(i, j, k + 1) - c;
                    acc += d * d * iz2;
                }
            }
        }
        return acc;
    });

    const double sv = reduceSlabs(nz, [&](int k) {
        double acc = 0.0;
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                const double d = V.vAt(i, j + 1, k) - V.vAt(i, j, k);
                acc += d * d * iy2;
            }
        for (int j = 1; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                const double c = V.vAt(i, j, k);
                if (i == 0 || i == nx - 1) acc += 2.0 * c * c * ix2;
                if (i + 1 < nx) {
                    const double d = V.vAt(i + 1, j, k) - c;
                    acc += d * d * ix2;
                }
                if (k == 0 || k == nz - 1) acc += 2.0 * c * c * iz2;
                if (k + 1 < nz) {
                    const double d = V.vAt(i, j, k + 1) - c;
                    acc += d * d * iz2;
                }
            }
        return acc;
    });

    const double swz = reduceSlabs(nz, [&](int k) {
        double acc = 0.0;
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                const double d = V.wAt(i, j, k + 1) - V.wAt(i, j, k);
                acc += d * d * iz2;
            }
        return acc;
    });
    const double swt = reduceSlabs(nz - 1, [&](int km) {
        const int k = km + 1;  // interior z-faces
        double acc = 0.0;
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                const double c = V.wAt(i, j, k);
                if (i == 0 || i == nx - 1) acc += 2.0 * c * c * ix2;
                if (i + 1 < nx) {
                    const double d = V.wAt(i + 1, j, k) - c;
                    acc += d * d * ix2;
                }
                if (j == 0 || j == ny - 1) acc += 2.0 * c * c * iy2;
                if (j + 1 < ny) {
                    const double d = V.wAt(i, j + 1, k) - c;
                    acc += d * d * iy2;
                }
            }
        return acc;
    });

    return std::sqrt(std::max(0.0, (su + sv + swz + swt) * g.cellVolume()));
}

// ---------------------------------------------------------------------------
// FFTW-backed Neumann Poisson solve
// ---------------------------------------------------------------------------

namespace {

std::mutex& fftwPlannerMutex() {
    static std::mutex m;
    return m;
}

struct R2RPlan {
    fftw_plan plan = nullptr;

    R2RPlan() = default;
    R2RPlan(const R2RPlan&) = delete;
    R2RPlan& operator=(const R2RPlan&) = delete;
    ~R2RPlan() {
        if (plan) {
            std::lock_guard<std::mutex> lock(fftwPlannerMutex());
            fftw_destroy_plan(plan);
        }
    }

    // One batched 1D r2r transform along an axis of a 3D array, planned with
    // the guru interface. ESTIMATE keeps the algorithm choice deterministic.
    void build(int n, std::int64_t stride, std::array<std::pair<std::int64_t, std::int64_t>, 2> batch,
               fftw_r2r_kind kind, double* buf) {
        fftw_iodim64 dim{n, stride, stride};
        fftw_iodim64 hm[2];
        for (int d = 0; d < 2; ++d) hm[d] = {batch[static_cast<std::size_t>(d)].first, batch[static_cast<std::size_t>(d)].second, batch[static_cast<std::size_t>(d)].second};
        std::lock_guard<std::mutex> lock(fftwPlannerMutex());
        plan = fftw_plan_guru64_r2r(1, &dim, 2, hm, buf, buf, &kind, FFTW_ESTIMATE);
        if (!plan) throw SolverFailure("fftw plan creation failed");
    }

    void exec(double* buf) const { fftw_execute_r2r(plan, buf, buf); }
};

} // namespace

namespace {

// Cache-blocked out-of-place 2D transpose: out (cols x rows) = in^T (rows x cols),
// both column-major with unit-stride rows.
void transpose2d(const double* in, double* out, std::int64_t rows, std::int64_t cols) {
    constexpr std::int64_t B = 32;
    for (std::int64_t jb = 0; jb < cols; jb += B)
        for (std::int64_t ib = 0; ib < rows; ib += B) {
            const std::int64_t je = std::min(cols, jb + B), ie = std::min(rows, ib + B);
            for (std::int64_t j = jb; j < je; ++j)
                for (std::int64_t i = ib; i < ie; ++i) out[j + cols * i] = in[i + rows * j];
        }
}

} // namespace

struct PoissonNeumann::Impl {
    // All transforms run along the fastest axis (contiguous batches); the
    // cyclic transposes (x,y,z)->(y,z,x) are 2D transposes of the flat array.
    R2RPlan fx, fy, fz, ix, iy, iz;
    VecX lx, ly, lz;
    Eigen::ArrayXd factor;  // -1/((lx+ly+lz) 8 nx ny nz) in (z,x,y) layout; 0 at the gauge mode
    Eigen::ArrayXd buf;     // transpose scratch
    Eigen::ArrayXd probe;
};

PoissonNeumann::PoissonNeumann(const Grid& g) : grid_(g), impl_(std::make_unique<Impl>()) {
    const int nx = g.nx(), ny = g.ny(), nz = g.nz();
    const std::int64_t total = g.cellCount();
    impl_->probe.setZero(total);
    impl_->buf.setZero(total);
    double* buf = impl_->probe.data();

    auto contiguous = [&](R2RPlan& p, int n, fftw_r2r_kind kind) {
        p.build(n, 1, {{{total / n, n}, {1, total}}}, kind, buf);
    };
    contiguous(impl_->fx, nx, FFTW_REDFT10);
    contiguous(impl_->fy, ny, FFTW_REDFT10);
    contiguous(impl_->fz, nz, FFTW_REDFT10);
    contiguous(impl_->ix, nx, FFTW_REDFT01);
    contiguous(impl_->iy, ny, FFTW_REDFT01);
    contiguous(impl_->iz, nz, FFTW_REDFT01);

    auto eigs = [](int n, double h) {
        VecX l(n);
        for (int m = 0; m < n; ++m) {
            const double s = std::sin(0.5 * M_PI * m / n);
            l[m] = 4.0 / (h * h) * s * s;
        }
        return l;
    };
    impl_->lx = eigs(nx, g.hx());
    impl_->ly = eigs(ny, g.hy());
    impl_->lz = eigs(nz, g.hz());
    impl_->scale = 1.0 / (8.0 * nx * ny * nz);
}

PoissonNeumann::~PoissonNeumann() = default;

void PoissonNeumann::solve(CellScalar& f) {
    if (f.grid() != grid_) throw std::invalid_argument("PoissonNeumann: grid mismatch");
    const int nx = grid_.nx(), ny = grid_.ny(), nz = grid_.nz();
    const std::int64_t total = grid_.cellCount();
    double* a = f.data().data();
    double* b = impl_->buf.data();

    // forward: DCT-x, cycle to (y,z,x), DCT-y, cycle to (z,x,y), DCT-z
    impl_->fx.exec(a);
    transpose2d(a, b, nx, total / nx);
    impl_->fy.exec(b);
    transpose2d(b, a, ny, total / ny);
    impl_->fz.exec(a);

    // spectral scale in (z,x,y) layout
    {
        const double sc = impl_->scale;
        const VecX &lx = impl_->lx, &ly = impl_->ly, &lz = impl_->lz;
        const bool ompBig = ny >= kOmpMinSlabs;
        (void)ompBig;
        LGY_OMP_FOR_IF
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                double* col = a + std::int64_t(nz) * (i + std::int64_t(nx) * j);
                const double lxy = lx[i] + ly[j];
                for (int k = 0; k < nz; ++k) {
                    const double den = lz[k] + lxy;
                    // div(grad) modes carry -den; the (0,0,0) mode fixes the gauge.
                    col[k] = (den > 0.0) ? -col[k] / den * sc : 0.0;
                }
            }
    }

    // inverse: iDCT-z, reverse-cycle to (y,z,x), iDCT-y, reverse-cycle to
    // (x,y,z), iDCT-x; ends in the caller's buffer.
    impl_->iz.exec(a);
    transpose2d(a, b, total / ny, ny);  // (z,x,y) -> (y,z,x)
    impl_->iy.exec(b);
    transpose2d(b, a, total / nx, nx);  // (y,z,x) -> (x,y,z)
    impl_->ix.exec(a);
}

// ---------------------------------------------------------------------------
// Projection
// ---------------------------------------------------------------------------

Projector::Projector(const Grid& g) : grid_(g), poisson_(g), work_(g) {}

void Projector::applyInPlace(FaceField& V, CellScalar& phi_out, double tol) {
    divergenceInto(V, work_);
    const double pre = work_.data().size() ? work_.data().abs().maxCoeff() : 0.0;

    poisson_.solve(work_);
    phi_out.data() = work_.data();
    subtractGradient(work_, V);

    divergenceInto(V, work_);
    const double post = work_.data().size() ? work_.data().abs().maxCoeff() : 0.0;

    // The transform solve is exact for the discrete operator; `post` is the
    // solve residual itself. Accept either a clean relative reduction or a
    // roundoff-level absolute value when the input was already solenoidal.
    const double floor_abs = 1e-12 * (V.maxAbs() / grid_.hmin() + std::numeric_limits<double>::min());
    const bool ok = (post == 0.0) || (post <= tol * pre) || (post <= floor_abs);
    if (!ok) throw SolverFailure("projection residual " + std::to_string(post) + " (pre " + std::to_string(pre) + ")");
}

Projection Projector::apply(const FaceField& V) {
    Projection out{V, CellScalar(grid_), 0.0};
    divergenceInto(V, work_);
    const double pre = work_.data().size() ? work_.data().abs().maxCoeff() : 0.0;
    applyInPlace(out.field, out.phi);
    CellScalar post = divergence(out.field);
    const double p = post.data().size() ? post.data().abs().maxCoeff() : 0.0;
    out.residual = (pre > 0.0) ? p / pre : 0.0;
    return out;
}

Projection project(const FaceField& V) {
    Projector pr(V.grid());
    return pr.apply(V);
}

// ---------------------------------------------------------------------------
// Solenoidal initial data
// ---------------------------------------------------------------------------

namespace {

// Tables of sin^2(pi m X) at node and center positions, one contiguous
// column of mode values per position.
struct AxisTable {
    MatX node;    // M x (n+1)
    MatX center;  // M x n
};

AxisTable axisTable(int n, int modes) {
    AxisTable t;
    t.node.resize(modes, n + 1);
    t.center.resize(modes, n);
    for (int m = 1; m <= modes; ++m) {
        for (int i = 0; i <= n; ++i) {
            const double s = std::sin(M_PI * m * (double(i) / n));
            t.node(m - 1, i) = s * s;
        }
        for (int i = 0; i < n; ++i) {
            const double s = std::sin(M_PI * m * ((i + 0.5) / n));
            t.center(m - 1, i) = s * s;
        }
    }
    return t;
}

} // namespace

FaceField synth_solenoidal_ic(const Grid& g, std::uint64_t seed, double target_h1_amplitude) {
    FaceField V(g);
    if (target_h1_amplitude == 0.0) return V;
    if (!(target_h1_amplitude > 0.0)) throw std::invalid_argument("synth_solenoidal_ic: amplitude must be >= 0");

    constexpr int M = 3;
    std::mt19937_64 rng(seed);
    // coeff[c][mx][my][mz]
    std::array<std::array<std::array<std::array<double, M>, M>, M>, 3> coef{};
    for (int c = 0; c < 3; ++c)
        for (int mx = 0; mx < M; ++mx)
            for (int my = 0; my < M; ++my)
                for (int mz = 0; mz < M; ++mz) {
                    const double damp = 1.0 / double((mx + 1) * (mx + 1) + (my + 1) * (my + 1) + (mz + 1) * (mz + 1));
                    coef[c][mx][my][mz] = uniformSym(rng()) * damp;
                }

    const AxisTable tx = axisTable(g.nx(), M), ty = axisTable(g.ny(), M), tz = axisTable(g.nz(), M);

    auto psi = [&](int c, const double* fx, const double* fy, const double* fz) {
        double s = 0.0;
        for (int mx = 0; mx < M; ++mx)
            for (int my = 0; my < M; ++my)
                for (int mz = 0; mz < M; ++mz) s += coef[c][mx][my][mz] * fx[mx] * fy[my] * fz[mz];
        return s;
    };

    const int nx = g.nx(), ny = g.ny(), nz = g.nz();
    const double ihy = 1.0 / g.hy(), ihz = 1.0 / g.hz(), ihx = 1.0 / g.hx();

    // psi_z on z-edges (node x, node y, center z); psi_y on y-edges.
    // u = d(psi_z)/dy - d(psi_y)/dz, evaluated at x-faces.
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i <= nx; ++i) {
                const double pz1 = psi(2, &tx.node(0, i), &ty.node(0, j + 1), &tz.center(0, k));
                const double pz0 = psi(2, &tx.node(0, i), &ty.node(0, j), &tz.center(0, k));
                const double py1 = psi(1, &tx.node(0, i), &ty.center(0, j), &tz.node(0, k + 1));
                const double py0 = psi(1, &tx.node(0, i), &ty.center(0, j), &tz.node(0, k));
                V.uAt(i, j, k) = (pz1 - pz0) * ihy - (py1 - py0) * ihz;
            }
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j <= ny; ++j)
            for (int i = 0; i < nx; ++i) {
                const double px1 = psi(0, &tx.center(0, i), &ty.node(0, j), &tz.node(0, k + 1));
                const double px0 = psi(0, &tx.center(0, i), &ty.node(0, j), &tz.node(0, k));
                const double pz1 = psi(2, &tx.node(0, i + 1), &ty.node(0, j), &tz.center(0, k));
                const double pz0 = psi(2, &tx.node(0, i), &ty.node(0, j), &tz.center(0, k));
                V.vAt(i, j, k) = (px1 - px0) * ihz - (pz1 - pz0) * ihx;
            }
    for (int k = 0; k <= nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                const double py1 = psi(1, &tx.node(0, i + 1), &ty.center(0, j), &tz.node(0, k));
                const double py0 = psi(1, &tx.node(0, i), &ty.center(0, j), &tz.node(0, k));
                const double px1 = psi(0, &tx.center(0, i), &ty.node(0, j + 1), &tz.node(0, k));
                const double px0 = psi(0, &tx.center(0, i), &ty.node(0, j), &tz.node(0, k));
                V.wAt(i, j, k) = (py1 - py0) * ihx - (px1 - px0) * ihy;
            }

    Projector pr(g);
    CellScalar phi(g);
    pr.applyInPlace(V, phi);  // wall faces stay exactly zero: the gradient never touches them

    const double h1 = h1_seminorm(V);
    if (h1 == 0.0) throw SolverFailure("synth_solenoidal_ic produced a null field");
    V *= target_h1_amplitude / h1;
    return V;
}

} // namespace lgy::fields
