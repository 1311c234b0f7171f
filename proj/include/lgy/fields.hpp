#pragma once

#include "lgy/types.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>

namespace lgy::fields {

/// Uniform box grid centered at the origin (the center of mass).
class Grid {
public:
    Grid(int nx, int ny, int nz, double Lx, double Ly, double Lz);

    int nx() const { return nx_; }
    int ny() const { return ny_; }
    int nz() const { return nz_; }
    double Lx() const { return Lx_; }
    double Ly() const { return Ly_; }
    double Lz() const { return Lz_; }
    double hx() const { return Lx_ / nx_; }
    double hy() const { return Ly_ / ny_; }
    double hz() const { return Lz_ / nz_; }
    double hmin() const { return std::min(hx(), std::min(hy(), hz())); }
    double cellVolume() const { return hx() * hy() * hz(); }
    std::int64_t cellCount() const { return std::int64_t(nx_) * ny_ * nz_; }

    // Face (node) and cell-center coordinates per axis.
    double xf(int i) const { return -0.5 * Lx_ + i * hx(); }
    double yf(int j) const { return -0.5 * Ly_ + j * hy(); }
    double zf(int k) const { return -0.5 * Lz_ + k * hz(); }
    double xc(int i) const { return -0.5 * Lx_ + (i + 0.5) * hx(); }
    double yc(int j) const { return -0.5 * Ly_ + (j + 0.5) * hy(); }
    double zc(int k) const { return -0.5 * Lz_ + (k + 0.5) * hz(); }

    bool operator==(const Grid& o) const = default;

private:
    int nx_, ny_, nz_;
    double Lx_, Ly_, Lz_;
};

/// Scalar samples at cell centers (pressure, divergence). Stored x-fastest.
class CellScalar {
public:
    explicit CellScalar(const Grid& g);

    const Grid& grid() const { return grid_; }
    Eigen::ArrayXd& data() { return a_; }
    const Eigen::ArrayXd& data() const { return a_; }

    double& at(int i, int j, int k) { return a_[i + std::int64_t(grid_.nx()) * (j + std::int64_t(grid_.ny()) * k)]; }
    double at(int i, int j, int k) const { return a_[i + std::int64_t(grid_.nx()) * (j + std::int64_t(grid_.ny()) * k)]; }

    double mean() const;
    void removeMean();

private:
    Grid grid_;
    Eigen::ArrayXd a_;
};

/// MAC staggered velocity: face-normal components u (x-faces), v (y-faces),
/// w (z-faces). Faces on the walls belong to the arrays; fields that enter
/// the time integrator must carry exact zeros there (no-penetration).
class FaceField {
public:
    explicit FaceField(const Grid& g);

    /// Sample an analytic vector field at every face, including wall faces.
    /// Quadrature tests rely on the un-zeroed wall values.
    static FaceField sampled(const Grid& g, const std::function<Vec3(const Vec3&)>& f);

    const Grid& grid() const { return grid_; }

    Eigen::ArrayXd u, v, w;

    std::int64_t uSize() const { return u.size(); }

    double& uAt(int i, int j, int k) { return u[i + std::int64_t(grid_.nx() + 1) * (j + std::int64_t(grid_.ny()) * k)]; }
    double uAt(int i, int j, int k) const { return u[i + std::int64_t(grid_.nx() + 1) * (j + std::int64_t(grid_.ny()) * k)]; }
    double& vAt(int i, int j, int k) { return v[i + std::int64_t(grid_.nx()) * (j + std::int64_t(grid_.ny() + 1) * k)]; }
    double vAt(int i, int j, int k) const { return v[i + std::int64_t(grid_.nx()) * (j + std::int64_t(grid_.ny() + 1) * k)]; }
    double& wAt(int i, int j, int k) { return w[i + std::int64_t(grid_.nx()) * (j + std::int64_t(grid_.ny()) * k)]; }
    double wAt(int i, int j, int k) const { return w[i + std::int64_t(grid_.nx()) * (j + std::int64_t(grid_.ny()) * k)]; }

    void setZero();
    void zeroNormalBoundary();
    bool allFinite() const;
    double maxAbs() const;
    /// Largest |value| over faces lying in the wall planes.
    double maxNormalBoundary() const;

    FaceField& operator+=(const FaceField& o);
    FaceField& operator-=(const FaceField& o);
    FaceField& operator*=(double s);

private:
    Grid grid_;
};

// ---------------------------------------------------------------------------
// Discrete vector calculus (second-order MAC stencils)
// ---------------------------------------------------------------------------

CellScalar divergence(const FaceField& V);
void divergenceInto(const FaceField& V, CellScalar& out);

/// Gradient of a cell scalar onto faces; wall faces get exactly 0 (Neumann).
FaceField gradient(const CellScalar& P);
void gradientInto(const CellScalar& P, FaceField& out);
/// out -= gradient(P); wall faces untouched.
void subtractGradient(const CellScalar& P, FaceField& out);

/// 7-point component Laplacian. Normal direction uses the stored wall-face
/// values; tangential directions use no-slip ghost reflection (v_ghost = -v).
FaceField laplacian(const FaceField& V);
void laplacianInto(const FaceField& V, FaceField& out);

/// Centered second-order (v.grad)v with 4-point face averaging.
FaceField advect(const FaceField& V);
void advectInto(const FaceField& V, FaceField& out);

/// Face-averaged cross product out = omega x V (no factor 2); interior faces
/// only, wall faces zero. The same averaging the stepper's Coriolis term uses.
void coriolisInto(const FaceField& V, const Vec3& omega, FaceField& out);

/// Midpoint quadrature of integral x cross v (face components averaged to
/// cell centers).
Vec3 angular_moment(const FaceField& V);

/// Face-weighted discrete L2 inner product and norms. Wall faces carry half
/// cell volume.
double inner(const FaceField& a, const FaceField& b);
double inner(const CellScalar& a, const CellScalar& b);
double l2_norm(const FaceField& V);
double l2_norm(const CellScalar& P);
/// Discrete Dirichlet form sqrt(<-Lap v, v>): interior difference quotients
/// plus the half-cell wall terms of the ghost reflection.
double h1_seminorm(const FaceField& V);

// ---------------------------------------------------------------------------
// Projection (Helmholtz) via fast transform diagonalization
// ---------------------------------------------------------------------------

struct SolverFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Projection {
    FaceField field;    // solenoidal part
    CellScalar phi;     // mean-zero potential, field = input - grad(phi)
    double residual;    // post-projection |div|_inf relative to pre
};

/// Cell-centered Neumann Poisson solve, diagonalized by DCT-II per axis.
/// Exact for the discrete operator div(grad(.)). Holds FFTW plans; one
/// instance per thread of control.
class PoissonNeumann {
public:
    explicit PoissonNeumann(const Grid& g);
    ~PoissonNeumann();
    PoissonNeumann(const PoissonNeumann&) = delete;
    PoissonNeumann& operator=(const PoissonNeumann&) = delete;

    /// Solves div(grad(phi)) = f with the zero-mean gauge; f must have zero
    /// mean (the constant mode is discarded).
    void solve(CellScalar& f_inout);

    const Grid& grid() const { return grid_; }

private:
    Grid grid_;
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Helmholtz projection operator with reusable scratch.
class Projector {
public:
    explicit Projector(const Grid& g);

    /// Pure form: returns the projected field and potential.
    Projection apply(const FaceField& V);

    /// In-place form used by the stepper; phi_out receives the potential.
    /// Throws SolverFailure if the relative residual exceeds `tol`.
    void applyInPlace(FaceField& V, CellScalar& phi_out, double tol = kTol);

    static constexpr double kTol = 1e-10;

private:
    Grid grid_;
    PoissonNeumann poisson_;
    CellScalar work_;
};

/// One-shot projection (builds a Projector; use Projector for hot loops).
Projection project(const FaceField& V);

// ---------------------------------------------------------------------------
// Solenoidal initial data
// ---------------------------------------------------------------------------

/// Random smooth divergence-free field with exact zeros on all wall faces:
/// a vector potential assembled from sin^2(pi m (x/L + 1/2)) factors is
/// sampled on edges and differenced (discrete curl), projected, and rescaled
/// to the requested H1 seminorm. Deterministic in `seed`.
FaceField synth_solenoidal_ic(const Grid& g, std::uint64_t seed, double target_h1_amplitude);

} // namespace lgy::fields
