#pragma once

#include "lgy/core.hpp"
#include "lgy/fields.hpp"
#include "lgy/types.hpp"

#include <complex>
#include <stdexcept>
#include <vector>

namespace lgy::spectral {

struct NoConvergence : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ClusterAmbiguous : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// N lowest discrete Stokes eigenmodes (L2-orthonormal, divergence-free,
/// A0 = -nu P lap) plus the three rigid directions appended implicitly.
struct ReducedBasis {
    fields::Grid grid;
    double nu = 0.0;
    std::vector<fields::FaceField> modes;
    VecX mu;            // Stokes eigenvalues of A0, ascending
    VecX residuals;     // |A0 phi - mu phi| per mode
    MatX angularMoments;  // 3 x N, column k = integral(x cross phi_k)

    int N() const { return static_cast<int>(modes.size()); }
    int dim() const { return N() + 3; }
};

struct StokesOptions {
    int block = 8;
    int max_basis = 0;       // 0: 3N+32
    double tol = 1e-6;       // relative eigen-residual
    double cg_tol = 1e-12;   // pressure Schur CG
    int cg_max_iter = 500;
    std::uint64_t seed = 7;
};

/// Lowest-N Stokes modes by a block-Krylov iteration on the exact inverse
/// Stokes apply (pressure-Schur CG over the fast component solvers), with
/// Rayleigh-Ritz on A0. Converged when |A0 phi - mu phi| <= tol * mu.
ReducedBasis stokes_modes(const core::Cavity& cavity, double nu, int N, StokesOptions opts = {});

/// Dense bilinear forms of the linearized pencil on (modes + rigid) x same.
struct Pencil {
    MatX Mform;  // <I u, v>
    MatX Aform;  // nu grad:grad + omega.omega
    MatX Bform;  // Coriolis/gyroscopic coupling (includes the -omega compensation)
    double mu1 = 0.0;
    int n = 0;
    Vec3 omega0 = Vec3::Zero();
};

Pencil assemble_pencil(const ReducedBasis& basis, const core::InertiaModel& inertia, const Vec3& omega0);
inline Pencil assemble_pencil(const ReducedBasis& basis, const core::SystemSetup& setup) {
    return assemble_pencil(basis, setup.inertia, setup.omega0);
}

enum class SpectrumVerdict { AllPositive, SomeNegative };

struct EigReport {
    Eigen::VectorXcd eigenvalues;     // sorted by (Re, Im)
    std::vector<int> zero_cluster;    // indices into eigenvalues
    int zero_multiplicity = 0;
    bool semisimple = false;
    int m_expected = 0;
    double min_abs_re_nonzero = 0.0;
    double min_re_nonzero = 0.0;
    double cluster_radius = 0.0;
    double mu1 = 0.0;
    SpectrumVerdict verdict = SpectrumVerdict::AllPositive;
    MatX Q;       // oblique spectral projector onto the zero cluster (real)
    MatX right0;  // right eigenvector block of the zero cluster, n x m
    MatX left0;   // left eigenvector block (rows of V^-1), m x n
};

/// Dense generalized eigensolve of (Aform+Bform) x = lambda Mform x.
/// Zero cluster = eigenvalues with |lambda| <= 1e-6 mu1; throws
/// ClusterAmbiguous when eigenvalues straddle the radius within a factor 10.
EigReport eigenspectrum(const Pencil& pencil, int m_expected);

/// Oblique split u = u0 + u1 along the zero cluster / complementary invariant
/// subspace, in reduced coordinates.
std::pair<VecX, VecX> spectral_projection(const VecX& u, const EigReport& report);

} // namespace lgy::spectral
