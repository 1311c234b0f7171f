#pragma once

#include "lgy/fields.hpp"
#include "lgy/types.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace lgy::core {

struct SetupError : std::runtime_error {
    enum class Code {
        BadCavity,
        OrderViolation,
        SolidInertiaNonpositive,
        NotPermanentAxis,
        UnknownEigenvalue,
        BadParameter,
    };
    Code code;
    SetupError(Code c, const std::string& msg) : std::runtime_error(msg), code(c) {}
};

/// Axis-aligned box cavity centered at the center of mass.
struct Cavity {
    double Lx, Ly, Lz;
    int nx, ny, nz;

    /// Validates: positive finite dims, even cell counts >= 8, cell aspect
    /// ratio max/min <= 4.
    static Cavity validated(double Lx, double Ly, double Lz, int nx, int ny, int nz);

    fields::Grid grid() const { return fields::Grid(nx, ny, nz, Lx, Ly, Lz); }
};

/// Density-1 box inertia about the center: If1 = Lx*Ly*Lz*(Ly^2+Lz^2)/12, etc.
Vec3 liquid_inertia(const Cavity& c);

/// Total inertia of the coupled system, diagonal in the body axes, A <= B <= C.
struct InertiaModel {
    Vec3 moments;        // (A, B, C)
    Vec3 liquidMoments;  // (If1, If2, If3) from the cavity
    double degeneracyTol = 1e-9;

    double A() const { return moments.x(); }
    double B() const { return moments.y(); }
    double C() const { return moments.z(); }
    Mat3 matrix() const { return moments.asDiagonal(); }
    Vec3 apply(const Vec3& w) const { return moments.cwiseProduct(w); }
    Vec3 applyInverse(const Vec3& m) const { return m.cwiseQuotient(moments); }

    struct Group {
        double lambda;
        std::vector<int> axes;  // coordinate axes spanning S(lambda)
    };
    /// Eigenvalue groups of diag(A,B,C) under the relative tolerance
    /// (scale C), in ascending lambda. Multiplicities sum to 3.
    std::vector<Group> lambdaGroups() const;

    /// Group index containing omega (its support axes), or -1 if omega is not
    /// an eigenvector within tolerance.
    int groupOf(const Vec3& omega) const;
};

struct Eigenspace {
    double lambda;
    int m;       // multiplicity, 1..3
    MatX basis;  // 3 x m, orthonormal coordinate axes
};

/// S(lambda) for lambda in {A,B,C} within the degeneracy tolerance.
/// Throws SetupError{UnknownEigenvalue} otherwise.
Eigenspace eigenspace_of(double lambda, const InertiaModel& inertia);

struct SystemSetup {
    Cavity cavity;
    InertiaModel inertia;
    double nu;
    Vec3 omega0;     // base angular velocity (permanent rotation)
    double lambda0;  // inertia eigenvalue of the omega0 eigenspace (0 if omega0 = 0)
    int m0;          // dim S(lambda0) (3 if omega0 = 0: null space of the steady coupling)

    Vec3 spinAxis() const { return omega0.norm() > 0.0 ? Vec3(omega0.normalized()) : Vec3(0, 0, 1); }
};

struct RawConfig {
    double Lx = 1.0, Ly = 1.0, Lz = 1.0;
    int nx = 0, ny = 0, nz = 0;
    double A = 0.0, B = 0.0, C = 0.0;
    double nu = 0.0;
    Vec3 omega0 = Vec3::Zero();
    double eps_deg = 1e-9;
};

/// Validates and assembles a SystemSetup. omega0 must lie in an eigenspace of
/// the inertia tensor; pass allow_zero_omega0 for the spectral sanity mode.
SystemSetup build_system(const RawConfig& cfg, bool allow_zero_omega0 = false);

} // namespace lgy::core
