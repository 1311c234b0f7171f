#include <doctest.h>

#include "lgy/core.hpp"

using namespace lgy;
using namespace lgy::core;

namespace {

RawConfig baseConfig() {
    RawConfig c;
    c.Lx = c.Ly = c.Lz = 0.5;
    c.nx = c.ny = c.nz = 8;
    c.A = 1.0;
    c.B = 2.0;
    c.C = 3.0;
    c.nu = 0.05;
    c.omega0 = Vec3(0, 0, 1);
    return c;
}

// Midpoint-quadrature oracle for the box inertia integral
// int (|x|^2 delta_ij - x_i x_j) over the cavity, diagonal entries.
Vec3 inertiaQuadrature(const Cavity& c, int n) {
    const double hx = c.Lx / n, hy = c.Ly / n, hz = c.Lz / n;
    Vec3 m = Vec3::Zero();
    for (int k = 0; k < n; ++k) {
        const double z = -0.5 * c.Lz + (k + 0.5) * hz;
        for (int j = 0; j < n; ++j) {
            const double y = -0.5 * c.Ly + (j + 0.5) * hy;
            for (int i = 0; i < n; ++i) {
                const double x = -0.5 * c.Lx + (i + 0.5) * hx;
                m.x() += y * y + z * z;
                m.y() += x * x + z * z;
                m.z() += x * x + y * y;
            }
        }
    }
    return m * (hx * hy * hz);
}

} // namespace

TEST_CASE("liquid inertia matches the closed form and the quadrature oracle") {
    const Cavity unit = Cavity::validated(1, 1, 1, 8, 8, 8);
    const Vec3 m1 = liquid_inertia(unit);
    CHECK(m1.x() == doctest::Approx(1.0 / 6.0).epsilon(1e-14));
    CHECK(m1.y() == doctest::Approx(1.0 / 6.0).epsilon(1e-14));
    CHECK(m1.z() == doctest::Approx(1.0 / 6.0).epsilon(1e-14));

    const Cavity c2 = Cavity::validated(2, 1, 1, 16, 8, 8);
    CHECK(liquid_inertia(c2).x() == doctest::Approx(1.0 / 3.0).epsilon(1e-14));

    // quadrature cross-check at 64^3: closed form within O(h^2)
    const Vec3 q = inertiaQuadrature(unit, 64);
    const double h = 1.0 / 64.0;
    for (int ax = 0; ax < 3; ++ax)
        CHECK(std::abs(q[ax] - m1[ax]) / m1[ax] <= 2.0 * h * h);

    // scaling all dims by s multiplies each moment by s^5
    const Cavity cs = Cavity::validated(3, 3, 3, 8, 8, 8);
    const Vec3 ms = liquid_inertia(cs);
    CHECK(ms.x() == doctest::Approx(std::pow(3.0, 5) * m1.x()).epsilon(1e-13));
}

TEST_CASE("cavity validation") {
    CHECK_THROWS_AS(Cavity::validated(1, 1, 1, 6, 8, 8), SetupError);   // too coarse
    CHECK_THROWS_AS(Cavity::validated(1, 1, 1, 9, 8, 8), SetupError);   // odd
    CHECK_THROWS_AS(Cavity::validated(-1, 1, 1, 8, 8, 8), SetupError);  // bad dims
    CHECK_THROWS_AS(Cavity::validated(1, 1, 8, 8, 8, 8), SetupError);   // aspect > 4
    CHECK_NOTHROW(Cavity::validated(1, 2, 1, 8, 8, 8));
}

TEST_CASE("build_system validates and resolves the eigenspace of omega0") {
    SUBCASE("distinct moments, spin about e3") {
        const SystemSetup s = build_system(baseConfig());
        CHECK(s.lambda0 == 3.0);
        CHECK(s.m0 == 1);
    }
    SUBCASE("degenerate plane") {
        RawConfig c = baseConfig();
        c.A = 1.0;
        c.B = 1.0;
        c.C = 3.0;
        c.omega0 = Vec3(1, 1, 0).normalized();
        const SystemSetup s = build_system(c);
        CHECK(s.lambda0 == 1.0);
        CHECK(s.m0 == 2);
    }
    SUBCASE("not a permanent axis") {
        RawConfig c = baseConfig();
        c.omega0 = Vec3(1, 1, 0).normalized();
        CHECK_THROWS_WITH_AS(build_system(c), "omega0 is not a permanent rotation axis", SetupError);
    }
    SUBCASE("order violation") {
        RawConfig c = baseConfig();
        c.A = 3.0;
        c.C = 1.0;
        try {
            build_system(c);
            FAIL("expected SetupError");
        } catch (const SetupError& e) {
            CHECK(e.code == SetupError::Code::OrderViolation);
        }
    }
    SUBCASE("solid inertia must be positive") {
        RawConfig c = baseConfig();
        c.Lx = c.Ly = c.Lz = 2.0;  // liquid moments 8*8/12 = 16/3 > A
        try {
            build_system(c);
            FAIL("expected SetupError");
        } catch (const SetupError& e) {
            CHECK(e.code == SetupError::Code::SolidInertiaNonpositive);
        }
    }
    SUBCASE("zero omega0 allowed only in sanity mode") {
        RawConfig c = baseConfig();
        c.omega0 = Vec3::Zero();
        CHECK_THROWS_AS(build_system(c), SetupError);
        CHECK_NOTHROW(build_system(c, true));
    }
}

TEST_CASE("eigenspace_of") {
    InertiaModel m;
    m.liquidMoments = Vec3(0.01, 0.01, 0.01);

    m.moments = Vec3(1, 2, 3);
    CHECK(eigenspace_of(3.0, m).m == 1);
    CHECK(eigenspace_of(3.0, m).basis.col(0).isApprox(Vec3(0, 0, 1)));

    m.moments = Vec3(1, 1, 3);
    const Eigenspace plane = eigenspace_of(1.0, m);
    CHECK(plane.m == 2);

    m.moments = Vec3(2, 2, 2);
    CHECK(eigenspace_of(2.0, m).m == 3);

    m.moments = Vec3(1, 2, 3);
    CHECK_THROWS_AS(eigenspace_of(2.5, m), SetupError);
}

TEST_CASE("lambda group multiplicities always sum to 3") {
    InertiaModel m;
    m.liquidMoments = Vec3::Zero();
    for (const Vec3& moments :
         {Vec3(1, 2, 3), Vec3(1, 1, 3), Vec3(1, 3, 3), Vec3(2, 2, 2), Vec3(1, 1 + 1e-12, 3)}) {
        m.moments = moments;
        int total = 0;
        for (const auto& grp : m.lambdaGroups()) total += static_cast<int>(grp.axes.size());
        CHECK(total == 3);
    }
}
