#include <doctest.h>

#include "lgy/fields.hpp"

#include <cmath>
#include <random>

using namespace lgy;
using namespace lgy::fields;

namespace {

FaceField randomField(const Grid& g, std::uint64_t seed) {
    FaceField F(g);
    std::mt19937_64 rng(seed);
    for (auto* arr : {&F.u, &F.v, &F.w})
        for (std::int64_t i = 0; i < arr->size(); ++i) (*arr)[i] = uniformSym(rng());
    F.zeroNormalBoundary();
    return F;
}

CellScalar randomScalar(const Grid& g, std::uint64_t seed) {
    CellScalar P(g);
    std::mt19937_64 rng(seed);
    for (std::int64_t i = 0; i < P.data().size(); ++i) P.data()[i] = uniformSym(rng());
    return P;
}

// Test field vanishing on all walls, odd wrt each wall (exact for the ghost
// reflection): components built from sin(2*pi*X)-type products.
Vec3 sinField(const Vec3& p) {
    const double X = p.x() + 0.5, Y = p.y() + 0.5, Z = p.z() + 0.5;
    const double twoPi = 2.0 * M_PI;
    return {std::sin(twoPi * X) * std::sin(M_PI * Y) * std::sin(M_PI * Z),
            std::sin(M_PI * X) * std::sin(twoPi * Y) * std::sin(M_PI * Z),
            std::sin(M_PI * X) * std::sin(M_PI * Y) * std::sin(twoPi * Z)};
}

Vec3 sinFieldLaplacian(const Vec3& p) {
    const double c1 = -(4.0 + 1.0 + 1.0) * M_PI * M_PI;
    return c1 * sinField(p);
}

// (v.grad)v of sinField, componentwise analytic.
Vec3 sinFieldAdvection(const Vec3& p) {
    const double X = p.x() + 0.5, Y = p.y() + 0.5, Z = p.z() + 0.5;
    const double pi = M_PI;
    const double s1x = std::sin(pi * X), c1x = std::cos(pi * X), s2x = std::sin(2 * pi * X), c2x = std::cos(2 * pi * X);
    const double s1y = std::sin(pi * Y), c1y = std::cos(pi * Y), s2y = std::sin(2 * pi * Y), c2y = std::cos(2 * pi * Y);
    const double s1z = std::sin(pi * Z), c1z = std::cos(pi * Z), s2z = std::sin(2 * pi * Z), c2z = std::cos(2 * pi * Z);
    const double u = s2x * s1y * s1z, v = s1x * s2y * s1z, w = s1x * s1y * s2z;
    const double ux = 2 * pi * c2x * s1y * s1z, uy = pi * s2x * c1y * s1z, uz = pi * s2x * s1y * c1z;
    const double vx = pi * c1x * s2y * s1z, vy = 2 * pi * s1x * c2y * s1z, vz = pi * s1x * s2y * c1z;
    const double wx = pi * c1x * s1y * s2z, wy = pi * s1x * c1y * s2z, wz = 2 * pi * s1x * s1y * c2z;
    return {u * ux + v * uy + w * uz, u * vx + v * vy + w * vz, u * wx + v * wy + w * wz};
}

} // namespace

TEST_CASE("grid basics") {
    Grid g(8, 8, 8, 1.0, 2.0, 1.0);
    CHECK(g.hx() == doctest::Approx(0.125));
    CHECK(g.hy() == doctest::Approx(0.25));
    CHECK(g.xf(0) == doctest::Approx(-0.5));
    CHECK(g.xc(7) == doctest::Approx(0.5 - 0.0625));
    CHECK(g.cellCount() == 512);
}

TEST_CASE("divergence of zero and linear fields") {
    Grid g(8, 8, 8, 1.0, 1.0, 1.0);
    FaceField z(g);
    CHECK(divergence(z).data().abs().maxCoeff() == 0.0);

    // u = x on interior x-faces: divergence = 1 in every cell away from the
    // wall columns (where the zeroed wall faces truncate the stencil).
    FaceField F(g);
    for (int k = 0; k < g.nz(); ++k)
        for (int j = 0; j < g.ny(); ++j)
            for (int i = 1; i < g.nx(); ++i) F.uAt(i, j, k) = g.xf(i);
    CellScalar d = divergence(F);
    for (int k = 0; k < g.nz(); ++k)
        for (int j = 0; j < g.ny(); ++j)
            for (int i = 1; i < g.nx() - 1; ++i) CHECK(d.at(i, j, k) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("gradient of a constant vanishes and adjointness holds") {
    Grid g(10, 8, 12, 1.0, 0.8, 1.2);
    CellScalar c(g);
    c.data().setConstant(3.7);
    CHECK(gradient(c).maxAbs() == 0.0);

    const FaceField V = randomField(g, 1);
    const CellScalar P = randomScalar(g, 2);
    const double lhs = inner(gradient(P), V);
    const double rhs = -inner(P, divergence(V));
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("laplacian matches the manufactured solution at second order") {
    auto err = [](int n) {
        Grid g(n, n, n, 1.0, 1.0, 1.0);
        const FaceField V = FaceField::sampled(g, sinField);
        const FaceField L = laplacian(V);
        const FaceField Lex = FaceField::sampled(g, sinFieldLaplacian);
        double emax = 0.0;
        for (int k = 1; k < g.nz() - 1; ++k)
            for (int j = 1; j < g.ny() - 1; ++j)
                for (int i = 1; i < g.nx(); ++i)
                    emax = std::max(emax, std::abs(L.uAt(i, j, k) - Lex.uAt(i, j, k)));
        return emax;
    };
    const double e16 = err(16), e32 = err(32);
    CHECK(e32 < e16 / 3.0);  // observed order ~2
    CHECK(e32 < 0.6);
}

TEST_CASE("advection of zero and constants") {
    Grid g(8, 8, 8, 1.0, 1.0, 1.0);
    FaceField z(g);
    CHECK(advect(z).maxAbs() == 0.0);

    FaceField c(g);
    c.u.setConstant(0.6);
    c.v.setConstant(-0.2);
    c.w.setConstant(0.3);
    const FaceField A = advect(c);
    // interior faces away from walls see a constant field: derivative ~ 0
    for (int k = 2; k < 6; ++k)
        for (int j = 2; j < 6; ++j)
            for (int i = 2; i < 7; ++i) CHECK(std::abs(A.uAt(i, j, k)) < 1e-13);
}

TEST_CASE("advection matches the manufactured solution at second order") {
    auto err = [](int n) {
        Grid g(n, n, n, 1.0, 1.0, 1.0);
        const FaceField V = FaceField::sampled(g, sinField);
        const FaceField A = advect(V);
        const FaceField Aex = FaceField::sampled(g, sinFieldAdvection);
        double emax = 0.0;
        for (int k = 2; k < g.nz() - 2; ++k)
            for (int j = 2; j < g.ny() - 2; ++j)
                for (int i = 2; i < g.nx() - 1; ++i)
                    emax = std::max(emax, std::abs(A.uAt(i, j, k) - Aex.uAt(i, j, k)));
        return emax;
    };
    const double e16 = err(16), e32 = err(32);
    CHECK(e32 < e16 / 3.0);
    CHECK(e32 < 0.2);
}

TEST_CASE("projection: idempotence, gradient annihilation, Pythagoras") {
    Grid g(12, 10, 8, 1.0, 1.1, 0.9);

    const FaceField V = randomField(g, 3);
    Projection p = project(V);
    CHECK(divergence(p.field).data().abs().maxCoeff() <= 1e-10 * std::max(1.0, V.maxAbs() / g.hmin()));

    // idempotence
    Projection p2 = project(p.field);
    FaceField diff = p2.field;
    diff -= p.field;
    CHECK(diff.maxAbs() <= 1e-10 * std::max(1.0, p.field.maxAbs()));

    // pure gradients are annihilated
    CellScalar phi = randomScalar(g, 4);
    phi.removeMean();
    const FaceField Gf = gradient(phi);
    Projection pg = project(Gf);
    CHECK(l2_norm(pg.field) <= 1e-10 * std::max(1.0, l2_norm(Gf)));

    // orthogonal splitting
    const double n2 = inner(V, V);
    const double a2 = inner(p.field, p.field);
    const FaceField gphi = gradient(p.phi);
    const double b2 = inner(gphi, gphi);
    CHECK(a2 + b2 == doctest::Approx(n2).epsilon(1e-10));
    CHECK(l2_norm(p.field) <= l2_norm(V) * (1.0 + 1e-12));
}

TEST_CASE("angular moment: zero, constant, and rigid rotation sample") {
    Grid g(32, 32, 32, 1.0, 1.0, 1.0);
    FaceField z(g);
    CHECK(angular_moment(z).norm() == 0.0);

    FaceField c = FaceField::sampled(g, [](const Vec3&) { return Vec3(0.3, -0.7, 0.2); });
    CHECK(angular_moment(c).norm() < 1e-14);

    const FaceField R = FaceField::sampled(g, [](const Vec3& x) { return Vec3(0, 0, 1).cross(x); });
    const Vec3 m = angular_moment(R);
    const double h = g.hx();
    CHECK(std::abs(m.x()) < 1e-14);
    CHECK(std::abs(m.y()) < 1e-14);
    CHECK(std::abs(m.z() - 1.0 / 6.0) <= 2.0 * h * h);
}

TEST_CASE("angular moment is linear") {
    Grid g(8, 8, 8, 1.0, 1.0, 1.0);
    const FaceField a = randomField(g, 5), b = randomField(g, 6);
    FaceField sum = a;
    sum += b;
    const Vec3 lhs = angular_moment(sum);
    const Vec3 rhs = angular_moment(a) + angular_moment(b);
    CHECK((lhs - rhs).norm() <= 1e-13 * (1.0 + rhs.norm()));
}

TEST_CASE("norms: zero, homogeneity, manufactured values") {
    Grid g(24, 24, 24, 1.0, 1.0, 1.0);
    FaceField z(g);
    CHECK(l2_norm(z) == 0.0);
    CHECK(h1_seminorm(z) == 0.0);

    FaceField V = FaceField::sampled(g, sinField);
    const double l2 = l2_norm(V), h1 = h1_seminorm(V);
    FaceField W = V;
    W *= -2.5;
    CHECK(l2_norm(W) == doctest::Approx(2.5 * l2).epsilon(1e-13));
    CHECK(h1_seminorm(W) == doctest::Approx(2.5 * h1).epsilon(1e-13));

    // analytic: each component has |comp|^2 = 1/8; |grad comp|^2 = (4+1+1)pi^2/8
    const double l2_exact = std::sqrt(3.0 / 8.0);
    const double h1_exact = std::sqrt(3.0 * 6.0 * M_PI * M_PI / 8.0);
    CHECK(l2 == doctest::Approx(l2_exact).epsilon(5e-3));
    CHECK(h1 == doctest::Approx(h1_exact).epsilon(2e-2));
}

TEST_CASE("h1 seminorm agrees with the discrete Dirichlet form") {
    Grid g(10, 8, 12, 1.0, 0.9, 1.15);
    const FaceField V = randomField(g, 7);
    const double h1sq = h1_seminorm(V) * h1_seminorm(V);
    const double form = -inner(laplacian(V), V);
    CHECK(h1sq == doctest::Approx(form).epsilon(1e-11));
}

TEST_CASE("synth_solenoidal_ic contracts") {
    Grid g(16, 16, 16, 1.0, 1.0, 1.0);
    CHECK(l2_norm(synth_solenoidal_ic(g, 42, 0.0)) == 0.0);

    const FaceField V = synth_solenoidal_ic(g, 42, 0.7);
    CHECK(h1_seminorm(V) == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(V.maxNormalBoundary() <= 1e-12 * V.maxAbs());
    CHECK(divergence(V).data().abs().maxCoeff() <= 1e-10 * std::max(1.0, V.maxAbs() / g.hmin()));

    const FaceField W = synth_solenoidal_ic(g, 42, 0.7);
    CHECK((V.u == W.u).all());
    CHECK((V.v == W.v).all());
    CHECK((V.w == W.w).all());

    const FaceField X = synth_solenoidal_ic(g, 43, 0.7);
    FaceField diff = X;
    diff -= V;
    CHECK(diff.maxAbs() > 1e-6);
}

TEST_CASE("pairwise reductions are deterministic and accurate") {
    std::mt19937_64 rng(9);
    std::vector<double> xs(100001);
    long double ref = 0.0L;
    for (auto& x : xs) {
        x = uniformSym(rng());
        ref += static_cast<long double>(x);
    }
    const double s1 = pairwiseSum(xs.data(), xs.size());
    const double s2 = pairwiseSum(xs.data(), xs.size());
    CHECK(s1 == s2);
    CHECK(std::abs(s1 - static_cast<double>(ref)) < 1e-9);
}
