#include <doctest.h>

#include "lgy/dynamics.hpp"
#include "lgy/stability.hpp"

#if defined(_OPENMP)
#include <omp.h>
#endif

#include <cmath>
#include <random>

using namespace lgy;
using namespace lgy::dynamics;

namespace {

core::SystemSetup makeSetup(const Vec3& moments, const Vec3& omega0, double nu, int n) {
    core::RawConfig c;
    c.Lx = c.Ly = c.Lz = 1.0;
    c.nx = c.ny = c.nz = n;
    c.A = moments.x();
    c.B = moments.y();
    c.C = moments.z();
    c.nu = nu;
    c.omega0 = omega0;
    return core::build_system(c);
}

State permanentState(const core::SystemSetup& setup) {
    State s(setup.cavity.grid());
    s.omega = setup.omega0;
    s.omega_prev = s.omega;
    s.M = setup.inertia.apply(s.omega);
    return s;
}

} // namespace

TEST_CASE("rotate_M: identity, quarter turn, norm preservation") {
    CHECK(rotate_M(Vec3(1, 2, 3), Vec3::Zero(), 0.1) == Vec3(1, 2, 3));

    // Mdot = -omega x M with omega = Omega e3 rotates M clockwise in the xy
    // plane; a quarter turn sends e1 to -e2.
    const Vec3 M = rotate_M(Vec3(1, 0, 0), Vec3(0, 0, 2.0), M_PI / 4.0);
    CHECK(M.x() == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(M.y() == doctest::Approx(-1.0).epsilon(1e-14));
    CHECK(std::abs(M.z()) < 1e-15);

    std::mt19937_64 rng(3);
    for (int i = 0; i < 50; ++i) {
        const Vec3 m(uniformSym(rng()), uniformSym(rng()), uniformSym(rng()));
        const Vec3 w(uniformSym(rng()), uniformSym(rng()), uniformSym(rng()));
        const Vec3 out = rotate_M(m, 3.0 * w, 0.37);
        CHECK(std::abs(out.norm() - m.norm()) <= 4.0 * std::numeric_limits<double>::epsilon() * m.norm());
    }
}

TEST_CASE("recover_omega examples") {
    const auto setup = makeSetup(Vec3(1, 2, 3), Vec3(0, 0, 1), 0.05, 8);
    const fields::Grid g = setup.cavity.grid();
    fields::FaceField z(g);
    CHECK(recover_omega(Vec3(0, 0, 3), z, setup.inertia).isApprox(Vec3(0, 0, 1)));

    // rigid-rotation sample: integral(x cross v) = e3/6 + O(h^2) on the unit cube
    fields::Grid g32(32, 32, 32, 1, 1, 1);
    const auto R = fields::FaceField::sampled(g32, [](const Vec3& x) { return Vec3(0, 0, 1).cross(x); });
    core::InertiaModel iso;
    iso.moments = Vec3(1, 1, 1);
    iso.liquidMoments = Vec3::Zero();
    const Vec3 w = recover_omega(Vec3(0, 0, 1), R, iso);
    CHECK(w.z() == doctest::Approx(5.0 / 6.0).epsilon(2e-3));
}

TEST_CASE("recover_omega is affine in M") {
    const auto setup = makeSetup(Vec3(1, 2, 3), Vec3(0, 0, 1), 0.05, 8);
    const auto V = fields::synth_solenoidal_ic(setup.cavity.grid(), 5, 0.3);
    const Vec3 M1(0.2, -0.4, 1.0), M2(-0.7, 0.1, 0.5);
    const Vec3 lhs = recover_omega(M1 + M2, V, setup.inertia);
    const Vec3 rhs = recover_omega(M1, V, setup.inertia) + setup.inertia.applyInverse(M2);
    CHECK((lhs - rhs).norm() < 1e-14);
}

TEST_CASE("permanent rotation is a discrete fixed point") {
    const auto setup = makeSetup(Vec3(1, 2, 3), Vec3(0, 0, 1), 0.05, 16);
    Stepper st(setup, Mode::Nonlinear);
    State s = permanentState(setup);
    const double dt = st.stableDt(s);
    const double M0 = s.M.norm();
    for (int i = 0; i < 200; ++i) {
        const Vec3 w_before = s.omega;
        s = st.step(s, dt);
        CHECK((s.omega - w_before).norm() <= 1e-12 * w_before.norm());
        CHECK(std::abs(s.M.norm() - M0) <= 1e-13 * M0);
    }
    CHECK(fields::l2_norm(s.v) <= 1e-12);
}

TEST_CASE("momentum norm and consistency along a perturbed run") {
    const auto setup = makeSetup(Vec3(1, 2, 3), Vec3(0, 0, 1), 0.05, 16);
    const fields::Grid g = setup.cavity.grid();
    Stepper st(setup, Mode::Nonlinear);

    State s(g);
    s.v = fields::synth_solenoidal_ic(g, 21, 0.5);
    s.omega = Vec3(0.05, -0.02, 1.0);
    s.omega_prev = s.omega;
    s.M = setup.inertia.apply(s.omega) + fields::angular_moment(s.v);
    const double M0 = s.M.norm();

    const double dt = 0.9 * st.stableDt(s);
    StepStats stats;
    for (int i = 0; i < 300; ++i) {
        s = st.step(s, dt, &stats);
        CHECK(std::abs(s.M.norm() / M0 - 1.0) <= 1e-12);
        const Vec3 reconstructed = setup.inertia.apply(s.omega) + stats.amom;
        CHECK((reconstructed - s.M).norm() <= 1e-12 * M0);
    }
}

TEST_CASE("one dissipative step matches the explicit heat-step oracle") {
    const auto setup = makeSetup(Vec3(1, 2, 3), Vec3(0, 0, 1e-6), 1.0, 16);
    const fields::Grid g = setup.cavity.grid();

    State s(g);
    s.v = fields::synth_solenoidal_ic(g, 33, 1e-4);
    s.omega = setup.omega0;
    s.omega_prev = s.omega;
    s.M = setup.inertia.apply(s.omega) + fields::angular_moment(s.v);

    StepOptions opts;
    opts.fixed_point_sweeps = 1;
    Stepper st(setup, Mode::Nonlinear, opts);
    const double dt = st.stableDt(s);
    const double n0 = fields::l2_norm(s.v);
    const State out = st.step(s, dt);
    const double n1 = fields::l2_norm(out.v);
    CHECK(n1 < n0);

    // two-stage explicit heat step + projection on the same grid
    fields::FaceField v1 = s.v;
    {
        fields::FaceField lap = fields::laplacian(s.v);
        lap *= 0.5 * dt * setup.nu;
        v1 += lap;
    }
    fields::FaceField vh = s.v;
    {
        fields::FaceField lap = fields::laplacian(v1);
        lap *= dt * setup.nu;
        vh += lap;
    }
    const auto proj = fields::project(vh);
    const double nh = fields::l2_norm(proj.field);
    CHECK(n1 / n0 == doctest::Approx(nh / n0).epsilon(1e-4));
}

TEST_CASE("step equals the composition of the public field operators") {
    const auto setup = makeSetup(Vec3(1, 2, 3), Vec3(0, 0, 1), 0.05, 12);
    const fields::Grid g = setup.cavity.grid();

    State s(g);
    s.v = fields::synth_solenoidal_ic(g, 8, 0.2);
    s.omega = Vec3(0.1, -0.2, 0.9);
    s.omega_prev = s.omega;  // lagged omega-dot = 0
    s.M = setup.inertia.apply(s.omega) + fields::angular_moment(s.v);

    StepOptions opts;
    opts.fixed_point_sweeps = 1;
    Stepper st(setup, Mode::Nonlinear, opts);
    const double dt = 0.5 * st.stableDt(s);
    const State out = st.step(s, dt);

    auto rhs = [&](const fields::FaceField& V, const Vec3& w) {
        fields::FaceField r = fields::advect(V);
        r *= -1.0;
        fields::FaceField lap = fields::laplacian(V);
        lap *= setup.nu;
        r += lap;
        fields::FaceField cor(g);
        fields::coriolisInto(V, w, cor);
        cor *= 2.0;
        r -= cor;
        return r;  // omega-dot = 0: no Euler force
    };

    fields::FaceField v1 = s.v;
    {
        fields::FaceField r = rhs(s.v, s.omega);
        r *= 0.5 * dt;
        v1 += r;
    }
    fields::FaceField vs = s.v;
    {
        fields::FaceField r = rhs(v1, s.omega);
        r *= dt;
        vs += r;
    }
    auto proj = fields::project(vs);
    const Vec3 M_expect = rotate_M(s.M, s.omega, dt);
    const Vec3 w_expect = recover_omega(M_expect, proj.field, setup.inertia);

    fields::FaceField diff = proj.field;
    diff -= out.v;
    CHECK(diff.maxAbs() <= 1e-13 * std::max(1.0, out.v.maxAbs()));
    CHECK((out.omega - w_expect).norm() <= 1e-13);
    CHECK((out.M - M_expect).norm() <= 1e-15);
}

TEST_CASE("cfl violation and non-finite detection") {
    const auto setup = makeSetup(Vec3(1, 2, 3), Vec3(0, 0, 1), 0.05, 8);
    Stepper st(setup, Mode::Nonlinear);
    State s = permanentState(setup);
    CHECK_THROWS_AS(st.step(s, 100.0 * st.stableDt(s)), CflViolation);

    s.v.u[10] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(st.step(s, 0.5 * st.stableDt(permanentState(setup))), NonFinite);
}

TEST_CASE("diagnostics closed-form examples") {
    SUBCASE("pure spin about e3") {
        const auto setup = makeSetup(Vec3(1, 2, 3), Vec3(0, 0, 1), 0.05, 8);
        State s = permanentState(setup);
        s.omega = Vec3(0, 0, 2);
        s.M = setup.inertia.apply(s.omega);
        const DiagnosticsRow r = diagnostics(s, setup);
        CHECK(r.scriptE == doctest::Approx(6.0).epsilon(1e-14));
        CHECK(r.E == doctest::Approx(0.0));
        CHECK(r.a.norm() == 0.0);
        CHECK(r.M_norm == doctest::Approx(6.0));
    }
    SUBCASE("G against Eq-style closed forms, minimum axis") {
        const auto setup = makeSetup(Vec3(1, 2, 3), Vec3(1, 0, 0), 0.05, 8);
        State s = permanentState(setup);
        s.omega = Vec3(0.3, 1.0, 1.0);  // omega_star = (0,1,1), a = 0
        s.M = setup.inertia.apply(s.omega);
        const DiagnosticsRow r = diagnostics(s, setup);
        CHECK(r.G == doctest::Approx(-8.0).epsilon(1e-13));
        CHECK(stability::lyapunov_G_closed_form(1, 2, 3, stability::CaseId::iv, r.omega_star) ==
              doctest::Approx(r.G).epsilon(1e-13));
    }
    SUBCASE("G against the maximum-axis closed form") {
        const auto setup = makeSetup(Vec3(1, 2, 3), Vec3(0, 0, 1), 0.05, 8);
        State s = permanentState(setup);
        s.omega = Vec3(1.0, 1.0, 0.7);  // omega_star = (1,1,0)
        s.M = setup.inertia.apply(s.omega);
        const DiagnosticsRow r = diagnostics(s, setup);
        CHECK(r.G == doctest::Approx(4.0 / 3.0).epsilon(1e-13));
        CHECK(stability::lyapunov_G_closed_form(1, 2, 3, stability::CaseId::ii, r.omega_star) ==
              doctest::Approx(r.G).epsilon(1e-13));
    }
}

TEST_CASE("energy bounds: 2E <= |v|^2 always, c0 lower bound with sampling slack") {
    const auto setup = makeSetup(Vec3(1, 2, 3), Vec3(0, 0, 1), 0.05, 8);
    const fields::Grid g = setup.cavity.grid();
    const double c0 = estimate_c0(setup, 60, 100);
    CHECK(c0 > 0.0);
    CHECK(c0 < 1.0);
    for (int i = 0; i < 30; ++i) {
        State s(g);
        s.v = fields::synth_solenoidal_ic(g, 500 + static_cast<std::uint64_t>(i), 1.0);
        s.omega = setup.omega0;
        const DiagnosticsRow r = diagnostics(s, setup);
        const double v2 = r.l2v * r.l2v;
        CHECK(2.0 * r.E <= v2 * (1.0 + 1e-12));
        CHECK(2.0 * r.E >= 0.9 * c0 * v2);
    }
}

TEST_CASE("linearized mode conserves the spin-axis component of I(omega - a)") {
    const auto setup = makeSetup(Vec3(1, 2, 3), Vec3(0, 0, 1), 0.05, 16);
    const fields::Grid g = setup.cavity.grid();
    Stepper st(setup, Mode::Linearized);

    State s(g);
    s.mode = Mode::Linearized;
    s.v = fields::synth_solenoidal_ic(g, 17, 0.1);
    s.omega = Vec3(0.02, -0.01, 0.005);
    s.omega_prev = s.omega;
    s.M = setup.inertia.apply(s.omega) + fields::angular_moment(s.v);

    const Vec3 e = setup.spinAxis();
    const double par0 = s.M.dot(e);  // = lambda (omega_par - a_par)
    const double dt = st.stableDt(s);
    for (int i = 0; i < 200; ++i) s = st.step(s, dt);
    CHECK(std::abs(s.M.dot(e) - par0) <= 1e-12 * std::max(1.0, std::abs(par0)));
}

TEST_CASE("linearized Lyapunov function is nonincreasing for the stable case") {
    const auto setup = makeSetup(Vec3(1, 2, 3), Vec3(0, 0, 1), 0.1, 16);
    const fields::Grid g = setup.cavity.grid();
    Stepper st(setup, Mode::Linearized);

    State s(g);
    s.mode = Mode::Linearized;
    s.v = fields::synth_solenoidal_ic(g, 19, 0.2);
    s.omega = Vec3(0.05, 0.03, 0.0);
    s.omega_prev = s.omega;
    s.M = setup.inertia.apply(s.omega) + fields::angular_moment(s.v);

    RunConfig cfg;
    cfg.mode = Mode::Linearized;
    cfg.dt = st.stableDt(s);
    cfg.t_end = 400 * cfg.dt;
    cfg.sample_stride = 10;
    std::vector<DiagnosticsRow> rows;
    run(st, s, cfg, [&](const DiagnosticsRow& r) { rows.push_back(r); });

    REQUIRE(rows.size() > 10);
    double budget = 0.0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        budget = std::abs(rows[i].energy_residual) + 1e-12 * rows[0].V;
        CHECK(rows[i].V <= rows[i - 1].V + budget);
    }
    // integrated identity: V(t) - V(0) + 2 nu int |grad v|^2 = residual
    CHECK(std::abs(rows.back().energy_residual) <= 0.01 * rows.front().V);
}

TEST_CASE("run emits rows, conserves momentum, detects divergence") {
    const auto setup = makeSetup(Vec3(1, 2, 3), Vec3(0, 0, 1), 0.05, 12);
    const fields::Grid g = setup.cavity.grid();
    Stepper st(setup, Mode::Nonlinear);

    State s(g);
    s.v = fields::synth_solenoidal_ic(g, 23, 0.3);
    s.omega = Vec3(0, 0, 1);
    s.omega_prev = s.omega;
    s.M = setup.inertia.apply(s.omega) + fields::angular_moment(s.v);

    RunConfig cfg;
    cfg.dt = 0.9 * st.stableDt(s);
    cfg.t_end = 60 * cfg.dt;
    cfg.sample_stride = 7;
    std::vector<DiagnosticsRow> rows;
    const RunSummary sum = run(st, s, cfg, [&](const DiagnosticsRow& r) { rows.push_back(r); });
    CHECK(sum.status == RunStatus::Completed);
    CHECK(rows.front().t == 0.0);
    CHECK(rows.back().t == doctest::Approx(cfg.t_end).epsilon(1e-9));
    for (const auto& r : rows) CHECK(std::abs(r.M_norm / rows[0].M_norm - 1.0) <= 1e-11);

    // divergence detection: poison the state
    State bad(g);
    bad.v.u[0] = 0.0;
    bad.v = fields::synth_solenoidal_ic(g, 23, 0.3);
    bad.v.u[100] = std::numeric_limits<double>::quiet_NaN();
    bad.omega = Vec3(0, 0, 1);
    bad.omega_prev = bad.omega;
    bad.M = setup.inertia.apply(bad.omega);
    Stepper st2(setup, Mode::Nonlinear);
    RunConfig cfg2 = cfg;
    std::vector<DiagnosticsRow> rows2;
    const RunSummary sum2 = run(st2, bad, cfg2, [&](const DiagnosticsRow& r) { rows2.push_back(r); });
    CHECK(sum2.status == RunStatus::Diverged);
}

#if defined(_OPENMP)
TEST_CASE("field reductions and steps are bitwise thread-count independent") {
    const auto setup = makeSetup(Vec3(1, 2, 3), Vec3(0, 0, 1), 0.05, 16);
    const fields::Grid g = setup.cavity.grid();
    State s(g);
    s.v = fields::synth_solenoidal_ic(g, 29, 0.4);
    s.omega = Vec3(0.01, 0, 1);
    s.omega_prev = s.omega;
    s.M = setup.inertia.apply(s.omega) + fields::angular_moment(s.v);

    const int max_threads = omp_get_max_threads();
    omp_set_num_threads(1);
    Stepper st1(setup, Mode::Nonlinear);
    const double n1 = fields::l2_norm(s.v);
    const State out1 = st1.step(s, 0.5 * st1.stableDt(s));

    omp_set_num_threads(std::max(2, max_threads));
    Stepper st2(setup, Mode::Nonlinear);
    const double n2 = fields::l2_norm(s.v);
    const State out2 = st2.step(s, 0.5 * st2.stableDt(s));
    omp_set_num_threads(max_threads);

    CHECK(n1 == n2);
    CHECK((out1.v.u == out2.v.u).all());
    CHECK((out1.v.v == out2.v.v).all());
    CHECK((out1.v.w == out2.v.w).all());
    CHECK(out1.omega == out2.omega);
}
#endif
