#include "lgy/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#if defined(_OPENMP)
#define LGY_OMP_FOR_IF _Pragma("omp parallel for schedule(static) if(ompBig)")
#else
#define LGY_OMP_FOR_IF
#endif

namespace lgy::dynamics {

using fields::FaceField;
using fields::Grid;

Vec3 rotate_M(const Vec3& M, const Vec3& omega, double dt) {
    const double w = omega.norm();
    if (!(w > 0.0)) return M;
    const Vec3 k = omega / w;
    const double th = -w * dt;  // Mdot = -omega x M
    const double c = std::cos(th), s = std::sin(th);
    return M * c + k.cross(M) * s + k * (k.dot(M)) * (1.0 - c);
}

Vec3 recover_omega(const Vec3& M, const FaceField& V, const core::InertiaModel& inertia) {
    return inertia.applyInverse(M - fields::angular_moment(V));
}

// ---------------------------------------------------------------------------
// Stepper
// ---------------------------------------------------------------------------

Stepper::Stepper(const core::SystemSetup& setup, Mode mode, StepOptions opts)
    : setup_(setup),
      mode_(mode),
      opts_(opts),
      projector_(setup.cavity.grid()),
      rhs_(setup.cavity.grid()),
      stage_(setup.cavity.grid()),
      work_(setup.cavity.grid()),
      phi_(setup.cavity.grid()) {}

double Stepper::stableDt(double vmax, double omega_norm) const {
    const Grid g = setup_.cavity.grid();
    const double h = g.hmin();
    const double diff = opts_.cfl_diffusive * h * h / (6.0 * setup_.nu);
    const double Lmax = std::max({g.Lx(), g.Ly(), g.Lz()});
    const double speed = vmax + omega_norm * Lmax;
    const double adv = speed > 0.0 ? opts_.cfl_advective * h / speed : std::numeric_limits<double>::infinity();
    return std::min(diff, adv);
}

double Stepper::stableDt(const State& s) const {
    double wn = s.omega.norm();
    if (mode_ == Mode::Linearized) wn += setup_.omega0.norm();
    return stableDt(s.v.maxAbs(), wn);
}

void Stepper::fluidRhs(const FaceField& V, const Vec3& omega, const Vec3& omega_dot, FaceField& out) {
    if (mode_ == Mode::Nonlinear)
        fields::advectInto(V, out);
    else
        out.setZero();
    fields::laplacianInto(V, work_);

    const Grid& g = V.grid();
    const int nx = g.nx(), ny = g.ny(), nz = g.nz();
    const bool ompBig = nz >= 48;
    (void)ompBig;
    const double nu = setup_.nu;
    const double wx = omega.x(), wy = omega.y(), wz = omega.z();
    const double dx = omega_dot.x(), dy = omega_dot.y(), dz = omega_dot.z();

    LGY_OMP_FOR_IF
    for (int k = 0; k < nz; ++k) {
        const double zc = g.zc(k);
        for (int j = 0; j < ny; ++j) {
            const double yc = g.yc(j);
            for (int i = 1; i < nx; ++i) {
                const double vbar = 0.25 * (V.vAt(i - 1, j, k) + V.vAt(i - 1, j + 1, k) + V.vAt(i, j, k) + V.vAt(i, j + 1, k));
                const double wbar = 0.25 * (V.wAt(i - 1, j, k) + V.wAt(i - 1, j, k + 1) + V.wAt(i, j, k) + V.wAt(i, j, k + 1));
                const double euler = dy * zc - dz * yc;
                const double coriolis = 2.0 * (wy * wbar - wz * vbar);
                out.uAt(i, j, k) = nu * work_.uAt(i, j, k) - out.uAt(i, j, k) - euler - coriolis;
            }
        }
    }
    LGY_OMP_FOR_IF
    for (int k = 0; k < nz; ++k) {
        const double zc = g.zc(k);
        for (int j = 1; j < ny; ++j) {
            for (int i = 0; i < nx; ++i) {
                const double xc = g.xc(i);
                const double ubar = 0.25 * (V.uAt(i, j - 1, k) + V.uAt(i + 1, j - 1, k) + V.uAt(i, j, k) + V.uAt(i + 1, j, k));
                const double wbar = 0.25 * (V.wAt(i, j - 1, k) + V.wAt(i, j - 1, k + 1) + V.wAt(i, j, k) + V.wAt(i, j, k + 1));
                const double euler = dz * xc - dx * zc;
                const double coriolis = 2.0 * (wz * ubar - wx * wbar);
                out.vAt(i, j, k) = nu * work_.vAt(i, j, k) - out.vAt(i, j, k) - euler - coriolis;
            }
        }
    }
    LGY_OMP_FOR_IF
    for (int k = 1; k < nz; ++k) {
        for (int j = 0; j < ny; ++j) {
            const double yc = g.yc(j);
            for (int i = 0; i < nx; ++i) {
                const double xc = g.xc(i);
                const double ubar = 0.25 * (V.uAt(i, j, k - 1) + V.uAt(i + 1, j, k - 1) + V.uAt(i, j, k) + V.uAt(i + 1, j, k));
                const double vbar = 0.25 * (V.vAt(i, j, k - 1) + V.vAt(i, j + 1, k - 1) + V.vAt(i, j, k) + V.vAt(i, j + 1, k));
                const double euler = dx * yc - dy * xc;
                const double coriolis = 2.0 * (wx * vbar - wy * ubar);
                out.wAt(i, j, k) = nu * work_.wAt(i, j, k) - out.wAt(i, j, k) - euler - coriolis;
            }
        }
    }
}

State Stepper::step(const State& s, double dt, StepStats* stats) {
    if (!(dt > 0.0)) throw std::invalid_argument("step: dt must be positive");
    const double vmax = s.v.maxAbs();
    if (!std::isfinite(vmax) || !s.omega.allFinite() || !s.M.allFinite())
        throw NonFinite("state non-finite at t=" + std::to_string(s.t));
    double wn = s.omega.norm();
    if (mode_ == Mode::Linearized) wn += setup_.omega0.norm();
    const double bound = stableDt(vmax, wn);
    if (dt > bound * (1.0 + 1e-9))
        throw CflViolation("dt " + std::to_string(dt) + " exceeds stability bound " + std::to_string(bound));

    const Vec3 omega_n = s.omega;
    const Vec3 omega0 = setup_.omega0;
    const double lambda0 = setup_.lambda0;

    State out = s;
    Vec3 omega_cand = omega_n;
    Vec3 M_cand = s.M;

    const int sweeps = std::max(1, opts_.fixed_point_sweeps);
    for (int sweep = 0; sweep < sweeps; ++sweep) {
        Vec3 omega_dot, omega_mid;
        if (sweep == 0) {
            omega_dot = (omega_n - s.omega_prev) / dt;
            omega_mid = omega_n + 0.5 * dt * omega_dot;
        } else {
            omega_dot = (omega_cand - omega_n) / dt;
            omega_mid = 0.5 * (omega_n + omega_cand);
        }

        if (mode_ == Mode::Nonlinear) {
            M_cand = rotate_M(s.M, omega_mid, dt);
        } else {
            // Perturbation momentum law: Mdot = -omega0 x M + lambda omega0 x omega.
            M_cand = rotate_M(s.M, omega0, dt) + dt * lambda0 * omega0.cross(omega_mid);
        }

        const Vec3 w_cor_1 = (mode_ == Mode::Linearized) ? omega0 : omega_n;
        const Vec3 w_cor_2 = (mode_ == Mode::Linearized) ? omega0 : omega_mid;

        fluidRhs(s.v, w_cor_1, omega_dot, rhs_);
        stage_.u = s.v.u + (0.5 * dt) * rhs_.u;
        stage_.v = s.v.v + (0.5 * dt) * rhs_.v;
        stage_.w = s.v.w + (0.5 * dt) * rhs_.w;
        fluidRhs(stage_, w_cor_2, omega_dot, rhs_);
        out.v.u = s.v.u + dt * rhs_.u;
        out.v.v = s.v.v + dt * rhs_.v;
        out.v.w = s.v.w + dt * rhs_.w;

        if (!out.v.allFinite()) throw NonFinite("fluid state non-finite at t=" + std::to_string(s.t));
        projector_.applyInPlace(out.v, phi_);

        const Vec3 amom = fields::angular_moment(out.v);
        omega_cand = setup_.inertia.applyInverse(M_cand - amom);
        if (!omega_cand.allFinite()) throw NonFinite("omega non-finite at t=" + std::to_string(s.t));

        if (stats && sweep == sweeps - 1) stats->amom = amom;
    }

    out.omega = omega_cand;
    out.omega_prev = omega_n;
    out.M = M_cand;
    out.t = s.t + dt;
    out.step = s.step + 1;
    out.mode = mode_;

    if (stats) {
        stats->l2v = fields::l2_norm(out.v);
        stats->h1v = fields::h1_seminorm(out.v);
    }
    return out;
}

State step(const State& s, const core::SystemSetup& setup, double dt) {
    Stepper st(setup, s.mode);
    return st.step(s, dt);
}

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

namespace {

DiagnosticsRow rowFrom(const State& s, const core::SystemSetup& setup, double l2v, double h1v,
                       const Vec3& amom, double E1, double residual) {
    DiagnosticsRow r;
    r.t = s.t;
    r.omega = s.omega;
    r.M_norm = s.M.norm();
    r.a = -setup.inertia.applyInverse(amom);
    r.omega_inf = s.omega - r.a;
    r.l2v = l2v;
    r.h1v = h1v;
    r.E1 = E1;
    r.energy_residual = residual;

    const Vec3 e = setup.spinAxis();
    const Vec3 omega_pert = (s.mode == Mode::Nonlinear) ? Vec3(s.omega - setup.omega0) : s.omega;
    r.omega_par = e.dot(omega_pert);
    if (setup.m0 == 3) {
        r.omega_perp = Vec3::Zero();
        r.omega_star = Vec3::Zero();
    } else {
        r.omega_perp = s.omega - e.dot(s.omega) * e;
        const Vec3 a_perp = r.a - e.dot(r.a) * e;
        r.omega_star = r.omega_perp - a_perp;
    }

    const auto& inertia = setup.inertia;
    const double aIa = r.a.dot(inertia.apply(r.a));
    r.E = 0.5 * (l2v * l2v - aIa);
    r.scriptE = 0.5 * (l2v * l2v + s.omega.dot(inertia.apply(s.omega)) - 2.0 * r.a.dot(inertia.apply(s.omega)));
    if (setup.m0 == 3 || !(setup.lambda0 > 0.0)) {
        r.G = 0.0;
    } else {
        const Vec3 Iw = inertia.apply(r.omega_star);
        r.G = r.omega_star.dot(Iw) - Iw.squaredNorm() / setup.lambda0;
    }
    r.V = 2.0 * r.E + r.G;
    return r;
}

} // namespace

DiagnosticsRow diagnostics(const State& s, const core::SystemSetup& setup) {
    return rowFrom(s, setup, fields::l2_norm(s.v), fields::h1_seminorm(s.v), fields::angular_moment(s.v),
                   0.0, 0.0);
}

DiagnosticsRow diagnostics(const State& s, const State& prev, const core::SystemSetup& setup,
                           double cumulative_residual) {
    const Vec3 amom = fields::angular_moment(s.v);
    double E1 = 0.0;
    const double dt = s.t - prev.t;
    if (dt > 0.0) {
        FaceField diff = s.v;
        diff -= prev.v;
        const double vt = fields::l2_norm(diff) / dt;
        const Vec3 a_now = -setup.inertia.applyInverse(amom);
        const Vec3 a_prev = -setup.inertia.applyInverse(fields::angular_moment(prev.v));
        const Vec3 adot = (a_now - a_prev) / dt;
        E1 = 0.5 * (vt * vt - adot.dot(setup.inertia.apply(adot)));
    }
    return rowFrom(s, setup, fields::l2_norm(s.v), fields::h1_seminorm(s.v), amom, E1, cumulative_residual);
}

double estimate_c0(const core::SystemSetup& setup, int nsamples, std::uint64_t seed) {
    const Grid g = setup.cavity.grid();
    double max_rayleigh = 0.0;
    for (int i = 0; i < nsamples; ++i) {
        const FaceField V = fields::synth_solenoidal_ic(g, seed + static_cast<std::uint64_t>(i), 1.0);
        const double n2 = fields::inner(V, V);
        if (!(n2 > 0.0)) continue;
        const Vec3 a = -setup.inertia.applyInverse(fields::angular_moment(V));
        max_rayleigh = std::max(max_rayleigh, a.dot(setup.inertia.apply(a)) / n2);
    }
    return 1.0 - max_rayleigh;
}

// ---------------------------------------------------------------------------
// Run loop with energy audit
// ---------------------------------------------------------------------------

RunSummary run(Stepper& stepper, State& state, const RunConfig& cfg, const RowSink& on_row,
               const CheckpointSink& on_checkpoint) {
    const auto& setup = stepper.setup();
    if (!(cfg.dt > 0.0) || !(cfg.t_end > state.t)) throw std::invalid_argument("run: bad dt/t_end");

    StepStats st;
    st.l2v = fields::l2_norm(state.v);
    st.h1v = fields::h1_seminorm(state.v);
    st.amom = fields::angular_moment(state.v);

    DiagnosticsRow row = rowFrom(state, setup, st.l2v, st.h1v, st.amom, 0.0, 0.0);
    if (on_row) on_row(row);

    double resid_cum = 0.0;
    double prev_energy = (stepper.mode() == Mode::Nonlinear) ? row.scriptE : row.V;
    double prev_h1sq = row.h1v * row.h1v;

    RunSummary summary;
    State prev = state;
    const std::int64_t stride = std::max<std::int64_t>(1, cfg.sample_stride);

    while (state.t < cfg.t_end - 0.5 * cfg.dt) {
        prev = state;
        StepStats cur;
        try {
            state = stepper.step(state, cfg.dt, &cur);
        } catch (const NonFinite&) {
            summary.status = RunStatus::Diverged;
            state = prev;  // last finite state
            break;
        }

        DiagnosticsRow r = rowFrom(state, setup, cur.l2v, cur.h1v, cur.amom, 0.0, 0.0);
        const double h1sq = cur.h1v * cur.h1v;
        if (stepper.mode() == Mode::Nonlinear) {
            resid_cum += r.scriptE - prev_energy + setup.nu * cfg.dt * 0.5 * (h1sq + prev_h1sq);
            prev_energy = r.scriptE;
        } else {
            resid_cum += r.V - prev_energy + 2.0 * setup.nu * cfg.dt * 0.5 * (h1sq + prev_h1sq);
            prev_energy = r.V;
        }
        prev_h1sq = h1sq;

        const bool at_end = !(state.t < cfg.t_end - 0.5 * cfg.dt);
        if (state.step % static_cast<std::uint64_t>(stride) == 0 || at_end) {
            if (on_row) on_row(diagnostics(state, prev, setup, resid_cum));
        }
        if (on_checkpoint && cfg.checkpoint_stride > 0 &&
            state.step % static_cast<std::uint64_t>(cfg.checkpoint_stride) == 0)
            on_checkpoint(state);
    }

    summary.t_final = state.t;
    summary.steps = state.step;
    return summary;
}

} // namespace lgy::dynamics
