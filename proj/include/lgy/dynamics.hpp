#pragma once

#include "lgy/core.hpp"
#include "lgy/fields.hpp"
#include "lgy/types.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

namespace lgy::dynamics {

enum class Mode { Nonlinear, Linearized };

/// Full coupled state. In nonlinear mode omega/M are the total body-frame
/// angular velocity and angular momentum; in linearized mode they are the
/// perturbation quantities of Eq-level linearization about the base spin.
struct State {
    fields::FaceField v;
    Vec3 omega = Vec3::Zero();
    Vec3 omega_prev = Vec3::Zero();  // for the lagged omega-dot
    Vec3 M = Vec3::Zero();
    double t = 0.0;
    std::uint64_t step = 0;
    Mode mode = Mode::Nonlinear;

    explicit State(const fields::Grid& g) : v(g) {}
};

struct DiagnosticsRow {
    double t = 0.0;
    Vec3 omega = Vec3::Zero();
    double M_norm = 0.0;
    Vec3 a = Vec3::Zero();          // -I^{-1} integral(x cross v)
    Vec3 omega_inf = Vec3::Zero();  // omega - a
    double omega_par = 0.0;         // spin-axis component of the perturbation omega
    Vec3 omega_perp = Vec3::Zero();
    Vec3 omega_star = Vec3::Zero();  // omega_perp - a_perp
    double E = 0.0;                  // 1/2 (|v|^2 - a.I.a)
    double scriptE = 0.0;            // 1/2 (|v|^2 + w.I.w - 2 a.I.w)
    double G = 0.0;                  // w*.I.w* - (I.w*)^2 / lambda
    double V = 0.0;                  // 2E + G
    double l2v = 0.0;
    double h1v = 0.0;
    double E1 = 0.0;                 // 1/2 (|v_t|^2 - adot.I.adot), backward difference
    double energy_residual = 0.0;    // cumulative audit residual (mode-appropriate)
};

struct CflViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NonFinite : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Exact rotation of M about omega by angle -|omega| dt (Rodrigues); solves
/// Mdot = -omega x M for frozen omega and preserves |M| to roundoff.
Vec3 rotate_M(const Vec3& M, const Vec3& omega, double dt);

/// omega = I^{-1} (M - integral(x cross v)).
Vec3 recover_omega(const Vec3& M, const fields::FaceField& V, const core::InertiaModel& inertia);

struct StepOptions {
    int fixed_point_sweeps = 2;
    double cfl_diffusive = 0.2;
    double cfl_advective = 0.5;
};

struct StepStats {
    double l2v = 0.0;
    double h1v = 0.0;
    Vec3 amom = Vec3::Zero();  // integral(x cross v) of the new state
};

/// Coupled integrator with per-grid scratch; one instance per thread of
/// control. Step order: advance M (exact rotation / linearized body law),
/// explicit two-stage fluid update, projection, algebraic omega recovery.
class Stepper {
public:
    Stepper(const core::SystemSetup& setup, Mode mode, StepOptions opts = {});

    const core::SystemSetup& setup() const { return setup_; }
    Mode mode() const { return mode_; }

    /// Largest stable dt for the current state:
    /// min(cfl_diff h^2/(6 nu), cfl_adv h/(|v|_inf + |omega| Lmax)).
    double stableDt(const State& s) const;
    double stableDt(double vmax, double omega_norm) const;

    /// One coupled step. Throws CflViolation if dt exceeds the bound for the
    /// current state and NonFinite when blow-up is detected.
    State step(const State& s, double dt, StepStats* stats = nullptr);

private:
    void fluidRhs(const fields::FaceField& V, const Vec3& omega, const Vec3& omega_dot,
                  fields::FaceField& out);

    core::SystemSetup setup_;
    Mode mode_;
    StepOptions opts_;
    fields::Projector projector_;
    fields::FaceField rhs_, stage_, work_;
    fields::CellScalar phi_;
};

/// Convenience one-shot step (builds a Stepper; tests and small callers).
State step(const State& s, const core::SystemSetup& setup, double dt);

/// Diagnostics of a single state; E1 and energy_residual are zero without
/// history (backward differences undefined at the first sample).
DiagnosticsRow diagnostics(const State& s, const core::SystemSetup& setup);
/// Diagnostics with history: E1 from (s, prev) backward differences;
/// cumulative_residual is carried through from the run audit.
DiagnosticsRow diagnostics(const State& s, const State& prev, const core::SystemSetup& setup,
                           double cumulative_residual);

/// Lower constant of c0 |v|^2 <= 2E: 1 - max Rayleigh quotient of
/// (a.I.a)/|v|^2 over seeded random solenoidal fields.
double estimate_c0(const core::SystemSetup& setup, int nsamples = 200, std::uint64_t seed = 2024);

enum class RunStatus { Completed, Diverged };

struct RunConfig {
    Mode mode = Mode::Nonlinear;
    double dt = 0.0;
    double t_end = 0.0;
    std::int64_t sample_stride = 1;      // rows every this many steps
    std::int64_t checkpoint_stride = 0;  // 0 = never
    StepOptions step_opts;
};

struct RunSummary {
    RunStatus status = RunStatus::Completed;
    double t_final = 0.0;
    std::uint64_t steps = 0;
};

using RowSink = std::function<void(const DiagnosticsRow&)>;
using CheckpointSink = std::function<void(const State&)>;

/// Integrates to t_end (or divergence), emitting a row for the initial state,
/// every sample_stride steps, and the final state. Maintains the discrete
/// energy audit: nonlinear rows carry the cumulative scriptE residual
/// (energy equality), linearized rows the cumulative V = 2E+G residual.
/// On NonFinite the run is marked Diverged and `final` holds the last finite
/// state. CflViolation propagates.
RunSummary run(Stepper& stepper, State& state, const RunConfig& cfg, const RowSink& on_row,
               const CheckpointSink& on_checkpoint = {});

} // namespace lgy::dynamics
