#include "lgy/shell.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace lgy::shell {

double choose_dt(const Scenario& s, const core::SystemSetup& setup, const dynamics::State& init) {
    if (s.dt) return *s.dt;
    dynamics::Stepper stepper(setup, s.mode,
                              dynamics::StepOptions{s.fixed_point_sweeps, 0.2, 0.5});
    return s.dt_safety * stepper.stableDt(init);
}

namespace {

void writePlots(const std::vector<dynamics::DiagnosticsRow>& rows, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    struct Col {
        const char* name;
        double (*get)(const dynamics::DiagnosticsRow&);
    };
    const Col cols[] = {
        {"om_x", [](const dynamics::DiagnosticsRow& r) { return r.omega.x(); }},
        {"om_y", [](const dynamics::DiagnosticsRow& r) { return r.omega.y(); }},
        {"om_z", [](const dynamics::DiagnosticsRow& r) { return r.omega.z(); }},
        {"M_norm", [](const dynamics::DiagnosticsRow& r) { return r.M_norm; }},
        {"E", [](const dynamics::DiagnosticsRow& r) { return r.E; }},
        {"scriptE", [](const dynamics::DiagnosticsRow& r) { return r.scriptE; }},
        {"G", [](const dynamics::DiagnosticsRow& r) { return r.G; }},
        {"V", [](const dynamics::DiagnosticsRow& r) { return r.V; }},
        {"l2v", [](const dynamics::DiagnosticsRow& r) { return r.l2v; }},
        {"h1v", [](const dynamics::DiagnosticsRow& r) { return r.h1v; }},
        {"E1", [](const dynamics::DiagnosticsRow& r) { return r.E1; }},
        {"energy_residual", [](const dynamics::DiagnosticsRow& r) { return r.energy_residual; }},
    };
    char buf[64];
    for (const auto& c : cols) {
        std::ofstream out(dir / (std::string(c.name) + ".dat"), std::ios::binary);
        if (!out) throw IoError("cannot open plot file for " + std::string(c.name));
        for (const auto& r : rows) {
            std::snprintf(buf, sizeof buf, "%.17g %.17g\n", r.t, c.get(r));
            out << buf;
        }
    }
}

} // namespace

RunArtifacts run_scenario(const Scenario& s, const RunOptions& opts) {
    core::SystemSetup setup = validate_scenario(s);
    const fields::Grid grid = setup.cavity.grid();

    dynamics::State state(grid);
    if (opts.restart) {
        if (!(opts.restart->v.grid() == grid)) throw ValidationError("restart state grid mismatch");
        state = *opts.restart;
        state.mode = s.mode;
    } else {
        state.v = fields::synth_solenoidal_ic(grid, s.seed, s.v_h1);
        state.mode = s.mode;
        if (s.mode == dynamics::Mode::Nonlinear) {
            state.omega = s.omegaInitial();
        } else {
            state.omega = s.omega_delta;  // linearized state holds the perturbation
        }
        state.omega_prev = state.omega;
        state.M = setup.inertia.apply(state.omega) + fields::angular_moment(state.v);
    }

    dynamics::Stepper stepper(setup, s.mode, dynamics::StepOptions{s.fixed_point_sweeps, 0.2, 0.5});
    const double dt = s.dt ? *s.dt : s.dt_safety * stepper.stableDt(state);

    dynamics::RunConfig cfg;
    cfg.mode = s.mode;
    cfg.dt = dt;
    cfg.t_end = s.t_end;
    cfg.sample_stride = std::max<std::int64_t>(1, std::llround(s.sample_every / dt));
    cfg.checkpoint_stride =
        s.checkpoint_every > 0.0 ? std::max<std::int64_t>(1, std::llround(s.checkpoint_every / dt)) : 0;
    cfg.step_opts = dynamics::StepOptions{s.fixed_point_sweeps, 0.2, 0.5};

    const std::filesystem::path outdir(s.dir);
    if (opts.write_outputs) std::filesystem::create_directories(outdir);

    RunArtifacts arts{.summary = {}, .rows = {}, .final_state = state, .setup = setup, .dt = dt,
                      .M0 = state.M, .E0 = 0.0};

    dynamics::CheckpointSink ckpt;
    if (opts.write_outputs && cfg.checkpoint_stride > 0)
        ckpt = [&](const dynamics::State& st) {
            write_checkpoint(outdir / ("checkpoint_" + std::to_string(st.step) + ".lgy"), st, setup);
        };

    arts.summary = dynamics::run(
        stepper, state, cfg, [&](const dynamics::DiagnosticsRow& r) { arts.rows.push_back(r); }, ckpt);
    arts.final_state = state;
    arts.E0 = arts.rows.empty() ? 0.0 : arts.rows.front().E;

    if (opts.write_outputs) {
        write_timeseries(arts.rows, outdir / "timeseries.csv");
        write_checkpoint(outdir / "checkpoint_final.lgy", arts.final_state, setup);
        {
            std::ofstream sc(outdir / "scenario.ini", std::ios::binary);
            if (!sc) throw IoError("cannot write scenario.ini");
            sc << serialize_scenario(s);
        }
        if (s.plots) writePlots(arts.rows, outdir / "plots");
    }
    return arts;
}

} // namespace lgy::shell
