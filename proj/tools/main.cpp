// lgy: simulate and analyze the inertial motion of a rigid body with a
// liquid-filled cavity. Subcommands: simulate, spectrum, classify, attain,
// fit-decay, preset, checkpoint-info.

#include <CLI11.hpp>

#include "lgy/shell.hpp"

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitIo = 3;

lgy::Vec3 parseTriple(const std::string& s, const std::string& what) {
    std::vector<double> vals;
    std::string cur;
    for (char c : s + ",") {
        if (c == ',') {
            try {
                vals.push_back(std::stod(cur));
            } catch (const std::exception&) {
                throw lgy::shell::ValidationError(what + ": expected three comma-separated numbers");
            }
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (vals.size() != 3) throw lgy::shell::ValidationError(what + ": expected three comma-separated numbers");
    return {vals[0], vals[1], vals[2]};
}

int runSimulate(const std::string& scenario_file, const std::string& restart_file) {
    lgy::shell::Scenario s = lgy::shell::load_scenario(scenario_file);
    lgy::shell::RunOptions opts;
    if (!restart_file.empty()) {
        const auto setup = lgy::shell::validate_scenario(s);
        const auto ckpt = lgy::shell::read_checkpoint(restart_file);
        opts.restart = lgy::shell::state_from_checkpoint(ckpt, setup, s.mode);
    }
    const auto arts = lgy::shell::run_scenario(s, opts);
    const auto& fin = arts.rows.back();
    std::printf("status: %s\n", arts.summary.status == lgy::dynamics::RunStatus::Completed ? "completed" : "diverged");
    std::printf("t_final: %.17g  steps: %llu  dt: %.17g\n", arts.summary.t_final,
                static_cast<unsigned long long>(arts.summary.steps), arts.dt);
    std::printf("final: l2v=%.6g h1v=%.6g |M|=%.17g omega=(%.6g, %.6g, %.6g)\n", fin.l2v, fin.h1v,
                fin.M_norm, fin.omega.x(), fin.omega.y(), fin.omega.z());
    std::printf("outputs in %s\n", s.dir.c_str());
    return kExitOk;
}

int runSpectrum(const std::string& scenario_file) {
    lgy::shell::Scenario s = lgy::shell::load_scenario(scenario_file);
    const auto setup = lgy::shell::validate_scenario(s, /*allow_zero_omega0=*/true);
    const auto basis = lgy::spectral::stokes_modes(setup.cavity, setup.nu, s.spectral_n);
    const auto pencil = lgy::spectral::assemble_pencil(basis, setup);
    const int m_expected = setup.omega0.norm() > 0.0 ? setup.m0 : 3;
    const auto report = lgy::spectral::eigenspectrum(pencil, m_expected);

    std::filesystem::create_directories(s.dir);
    const auto file = std::filesystem::path(s.dir) / "eigreport.json";
    lgy::shell::write_eigreport(report, s, file);
    std::printf("verdict: %s\n",
                report.verdict == lgy::spectral::SpectrumVerdict::AllPositive ? "AllPositive" : "SomeNegative");
    std::printf("zero_multiplicity: %d (expected %d), semisimple: %s\n", report.zero_multiplicity,
                m_expected, report.semisimple ? "true" : "false");
    std::printf("min Re over nonzero spectrum: %.6g, min |Re|: %.6g, mu1: %.6g\n", report.min_re_nonzero,
                report.min_abs_re_nonzero, report.mu1);
    std::printf("eigreport: %s\n", file.c_str());
    return kExitOk;
}

int runClassify(const std::string& abc, const std::string& axis, double eps) {
    const lgy::Vec3 m = parseTriple(abc, "--abc");
    lgy::Vec3 e = parseTriple(axis, "--axis");
    if (!(e.norm() > 0.0)) throw lgy::shell::ValidationError("--axis: must be nonzero");
    e.normalize();
    try {
        const auto v = lgy::stability::classify(m.x(), m.y(), m.z(), e, eps);
        std::printf("case %s: %s\n", lgy::stability::to_string(v.case_id), lgy::stability::to_string(v.verdict));
        std::printf("lambda = %.17g, m = %d\n", v.lambda, v.m);
        return kExitOk;
    } catch (const lgy::stability::NotAPermanentAxis&) {
        std::fprintf(stderr, "not a permanent rotation axis\n");
        return kExitValidation;
    }
}

int runAttain(const std::string& abc, const std::string& omega0, double E0, double eps) {
    const lgy::Vec3 m = parseTriple(abc, "--abc");
    const lgy::Vec3 w0 = parseTriple(omega0, "--omega0");
    const auto a = lgy::stability::attainability(E0, w0, m.x(), m.y(), m.z(), eps);
    std::printf("%s\n", lgy::stability::to_string(a));
    return kExitOk;
}

int runFitDecay(const std::string& csv, const std::string& column, double lo, double hi) {
    const auto ts = lgy::shell::read_timeseries(csv);
    const auto& t = ts.column("t");
    const auto& y = ts.column(column);
    lgy::stability::FitPolicy pol;
    pol.lo_frac = lo;
    pol.hi_frac = hi;
    const auto fit = lgy::stability::fit_decay(t, y, pol, column);
    std::printf("rate %.6g\n", fit.rate);
    std::printf("r_squared %.8g  window [%.6g, %.6g]\n", fit.r_squared, fit.t_begin, fit.t_end);
    return kExitOk;
}

int runPreset(const std::string& name, const std::string& outdir) {
    const std::string dir = outdir.empty() ? ("out/" + name) : outdir;
    const auto outcome = lgy::shell::run_preset(name, dir);
    std::printf("%s", outcome.summary_json.c_str());
    std::printf("artifacts in %s\n", dir.c_str());
    return kExitOk;
}

int runCheckpointInfo(const std::string& file) {
    const auto c = lgy::shell::read_checkpoint(file);
    std::printf("version: %u\n", c.version);
    std::printf("grid: %u x %u x %u, box %.17g x %.17g x %.17g\n", c.nx, c.ny, c.nz, c.Lx, c.Ly, c.Lz);
    std::printf("nu: %.17g  A,B,C: %.17g, %.17g, %.17g\n", c.nu, c.A, c.B, c.C);
    std::printf("omega0: (%.17g, %.17g, %.17g)\n", c.omega0.x(), c.omega0.y(), c.omega0.z());
    std::printf("t: %.17g  step: %llu\n", c.t, static_cast<unsigned long long>(c.step));
    std::printf("omega: (%.17g, %.17g, %.17g)\n", c.omega.x(), c.omega.y(), c.omega.z());
    std::printf("M: (%.17g, %.17g, %.17g)  |M| = %.17g\n", c.M.x(), c.M.y(), c.M.z(), c.M.norm());
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"liquid-filled gyrostat: coupled simulation, spectra, and stability analysis"};
    app.require_subcommand(1);

    std::string scenario_file, restart_file, abc, axis, omega0, csv, column, preset_name, ckpt_file, outdir;
    double E0 = 0.0, eps = 1e-9, lo = 1e-8, hi = 1e-3;

    auto* sim = app.add_subcommand("simulate", "run a scenario file and write time series + checkpoints");
    sim->add_option("scenario", scenario_file, "scenario file (INI)")->required();
    sim->add_option("--restart", restart_file, "resume from a checkpoint file");

    auto* spec = app.add_subcommand("spectrum", "assemble the reduced pencil and report its spectrum");
    spec->add_option("scenario", scenario_file, "scenario file (INI)")->required();

    auto* cls = app.add_subcommand("classify", "classify a permanent rotation axis");
    cls->add_option("--abc", abc, "moments A,B,C")->required();
    cls->add_option("--axis", axis, "rotation axis x,y,z")->required();
    cls->add_option("--eps-deg", eps, "degeneracy tolerance");

    auto* att = app.add_subcommand("attain", "evaluate the terminal-axis guarantee inequalities");
    att->add_option("--abc", abc, "moments A,B,C")->required();
    att->add_option("--omega0", omega0, "initial angular velocity x,y,z")->required();
    att->add_option("--E0", E0, "initial perturbation energy E(0)")->required();
    att->add_option("--eps-deg", eps, "degeneracy tolerance");

    auto* fit = app.add_subcommand("fit-decay", "fit an exponential rate to a time-series column");
    fit->add_option("csv", csv, "time series CSV")->required();
    fit->add_option("--column", column, "column to fit")->required();
    fit->add_option("--lo-frac", lo, "window lower bound as a fraction of max");
    fit->add_option("--hi-frac", hi, "window upper bound as a fraction of max");

    auto* pre = app.add_subcommand("preset", "run a named experiment preset");
    pre->add_option("name", preset_name, "preset name")->required();
    pre->add_option("--out", outdir, "output directory (default out/<name>)");

    auto* ck = app.add_subcommand("checkpoint-info", "print checkpoint header and state summary");
    ck->add_option("file", ckpt_file, "checkpoint file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) return runSimulate(scenario_file, restart_file);
        if (spec->parsed()) return runSpectrum(scenario_file);
        if (cls->parsed()) return runClassify(abc, axis, eps);
        if (att->parsed()) return runAttain(abc, omega0, E0, eps);
        if (fit->parsed()) return runFitDecay(csv, column, lo, hi);
        if (pre->parsed()) return runPreset(preset_name, outdir);
        if (ck->parsed()) return runCheckpointInfo(ckpt_file);
    } catch (const lgy::shell::IoError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return kExitIo;
    } catch (const lgy::shell::ParseError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return kExitValidation;
    } catch (const lgy::shell::FormatError& e) {
        std::fprintf(stderr, "format error: %s\n", e.what());
        return kExitValidation;
    } catch (const lgy::shell::ValidationError& e) {
        std::fprintf(stderr, "validation error: %s\n", e.what());
        return kExitValidation;
    } catch (const lgy::shell::UnknownPreset& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return kExitValidation;
    } catch (const lgy::core::SetupError& e) {
        std::fprintf(stderr, "validation error: %s\n", e.what());
        return kExitValidation;
    } catch (const lgy::stability::WindowEmpty& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return kExitRuntime;
    } catch (const std::filesystem::filesystem_error& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return kExitIo;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitRuntime;
    }
    return kExitOk;
}
