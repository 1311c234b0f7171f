#pragma once

#include "lgy/core.hpp"
#include "lgy/dynamics.hpp"
#include "lgy/spectral.hpp"
#include "lgy/stability.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace lgy::shell {

// ---------------------------------------------------------------------------
// Errors, mapped to CLI exit codes: 1 validation, 2 runtime, 3 I/O.
// ---------------------------------------------------------------------------

struct ParseError : std::runtime_error {
    int line = 0, column = 0;
    ParseError(const std::string& msg, int line_, int column_)
        : std::runtime_error("parse error at " + std::to_string(line_) + ":" + std::to_string(column_) +
                             ": " + msg),
          line(line_),
          column(column_) {}
};

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UnknownPreset : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Scenario
// ---------------------------------------------------------------------------

/// Scenario file: INI-style sections [cavity] [inertia] [sim] [ic] [output];
/// unknown keys are rejected.
struct Scenario {
    // [cavity]
    double Lx = 1.0, Ly = 1.0, Lz = 1.0;
    int nx = 0, ny = 0, nz = 0;
    // [inertia]
    double A = 0.0, B = 0.0, C = 0.0;
    double eps_deg = 1e-9;
    // [sim]
    double nu = 0.0;
    dynamics::Mode mode = dynamics::Mode::Nonlinear;
    double t_end = 1.0;
    double sample_every = 0.01;
    double checkpoint_every = 0.0;  // 0 = never
    std::optional<double> dt;       // explicit dt; otherwise the auto policy
    double dt_safety = 1.0;         // scales the auto stability bound
    int fixed_point_sweeps = 2;
    int spectral_n = 64;            // reduced-basis size for `spectrum`
    // [ic]
    std::uint64_t seed = 0;
    double v_h1 = 0.0;              // H1 amplitude of the random solenoidal field
    Vec3 omega_base = Vec3::Zero(); // permanent-rotation base (must be in S(lambda))
    Vec3 omega_delta = Vec3::Zero();
    // [output]
    std::string dir = "out";
    bool plots = true;

    Vec3 omegaInitial() const { return omega_base + omega_delta; }
    core::RawConfig rawConfig() const;
};

/// Parses scenario text. ParseError carries line/column; semantic problems
/// surface as ValidationError (wrapping core::SetupError codes).
Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::filesystem::path& file);

/// Canonical INI serialization; parse(serialize(s)) == s.
std::string serialize_scenario(const Scenario& s);

/// Runs core validation (build_system) on the scenario.
core::SystemSetup validate_scenario(const Scenario& s, bool allow_zero_omega0 = false);

// ---------------------------------------------------------------------------
// Time series CSV
// ---------------------------------------------------------------------------

extern const char* const kTimeseriesHeader;

std::string timeseries_row(const dynamics::DiagnosticsRow& r);
void write_timeseries(const std::vector<dynamics::DiagnosticsRow>& rows, const std::filesystem::path& file);

struct Timeseries {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> data;  // column-major

    const std::vector<double>& column(const std::string& name) const;
};
Timeseries read_timeseries(const std::filesystem::path& file);

// ---------------------------------------------------------------------------
// Checkpoints: magic "LGY1", u32 version, u32 nx,ny,nz, f64 Lx,Ly,Lz, f64 nu,
// f64 A,B,C, f64 omega0[3], f64 t, u64 step, u,v,w face arrays, f64 omega[3],
// omega_prev[3], M[3]; little-endian.
// ---------------------------------------------------------------------------

struct Checkpoint {
    std::uint32_t version = 1;
    std::uint32_t nx = 0, ny = 0, nz = 0;
    double Lx = 0, Ly = 0, Lz = 0;
    double nu = 0;
    double A = 0, B = 0, C = 0;
    Vec3 omega0 = Vec3::Zero();
    double t = 0;
    std::uint64_t step = 0;
    std::vector<double> u, v, w;
    Vec3 omega = Vec3::Zero(), omega_prev = Vec3::Zero(), M = Vec3::Zero();
};

void write_checkpoint(const std::filesystem::path& file, const dynamics::State& state,
                      const core::SystemSetup& setup);
Checkpoint read_checkpoint(const std::filesystem::path& file);

/// Rebuilds a State from a checkpoint; throws ValidationError when the
/// fingerprint does not match the setup.
dynamics::State state_from_checkpoint(const Checkpoint& c, const core::SystemSetup& setup,
                                      dynamics::Mode mode);

// ---------------------------------------------------------------------------
// Eigenreport JSON
// ---------------------------------------------------------------------------

std::string eigreport_json(const spectral::EigReport& report, const Scenario& scenario);
void write_eigreport(const spectral::EigReport& report, const Scenario& scenario,
                     const std::filesystem::path& file);

// ---------------------------------------------------------------------------
// Run orchestration
// ---------------------------------------------------------------------------

struct RunArtifacts {
    dynamics::RunSummary summary;
    std::vector<dynamics::DiagnosticsRow> rows;
    dynamics::State final_state;
    core::SystemSetup setup;
    double dt = 0.0;
    Vec3 M0 = Vec3::Zero();
    double E0 = 0.0;  // E of the initial data (attainability predicate input)
};

struct RunOptions {
    bool write_outputs = true;      // timeseries/checkpoints/plots under scenario.dir
    std::optional<dynamics::State> restart;  // resume from this state
};

RunArtifacts run_scenario(const Scenario& s, const RunOptions& opts = {});

/// dt from the scenario policy evaluated on the initial state.
double choose_dt(const Scenario& s, const core::SystemSetup& setup, const dynamics::State& init);

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

std::vector<std::string> preset_names();
Scenario make_preset(const std::string& name);  // throws UnknownPreset

struct PresetOutcome {
    Scenario scenario;
    RunArtifacts artifacts;
    std::string summary_json;
};

/// Runs the preset scenario, writes timeseries + plot data + summary.json
/// (classification, decay/growth fits, attainability) under out_dir.
PresetOutcome run_preset(const std::string& name, const std::filesystem::path& out_dir);

} // namespace lgy::shell
