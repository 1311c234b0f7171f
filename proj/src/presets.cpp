#include "lgy/shell.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>

namespace lgy::shell {

namespace {

Scenario baseScenario() {
    Scenario s;
    s.Lx = s.Ly = s.Lz = 1.0;
    s.nx = s.ny = s.nz = 32;
    s.eps_deg = 1e-9;
    s.mode = dynamics::Mode::Nonlinear;
    s.dt_safety = 1.0;
    s.fixed_point_sweeps = 2;
    s.spectral_n = 64;
    s.plots = true;
    return s;
}

} // namespace

std::vector<std::string> preset_names() {
    return {"kelvin-stable", "kelvin-unstable", "soda-can", "zhukovsky-longrun"};
}

Scenario make_preset(const std::string& name) {
    Scenario s = baseScenario();
    if (name == "kelvin-stable") {
        // Spin about the maximum-moment axis; small seeded perturbation.
        s.A = 1.0;
        s.B = 2.0;
        s.C = 3.0;
        s.nu = 0.05;
        s.omega_base = Vec3(0, 0, 1);
        s.omega_delta = Vec3(0.01, 0, 0);
        s.v_h1 = 0.05;
        s.seed = 11;
        s.t_end = 28.0;
        s.sample_every = 0.02;
        s.dir = "out/kelvin-stable";
    } else if (name == "kelvin-unstable") {
        // Spin about the minimum-moment axis; tiny perturbation grows.
        s.A = 1.0;
        s.B = 2.0;
        s.C = 3.0;
        s.nu = 0.05;
        s.omega_base = Vec3(1, 0, 0);
        s.omega_delta = Vec3(0, 1e-4, 0);
        s.v_h1 = 1e-4;
        s.seed = 12;
        s.t_end = 60.0;
        s.sample_every = 0.05;
        s.dir = "out/kelvin-unstable";
    } else if (name == "soda-can") {
        // Two equal moments below the third; in-plane spin axis.
        s.A = 1.0;
        s.B = 1.0;
        s.C = 3.0;
        s.nu = 0.05;
        s.omega_base = Vec3(M_SQRT1_2, M_SQRT1_2, 0);
        s.omega_delta = Vec3(0, 0, 1e-3);
        s.v_h1 = 1e-3;
        s.seed = 13;
        s.t_end = 60.0;
        s.sample_every = 0.05;
        s.dir = "out/soda-can";
    } else if (name == "zhukovsky-longrun") {
        // Generic large data relaxing to rigid rotation about e3.
        s.A = 1.0;
        s.B = 2.0;
        s.C = 3.0;
        s.nu = 0.05;
        s.omega_base = Vec3(0, 0, 1);
        s.omega_delta = Vec3(0.3, -0.25, 0.15);
        s.v_h1 = 1.5;
        s.seed = 14;
        s.t_end = 30.0;
        s.sample_every = 0.02;
        s.dir = "out/zhukovsky-longrun";
    } else {
        std::string msg = "unknown preset '" + name + "'; available:";
        for (const auto& p : preset_names()) msg += " " + p;
        throw UnknownPreset(msg);
    }
    return s;
}

namespace {

nlohmann::json fitJson(const stability::DecayFit& f) {
    return {{"rate", f.rate},
            {"r_squared", f.r_squared},
            {"window", {f.t_begin, f.t_end}},
            {"quantity", f.quantity}};
}

} // namespace

PresetOutcome run_preset(const std::string& name, const std::filesystem::path& out_dir) {
    Scenario scn = make_preset(name);
    scn.dir = out_dir.string();
    RunArtifacts arts = run_scenario(scn);

    nlohmann::json j;
    j["preset"] = name;
    j["status"] = arts.summary.status == dynamics::RunStatus::Completed ? "completed" : "diverged";
    j["t_final"] = arts.summary.t_final;
    j["steps"] = arts.summary.steps;
    j["dt"] = arts.dt;

    const stability::StabilityVerdict cls =
        stability::classify(scn.A, scn.B, scn.C, scn.omega_base.normalized(), scn.eps_deg);
    j["classification"] = {{"case", stability::to_string(cls.case_id)},
                           {"verdict", stability::to_string(cls.verdict)},
                           {"lambda", cls.lambda},
                           {"m", cls.m}};

    const bool momentum_zero = arts.M0.norm() <= 1e-12 * std::max(1.0, scn.C);
    stability::Attainability att =
        momentum_zero ? stability::Attainability::NoGuarantee
                      : stability::attainability(arts.E0, scn.omegaInitial(), scn.A, scn.B, scn.C, scn.eps_deg);
    j["attainability"] = {{"verdict", stability::to_string(att)}, {"momentum_zero", momentum_zero}};
    if (momentum_zero) j["attainability"]["note"] = "initial total angular momentum is zero";

    // Series for fitting.
    const auto& rows = arts.rows;
    std::vector<double> t, l2v, dev;
    t.reserve(rows.size());
    const Vec3 omega_ref =
        (cls.verdict == stability::Verdict::Stable) ? rows.back().omega : scn.omega_base;
    for (const auto& r : rows) {
        t.push_back(r.t);
        l2v.push_back(r.l2v);
        dev.push_back(std::sqrt(r.l2v * r.l2v + (r.omega - omega_ref).squaredNorm()));
    }

    j["fits"] = nlohmann::json::object();
    if (cls.verdict == stability::Verdict::Stable) {
        try {
            j["fits"]["l2v"] = fitJson(stability::fit_decay(t, l2v, {}, "l2v"));
        } catch (const stability::WindowEmpty& e) {
            j["fits"]["l2v"] = {{"error", e.what()}};
        }
        std::vector<double> omdev(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) omdev[i] = (rows[i].omega - omega_ref).norm();
        stability::FitPolicy pol;
        pol.lo_frac = 1e-6;
        pol.hi_frac = 1e-3;
        try {
            j["fits"]["omega_dev"] = fitJson(stability::fit_decay(t, omdev, pol, "omega_dev"));
        } catch (const stability::WindowEmpty& e) {
            j["fits"]["omega_dev"] = {{"error", e.what()}};
        }
    } else {
        const double dev0 = dev.front() > 0.0 ? dev.front() : 1e-300;
        const double devmax = *std::max_element(dev.begin(), dev.end());
        j["growth"] = {{"factor", devmax / dev0}, {"reached_10x", devmax >= 10.0 * dev0}};
        stability::FitPolicy pol;
        pol.lo_frac = std::min(0.02, 3.0 * dev0 / devmax);
        pol.hi_frac = 0.2;
        try {
            j["fits"]["deviation_growth"] = fitJson(stability::fit_decay(t, dev, pol, "deviation_growth"));
        } catch (const stability::WindowEmpty& e) {
            j["fits"]["deviation_growth"] = {{"error", e.what()}};
        }
    }

    const auto& fin = rows.back();
    const Vec3 wf = fin.omega;
    nlohmann::json jf;
    jf["t"] = fin.t;
    jf["l2v"] = fin.l2v;
    jf["omega"] = {wf.x(), wf.y(), wf.z()};
    jf["M_norm"] = fin.M_norm;
    if (wf.norm() > 0.0) {
        const double c = std::clamp(std::abs(wf.normalized().dot(Vec3(0, 0, 1))), 0.0, 1.0);
        jf["angle_to_e3_rad"] = std::acos(c);
    }
    j["final"] = jf;

    PresetOutcome out{std::move(scn), std::move(arts), j.dump(2) + "\n"};
    std::ofstream sj(out_dir / "summary.json", std::ios::binary);
    if (!sj) throw IoError("cannot write summary.json");
    sj << out.summary_json;
    return out;
}

} // namespace lgy::shell
