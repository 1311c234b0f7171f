#include "lgy/shell.hpp"

#include <cctype>
#include <charconv>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace lgy::shell {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmtVec(const Vec3& v) { return fmt(v.x()) + "," + fmt(v.y()) + "," + fmt(v.z()); }

struct Cursor {
    int line, col;
};

double parseDouble(const std::string& s, const Cursor& at) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
        if (pos != s.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ParseError("expected a number, got '" + s + "'", at.line, at.col);
    }
}

std::int64_t parseInt(const std::string& s, const Cursor& at) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(s, &pos, 10);
        if (pos != s.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ParseError("expected an integer, got '" + s + "'", at.line, at.col);
    }
}

Vec3 parseVec(const std::string& s, const Cursor& at) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    parts.push_back(cur);
    if (parts.size() != 3) throw ParseError("expected 'x,y,z', got '" + s + "'", at.line, at.col);
    Vec3 v;
    for (int i = 0; i < 3; ++i) v[i] = parseDouble(parts[static_cast<std::size_t>(i)], at);
    return v;
}

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

} // namespace

Scenario parse_scenario(const std::string& text) {
    Scenario s;
    std::map<std::string, bool> seen;

    using Setter = std::function<void(Scenario&, const std::string&, const Cursor&)>;
    const std::map<std::string, Setter> setters = {
        {"cavity.Lx", [](Scenario& sc, const std::string& v, const Cursor& at) { sc.Lx = parseDouble(v, at); }},
        {"cavity.Ly", [](Scenario& sc, const std::string& v, const Cursor& at) { sc.Ly = parseDouble(v, at); }},
        {"cavity.Lz", [](Scenario& sc, const std::string& v, const Cursor& at) { sc.Lz = parseDouble(v, at); }},
        {"cavity.nx", [](Scenario& sc, const std::string& v, const Cursor& at) { sc.nx = static_cast<int>(parseInt(v, at)); }},
        {"cavity.ny", [](Scenario& sc, const std::string& v, const Cursor& at) { sc.ny = static_cast<int>(parseInt(v, at)); }},
        {"cavity.nz", [](Scenario& sc, const std::string& v, const Cursor& at) { sc.nz = static_cast<int>(parseInt(v, at)); }},
        {"inertia.A", [](Scenario& sc, const std::string& v, const Cursor& at) { sc.A = parseDouble(v, at); }},
        {"inertia.B", [](Scenario& sc, const std::string& v, const Cursor& at) { sc.B = parseDouble(v, at); }},
        {"inertia.C", [](Scenario& sc, const std::string& v, const Cursor& at) { sc.C = parseDouble(v, at); }},
        {"inertia.eps_deg", [](Scenario& sc, const std::string& v, const Cursor& at) { sc.eps_deg = parseDouble(v, at); }},
        {"sim.nu", [](Scenario& sc, const std::string& v, const Cursor& at) { sc.nu = parseDouble(v, at); }},
        {"sim.mode",
         [](Scenario& sc, const std::string& v, const Cursor& at) {
             if (v == "nonlinear")
                 sc.mode = dynamics::Mode::Nonlinear;
             else if (v == "linearized")
                 sc.mode = dynamics::Mode::Linearized;
             else
                 throw ParseError("mode must be 'nonlinear' or 'linearized'", at.line, at.col);
         }},
        {"sim.t_end", [](Scenario& sc, const std::string& v, const Cursor& at) { sc.t_end = parseDouble(v, at); }},
        {"sim.sample_every", [](Scenario& sc, const std::string& v, const Cursor& at) { sc.sample_every = parseDouble(v, at); }},
        {"sim.checkpoint_every", [](Scenario& sc, const std::string& v, const Cursor& at) { sc.checkpoint_every = parseDouble(v, at); }},
        {"sim.dt", [](Scenario& sc, const std::string& v, const Cursor& at) { sc.dt = parseDouble(v, at); }},
        {"sim.dt_safety", [](Scenario& sc, const std::string& v, const Cursor& at) { sc.dt_safety = parseDouble(v, at); }},
        {"sim.fixed_point_sweeps", [](Scenario& sc, const std::string& v, const Cursor& at) { sc.fixed_point_sweeps = static_cast<int>(parseInt(v, at)); }},
        {"sim.spectral_n", [](Scenario& sc, const std::string& v, const Cursor& at) { sc.spectral_n = static_cast<int>(parseInt(v, at)); }},
        {"ic.seed", [](Scenario& sc, const std::string& v, const Cursor& at) { sc.seed = static_cast<std::uint64_t>(parseInt(v, at)); }},
        {"ic.v_h1", [](Scenario& sc, const std::string& v, const Cursor& at) { sc.v_h1 = parseDouble(v, at); }},
        {"ic.omega_base", [](Scenario& sc, const std::string& v, const Cursor& at) { sc.omega_base = parseVec(v, at); }},
        {"ic.omega_delta", [](Scenario& sc, const std::string& v, const Cursor& at) { sc.omega_delta = parseVec(v, at); }},
        {"output.dir", [](Scenario& sc, const std::string& v, const Cursor&) { sc.dir = v; }},
        {"output.plots",
         [](Scenario& sc, const std::string& v, const Cursor& at) {
             if (v == "true")
                 sc.plots = true;
             else if (v == "false")
                 sc.plots = false;
             else
                 throw ParseError("expected 'true' or 'false'", at.line, at.col);
         }},
    };

    std::istringstream in(text);
    std::string raw;
    std::string section;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        std::string line = raw;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']') throw ParseError("unterminated section header", lineno, 1);
            section = trim(line.substr(1, line.size() - 2));
            if (section != "cavity" && section != "inertia" && section != "sim" && section != "ic" &&
                section != "output")
                throw ParseError("unknown section '" + section + "'", lineno, 1);
            continue;
        }

        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("expected 'key = value'", lineno, 1);
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (section.empty()) throw ParseError("key outside of any section", lineno, 1);
        const std::string full = section + "." + key;
        const int col = static_cast<int>(raw.find(key)) + 1;
        const auto it = setters.find(full);
        if (it == setters.end()) throw ParseError("unknown key '" + full + "'", lineno, col);
        if (seen[full]) throw ParseError("duplicate key '" + full + "'", lineno, col);
        seen[full] = true;
        it->second(s, value, Cursor{lineno, col});
    }

    for (const char* req : {"cavity.nx", "cavity.ny", "cavity.nz", "inertia.A", "inertia.B", "inertia.C",
                            "sim.nu", "ic.omega_base"})
        if (!seen[req]) throw ValidationError(std::string("missing required key '") + req + "'");
    return s;
}

Scenario load_scenario(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open scenario file " + file.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str());
}

std::string serialize_scenario(const Scenario& s) {
    std::ostringstream o;
    o << "[cavity]\n";
    o << "Lx = " << fmt(s.Lx) << "\nLy = " << fmt(s.Ly) << "\nLz = " << fmt(s.Lz) << "\n";
    o << "nx = " << s.nx << "\nny = " << s.ny << "\nnz = " << s.nz << "\n\n";
    o << "[inertia]\n";
    o << "A = " << fmt(s.A) << "\nB = " << fmt(s.B) << "\nC = " << fmt(s.C) << "\n";
    o << "eps_deg = " << fmt(s.eps_deg) << "\n\n";
    o << "[sim]\n";
    o << "nu = " << fmt(s.nu) << "\n";
    o << "mode = " << (s.mode == dynamics::Mode::Nonlinear ? "nonlinear" : "linearized") << "\n";
    o << "t_end = " << fmt(s.t_end) << "\n";
    o << "sample_every = " << fmt(s.sample_every) << "\n";
    o << "checkpoint_every = " << fmt(s.checkpoint_every) << "\n";
    if (s.dt) o << "dt = " << fmt(*s.dt) << "\n";
    o << "dt_safety = " << fmt(s.dt_safety) << "\n";
    o << "fixed_point_sweeps = " << s.fixed_point_sweeps << "\n";
    o << "spectral_n = " << s.spectral_n << "\n\n";
    o << "[ic]\n";
    o << "seed = " << s.seed << "\n";
    o << "v_h1 = " << fmt(s.v_h1) << "\n";
    o << "omega_base = " << fmtVec(s.omega_base) << "\n";
    o << "omega_delta = " << fmtVec(s.omega_delta) << "\n\n";
    o << "[output]\n";
    o << "dir = " << s.dir << "\n";
    o << "plots = " << (s.plots ? "true" : "false") << "\n";
    return o.str();
}

core::RawConfig Scenario::rawConfig() const {
    core::RawConfig c;
    c.Lx = Lx;
    c.Ly = Ly;
    c.Lz = Lz;
    c.nx = nx;
    c.ny = ny;
    c.nz = nz;
    c.A = A;
    c.B = B;
    c.C = C;
    c.nu = nu;
    c.omega0 = omega_base;
    c.eps_deg = eps_deg;
    return c;
}

core::SystemSetup validate_scenario(const Scenario& s, bool allow_zero_omega0) {
    if (!(s.t_end > 0.0)) throw ValidationError("t_end must be positive");
    if (!(s.sample_every > 0.0)) throw ValidationError("sample_every must be positive");
    if (s.checkpoint_every < 0.0) throw ValidationError("checkpoint_every must be nonnegative");
    if (!(s.v_h1 >= 0.0)) throw ValidationError("v_h1 must be nonnegative");
    if (s.dt && !(*s.dt > 0.0)) throw ValidationError("dt must be positive");
    if (!(s.dt_safety > 0.0) || s.dt_safety > 1.0)
        throw ValidationError("dt_safety must be in (0, 1]");
    if (s.fixed_point_sweeps < 1) throw ValidationError("fixed_point_sweeps must be >= 1");
    if (s.spectral_n < 1) throw ValidationError("spectral_n must be >= 1");
    try {
        return core::build_system(s.rawConfig(), allow_zero_omega0);
    } catch (const core::SetupError& e) {
        throw ValidationError(e.what());
    }
}

} // namespace lgy::shell
