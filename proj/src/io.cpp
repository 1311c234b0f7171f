#include "lgy/shell.hpp"

#include <json.hpp>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace lgy::shell {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

// ---------------------------------------------------------------------------
// Time series
// ---------------------------------------------------------------------------

const char* const kTimeseriesHeader =
    "t,om_x,om_y,om_z,M_norm,a_x,a_y,a_z,E,scriptE,G,V,l2v,h1v,E1,energy_residual";

std::string timeseries_row(const dynamics::DiagnosticsRow& r) {
    std::ostringstream o;
    o << fmt(r.t) << ',' << fmt(r.omega.x()) << ',' << fmt(r.omega.y()) << ',' << fmt(r.omega.z()) << ','
      << fmt(r.M_norm) << ',' << fmt(r.a.x()) << ',' << fmt(r.a.y()) << ',' << fmt(r.a.z()) << ','
      << fmt(r.E) << ',' << fmt(r.scriptE) << ',' << fmt(r.G) << ',' << fmt(r.V) << ',' << fmt(r.l2v)
      << ',' << fmt(r.h1v) << ',' << fmt(r.E1) << ',' << fmt(r.energy_residual);
    return o.str();
}

void write_timeseries(const std::vector<dynamics::DiagnosticsRow>& rows, const std::filesystem::path& file) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw IoError("cannot open " + file.string() + " for writing");
    out << kTimeseriesHeader << '\n';
    for (const auto& r : rows) out << timeseries_row(r) << '\n';
    if (!out) throw IoError("write failed on " + file.string());
}

const std::vector<double>& Timeseries::column(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i] == name) return data[i];
    throw FormatError("no column named '" + name + "'");
}

Timeseries read_timeseries(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open " + file.string());
    Timeseries ts;
    std::string line;
    if (!std::getline(in, line)) throw FormatError("empty CSV " + file.string());
    {
        std::string cur;
        for (char c : line) {
            if (c == ',') {
                ts.columns.push_back(cur);
                cur.clear();
            } else if (c != '\r') {
                cur += c;
            }
        }
        ts.columns.push_back(cur);
    }
    ts.data.assign(ts.columns.size(), {});
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::size_t col = 0, start = 0;
        for (std::size_t i = 0; i <= line.size(); ++i) {
            if (i == line.size() || line[i] == ',') {
                if (col >= ts.columns.size())
                    throw FormatError("row " + std::to_string(lineno) + " has too many fields");
                ts.data[col].push_back(std::strtod(line.c_str() + start, nullptr));
                ++col;
                start = i + 1;
            }
        }
        if (col != ts.columns.size())
            throw FormatError("row " + std::to_string(lineno) + " has too few fields");
    }
    return ts;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace {

void putU32(std::string& b, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void putU64(std::string& b, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void putF64(std::string& b, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    putU64(b, bits);
}

struct Reader {
    const unsigned char* p;
    std::size_t n, off = 0;

    void need(std::size_t k) const {
        if (off + k > n) throw FormatError("checkpoint truncated");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(p[off + static_cast<std::size_t>(i)]) << (8 * i);
        off += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(p[off + static_cast<std::size_t>(i)]) << (8 * i);
        off += 8;
        return v;
    }
    double f64() {
        const std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
};

} // namespace

void write_checkpoint(const std::filesystem::path& file, const dynamics::State& state,
                      const core::SystemSetup& setup) {
    const auto& g = state.v.grid();
    std::string b;
    b.reserve(64 + 8 * static_cast<std::size_t>(state.v.u.size() + state.v.v.size() + state.v.w.size()));
    b += "LGY1";
    putU32(b, 1);
    putU32(b, static_cast<std::uint32_t>(g.nx()));
    putU32(b, static_cast<std::uint32_t>(g.ny()));
    putU32(b, static_cast<std::uint32_t>(g.nz()));
    putF64(b, g.Lx());
    putF64(b, g.Ly());
    putF64(b, g.Lz());
    putF64(b, setup.nu);
    putF64(b, setup.inertia.A());
    putF64(b, setup.inertia.B());
    putF64(b, setup.inertia.C());
    for (int i = 0; i < 3; ++i) putF64(b, setup.omega0[i]);
    putF64(b, state.t);
    putU64(b, state.step);
    for (const auto* arr : {&state.v.u, &state.v.v, &state.v.w})
        for (std::int64_t i = 0; i < arr->size(); ++i) putF64(b, (*arr)[i]);
    for (int i = 0; i < 3; ++i) putF64(b, state.omega[i]);
    for (int i = 0; i < 3; ++i) putF64(b, state.omega_prev[i]);
    for (int i = 0; i < 3; ++i) putF64(b, state.M[i]);

    std::ofstream out(file, std::ios::binary);
    if (!out) throw IoError("cannot open " + file.string() + " for writing");
    out.write(b.data(), static_cast<std::streamsize>(b.size()));
    if (!out) throw IoError("write failed on " + file.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw IoError("cannot open " + file.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string bytes = ss.str();
    if (bytes.size() < 4 || bytes.compare(0, 4, "LGY1") != 0)
        throw FormatError("bad checkpoint magic in " + file.string());

    Reader r{reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(), 4};
    Checkpoint c;
    c.version = r.u32();
    if (c.version != 1) throw FormatError("unsupported checkpoint version " + std::to_string(c.version));
    c.nx = r.u32();
    c.ny = r.u32();
    c.nz = r.u32();
    c.Lx = r.f64();
    c.Ly = r.f64();
    c.Lz = r.f64();
    c.nu = r.f64();
    c.A = r.f64();
    c.B = r.f64();
    c.C = r.f64();
    for (int i = 0; i < 3; ++i) c.omega0[i] = r.f64();
    c.t = r.f64();
    c.step = r.u64();

    const std::size_t nu_sz = std::size_t(c.nx + 1) * c.ny * c.nz;
    const std::size_t nv_sz = std::size_t(c.nx) * (c.ny + 1) * c.nz;
    const std::size_t nw_sz = std::size_t(c.nx) * c.ny * (c.nz + 1);
    c.u.resize(nu_sz);
    c.v.resize(nv_sz);
    c.w.resize(nw_sz);
    for (auto* arr : {&c.u, &c.v, &c.w})
        for (double& x : *arr) x = r.f64();
    for (int i = 0; i < 3; ++i) c.omega[i] = r.f64();
    for (int i = 0; i < 3; ++i) c.omega_prev[i] = r.f64();
    for (int i = 0; i < 3; ++i) c.M[i] = r.f64();
    if (r.off != bytes.size()) throw FormatError("trailing bytes in checkpoint " + file.string());
    return c;
}

dynamics::State state_from_checkpoint(const Checkpoint& c, const core::SystemSetup& setup,
                                      dynamics::Mode mode) {
    const auto g = setup.cavity.grid();
    const bool match = static_cast<int>(c.nx) == g.nx() && static_cast<int>(c.ny) == g.ny() &&
                       static_cast<int>(c.nz) == g.nz() && c.Lx == g.Lx() && c.Ly == g.Ly() &&
                       c.Lz == g.Lz() && c.nu == setup.nu && c.A == setup.inertia.A() &&
                       c.B == setup.inertia.B() && c.C == setup.inertia.C() && c.omega0 == setup.omega0;
    if (!match) throw ValidationError("checkpoint fingerprint does not match the scenario setup");

    dynamics::State s(g);
    std::copy(c.u.begin(), c.u.end(), s.v.u.data());
    std::copy(c.v.begin(), c.v.end(), s.v.v.data());
    std::copy(c.w.begin(), c.w.end(), s.v.w.data());
    s.omega = c.omega;
    s.omega_prev = c.omega_prev;
    s.M = c.M;
    s.t = c.t;
    s.step = c.step;
    s.mode = mode;
    return s;
}

// ---------------------------------------------------------------------------
// Eigenreport JSON
// ---------------------------------------------------------------------------

std::string eigreport_json(const spectral::EigReport& report, const Scenario& scenario) {
    nlohmann::json j;
    j["verdict"] = report.verdict == spectral::SpectrumVerdict::AllPositive ? "AllPositive" : "SomeNegative";
    j["zero_multiplicity"] = report.zero_multiplicity;
    j["semisimple"] = report.semisimple;
    j["m_expected"] = report.m_expected;
    j["cluster_radius"] = report.cluster_radius;
    j["mu1"] = report.mu1;
    j["min_abs_re_nonzero"] = report.min_abs_re_nonzero;
    j["min_re_nonzero"] = report.min_re_nonzero;
    j["zero_cluster"] = report.zero_cluster;
    nlohmann::json evs = nlohmann::json::array();
    for (int i = 0; i < report.eigenvalues.size(); ++i)
        evs.push_back({{"re", report.eigenvalues[i].real()}, {"im", report.eigenvalues[i].imag()}});
    j["eigenvalues"] = evs;
    j["setup"] = {{"A", scenario.A},
                  {"B", scenario.B},
                  {"C", scenario.C},
                  {"nu", scenario.nu},
                  {"omega0", {scenario.omega_base.x(), scenario.omega_base.y(), scenario.omega_base.z()}},
                  {"grid", {scenario.nx, scenario.ny, scenario.nz}},
                  {"N", scenario.spectral_n}};
    return j.dump(2) + "\n";
}

void write_eigreport(const spectral::EigReport& report, const Scenario& scenario,
                     const std::filesystem::path& file) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw IoError("cannot open " + file.string() + " for writing");
    out << eigreport_json(report, scenario);
    if (!out) throw IoError("write failed on " + file.string());
}

} // namespace lgy::shell
