#include "lgy/core.hpp"

#include <cmath>

namespace lgy::core {

Cavity Cavity::validated(double Lx, double Ly, double Lz, int nx, int ny, int nz) {
    auto bad = [](const std::string& m) { return SetupError(SetupError::Code::BadCavity, m); };
    if (!(Lx > 0.0) || !(Ly > 0.0) || !(Lz > 0.0) || !std::isfinite(Lx + Ly + Lz))
        throw bad("cavity dimensions must be positive and finite");
    for (int n : {nx, ny, nz}) {
        if (n < 8) throw bad("grid counts must be >= 8");
        if (n % 2 != 0) throw bad("grid counts must be even");
    }
    const Cavity c{Lx, Ly, Lz, nx, ny, nz};
    const fields::Grid g = c.grid();
    const double hs[3] = {g.hx(), g.hy(), g.hz()};
    const double hmax = std::max({hs[0], hs[1], hs[2]});
    const double hmin = std::min({hs[0], hs[1], hs[2]});
    if (hmax / hmin > 4.0) throw bad("cell aspect ratio exceeds 4");
    return c;
}

Vec3 liquid_inertia(const Cavity& c) {
    const double m = c.Lx * c.Ly * c.Lz;  // density 1
    return {m * (c.Ly * c.Ly + c.Lz * c.Lz) / 12.0,
            m * (c.Lx * c.Lx + c.Lz * c.Lz) / 12.0,
            m * (c.Lx * c.Lx + c.Ly * c.Ly) / 12.0};
}

std::vector<InertiaModel::Group> InertiaModel::lambdaGroups() const {
    const double tol = degeneracyTol * C();
    std::vector<Group> groups;
    for (int ax = 0; ax < 3; ++ax) {
        const double lam = moments[ax];
        if (!groups.empty() && std::abs(lam - groups.back().lambda) <= tol) {
            groups.back().axes.push_back(ax);
        } else {
            groups.push_back({lam, {ax}});
        }
    }
    return groups;
}

int InertiaModel::groupOf(const Vec3& omega) const {
    const double n = omega.norm();
    if (!(n > 0.0)) return -1;
    const auto groups = lambdaGroups();
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        Vec3 proj = Vec3::Zero();
        for (int ax : groups[gi].axes) proj[ax] = omega[ax];
        if ((omega - proj).norm() <= std::max(degeneracyTol, 1e-12) * n) return static_cast<int>(gi);
    }
    return -1;
}

Eigenspace eigenspace_of(double lambda, const InertiaModel& inertia) {
    const double tol = inertia.degeneracyTol * inertia.C();
    for (const auto& grp : inertia.lambdaGroups()) {
        if (std::abs(lambda - grp.lambda) <= tol) {
            Eigenspace es;
            es.lambda = grp.lambda;
            es.m = static_cast<int>(grp.axes.size());
            es.basis = MatX::Zero(3, es.m);
            for (int c = 0; c < es.m; ++c) es.basis(grp.axes[static_cast<std::size_t>(c)], c) = 1.0;
            return es;
        }
    }
    throw SetupError(SetupError::Code::UnknownEigenvalue,
                     "lambda " + std::to_string(lambda) + " is not a moment of inertia");
}

SystemSetup build_system(const RawConfig& cfg, bool allow_zero_omega0) {
    const Cavity cavity = Cavity::validated(cfg.Lx, cfg.Ly, cfg.Lz, cfg.nx, cfg.ny, cfg.nz);

    if (!(cfg.A > 0.0) || !std::isfinite(cfg.A + cfg.B + cfg.C))
        throw SetupError(SetupError::Code::BadParameter, "moments must be positive and finite");
    if (cfg.A > cfg.B || cfg.B > cfg.C)
        throw SetupError(SetupError::Code::OrderViolation, "moments must satisfy A <= B <= C");
    if (!(cfg.nu > 0.0) || !std::isfinite(cfg.nu))
        throw SetupError(SetupError::Code::BadParameter, "viscosity must be positive");
    if (!(cfg.eps_deg > 0.0))
        throw SetupError(SetupError::Code::BadParameter, "eps_deg must be positive");

    InertiaModel inertia;
    inertia.moments = Vec3(cfg.A, cfg.B, cfg.C);
    inertia.liquidMoments = liquid_inertia(cavity);
    inertia.degeneracyTol = cfg.eps_deg;

    for (int ax = 0; ax < 3; ++ax)
        if (!(inertia.moments[ax] - inertia.liquidMoments[ax] > 0.0))
            throw SetupError(SetupError::Code::SolidInertiaNonpositive,
                             "solid inertia nonpositive on axis " + std::to_string(ax + 1));

    SystemSetup s{cavity, inertia, cfg.nu, cfg.omega0, 0.0, 3};
    if (cfg.omega0.norm() > 0.0) {
        const int gi = inertia.groupOf(cfg.omega0);
        if (gi < 0)
            throw SetupError(SetupError::Code::NotPermanentAxis, "omega0 is not a permanent rotation axis");
        const auto groups = inertia.lambdaGroups();
        s.lambda0 = groups[static_cast<std::size_t>(gi)].lambda;
        s.m0 = static_cast<int>(groups[static_cast<std::size_t>(gi)].axes.size());
    } else if (!allow_zero_omega0) {
        throw SetupError(SetupError::Code::NotPermanentAxis, "omega0 must be nonzero for simulation runs");
    }
    return s;
}

} // namespace lgy::core
