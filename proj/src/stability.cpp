#include "lgy/stability.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <vector>

namespace lgy::stability {

const char* to_string(CaseId c) {
    switch (c) {
        case CaseId::i: return "i";
        case CaseId::ii: return "ii";
        case CaseId::iii: return "iii";
        case CaseId::iv: return "iv";
        case CaseId::v: return "v";
        case CaseId::vi: return "vi";
    }
    return "?";
}

const char* to_string(Verdict v) { return v == Verdict::Stable ? "Stable" : "Unstable"; }

const char* to_string(Attainability a) {
    switch (a) {
        case Attainability::GuaranteedMaxAxis: return "GuaranteedMaxAxis";
        case Attainability::GuaranteedDegenerateSubspace: return "GuaranteedDegenerateSubspace";
        case Attainability::NoGuarantee: return "NoGuarantee";
    }
    return "?";
}

namespace {

// Support of e among the coordinate axes under an absolute tolerance on the
// unit vector's components.
struct AxisSupport {
    bool on1, on2, on3;
};

AxisSupport supportOf(const Vec3& e, double tol) {
    return {std::abs(e.x()) > tol, std::abs(e.y()) > tol, std::abs(e.z()) > tol};
}

} // namespace

StabilityVerdict classify(double A, double B, double C, const Vec3& e, double eps_deg) {
    if (!(A > 0.0) || A > B || B > C) throw std::invalid_argument("classify: need 0 < A <= B <= C");
    const double en = e.norm();
    if (!(std::abs(en - 1.0) <= 1e-6)) throw std::invalid_argument("classify: axis must be a unit vector");

    const double tol = eps_deg * C;
    const bool AB = std::abs(A - B) <= tol;
    const bool BC = std::abs(B - C) <= tol;
    const double axis_tol = std::max(eps_deg, 1e-12);
    const AxisSupport s = supportOf(e, axis_tol);

    if (AB && BC) return {CaseId::i, Verdict::Stable, A, 3};

    if (AB) {  // A = B < C
        if (!s.on1 && !s.on2 && s.on3) return {CaseId::ii, Verdict::Stable, C, 1};
        if (!s.on3 && (s.on1 || s.on2)) return {CaseId::vi, Verdict::Unstable, A, 2};
        throw NotAPermanentAxis("axis is not an eigenvector of diag(A,A,C)");
    }
    if (BC) {  // A < B = C
        if (s.on1 && !s.on2 && !s.on3) return {CaseId::iv, Verdict::Unstable, A, 1};
        if (!s.on1 && (s.on2 || s.on3)) return {CaseId::iii, Verdict::Stable, B, 2};
        throw NotAPermanentAxis("axis is not an eigenvector of diag(A,B,B)");
    }
    // Distinct moments: e must be a coordinate axis.
    if (s.on3 && !s.on1 && !s.on2) return {CaseId::ii, Verdict::Stable, C, 1};
    if (s.on2 && !s.on1 && !s.on3) return {CaseId::v, Verdict::Unstable, B, 1};
    if (s.on1 && !s.on2 && !s.on3) return {CaseId::iv, Verdict::Unstable, A, 1};
    throw NotAPermanentAxis("axis is not an eigenvector of diag(A,B,C)");
}

double lyapunov_G_closed_form(double A, double B, double C, CaseId case_id, const Vec3& w) {
    switch (case_id) {
        case CaseId::i:
            return 0.0;
        case CaseId::ii:
            return A * (C - A) / C * w.x() * w.x() + B * (C - B) / C * w.y() * w.y();
        case CaseId::iii:
            return A / B * (B - A) * w.x() * w.x();
        case CaseId::iv:
            return B / A * (A - B) * w.y() * w.y() + C / A * (A - C) * w.z() * w.z();
        case CaseId::v:
            return A / B * (B - A) * w.x() * w.x() + C / B * (B - C) * w.z() * w.z();
        case CaseId::vi:
            return C / A * (A - C) * w.z() * w.z();
    }
    return 0.0;
}

MatX steady_coupling_nullspace(const core::InertiaModel& inertia, const Vec3& omega0) {
    if (!(omega0.norm() > 0.0)) throw std::invalid_argument("steady_coupling_nullspace: omega0 must be nonzero");
    // omega -> omega0 x I.omega - (I.omega0) x omega
    const Mat3 K = crossMatrix(omega0) * inertia.matrix() - crossMatrix(inertia.apply(omega0));
    Eigen::JacobiSVD<Mat3> svd(K, Eigen::ComputeFullV);
    const Vec3 sv = svd.singularValues();
    const double smax = sv[0];
    const double tol = std::max(1e-12, 1e-10 * std::max(smax, 1.0));
    int rank = 0;
    for (int i = 0; i < 3; ++i)
        if (sv[i] > tol) ++rank;
    const int m = 3 - rank;
    MatX basis(3, m);
    for (int c = 0; c < m; ++c) basis.col(c) = svd.matrixV().col(rank + c);
    return basis;
}

Attainability attainability(double E0, const Vec3& omega0, double A, double B, double C, double eps_deg) {
    if (!(A > 0.0) || A > B || B > C) throw std::invalid_argument("attainability: need 0 < A <= B <= C");
    if (!(E0 >= 0.0)) throw std::invalid_argument("attainability: E0 must be nonnegative");

    const double tol = eps_deg * C;
    const bool AB = std::abs(A - B) <= tol;
    const bool BC = std::abs(B - C) <= tol;
    const double w1 = omega0.x(), w2 = omega0.y(), w3 = omega0.z();

    if (AB && BC) return Attainability::GuaranteedDegenerateSubspace;  // S(lambda) = R^3

    if (AB) {  // A = B < C
        const double rhs = (C - A) * C / (2.0 * A) * w3 * w3;
        return (rhs > 0.0 && E0 <= rhs) ? Attainability::GuaranteedMaxAxis : Attainability::NoGuarantee;
    }
    if (BC) {  // A < B = C
        const double rhs = B * (B - A) / (2.0 * A) * (w2 * w2 + w3 * w3);
        return (rhs > 0.0 && E0 <= rhs) ? Attainability::GuaranteedDegenerateSubspace
                                        : Attainability::NoGuarantee;
    }
    // A < B < C: two-inequality system.
    const double lhs1 = E0 + A / (2.0 * B) * (B - A) * w1 * w1;
    const double rhs1 = C / (2.0 * B) * (C - B) * w3 * w3;
    const double rhs2 = B / (2.0 * A) * (B - A) * w2 * w2 + C / (2.0 * A) * (C - A) * w3 * w3;
    const bool ok = (rhs1 > 0.0) && (lhs1 <= rhs1) && (E0 <= rhs2);
    return ok ? Attainability::GuaranteedMaxAxis : Attainability::NoGuarantee;
}

DecayFit fit_decay(std::span<const double> t, std::span<const double> y, FitPolicy policy,
                   std::string quantity) {
    if (t.size() != y.size()) throw std::invalid_argument("fit_decay: size mismatch");
    double ymax = 0.0;
    for (double v : y) ymax = std::max(ymax, v);
    if (!(ymax > 0.0)) throw WindowEmpty("fit_decay: series has no positive samples");

    std::vector<double> ts, ls;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (!(y[i] > 0.0)) continue;
        if (t[i] < policy.t_min || t[i] > policy.t_max) continue;
        if (y[i] < policy.lo_frac * ymax || y[i] > policy.hi_frac * ymax) continue;
        ts.push_back(t[i]);
        ls.push_back(std::log(y[i]));
    }
    if (static_cast<int>(ts.size()) < std::max(2, policy.min_samples))
        throw WindowEmpty("fit_decay: " + std::to_string(ts.size()) + " samples in the amplitude window");

    const double n = static_cast<double>(ts.size());
    double st = 0, sl = 0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        st += ts[i];
        sl += ls[i];
    }
    const double tbar = st / n, lbar = sl / n;
    double stt = 0, stl = 0, sll = 0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const double dt = ts[i] - tbar, dl = ls[i] - lbar;
        stt += dt * dt;
        stl += dt * dl;
        sll += dl * dl;
    }
    if (!(stt > 0.0)) throw WindowEmpty("fit_decay: degenerate time window");
    const double slope = stl / stt;
    double r2 = 1.0;
    if (sll > 0.0) {
        const double ss_res = sll - slope * stl;
        r2 = std::clamp(1.0 - ss_res / sll, 0.0, 1.0);
    }

    DecayFit fit;
    fit.rate = std::abs(slope);
    fit.r_squared = r2;
    fit.t_begin = *std::min_element(ts.begin(), ts.end());
    fit.t_end = *std::max_element(ts.begin(), ts.end());
    fit.quantity = std::move(quantity);
    return fit;
}

} // namespace lgy::stability
