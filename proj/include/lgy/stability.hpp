#pragma once

#include "lgy/core.hpp"
#include "lgy/types.hpp"

#include <span>
#include <stdexcept>
#include <string>

namespace lgy::stability {

struct NotAPermanentAxis : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct WindowEmpty : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class CaseId { i, ii, iii, iv, v, vi };
enum class Verdict { Stable, Unstable };

const char* to_string(CaseId c);
const char* to_string(Verdict v);

struct StabilityVerdict {
    CaseId case_id;
    Verdict verdict;
    double lambda;  // moment of inertia of the spin eigenspace
    int m;          // dim S(lambda)
};

/// Permanent-axis classification by degeneracy pattern and axis membership.
/// Detection order: triple degeneracy, pair degeneracy, distinct. Throws
/// NotAPermanentAxis when e is not an eigenvector of diag(A,B,C).
StabilityVerdict classify(double A, double B, double C, const Vec3& e, double eps_deg = 1e-9);

/// Closed-form G for the classified case (case formulas of the linear energy
/// identity); omega_star in body components.
double lyapunov_G_closed_form(double A, double B, double C, CaseId case_id, const Vec3& omega_star);

/// Null space of omega -> omega0 x I.omega + omega x I.omega0 by SVD; equals
/// S(lambda(omega0)) as a subspace. Columns orthonormal.
MatX steady_coupling_nullspace(const core::InertiaModel& inertia, const Vec3& omega0);

enum class Attainability { GuaranteedMaxAxis, GuaranteedDegenerateSubspace, NoGuarantee };
const char* to_string(Attainability a);

/// Initial-data inequalities guaranteeing the terminal eigenspace. omega0
/// here is the full initial angular velocity of the data.
Attainability attainability(double E0, const Vec3& omega0, double A, double B, double C,
                            double eps_deg = 1e-9);

struct DecayFit {
    double rate = 0.0;       // |slope| of the log-linear fit, 1/time
    double r_squared = 0.0;  // in [0,1]
    double t_begin = 0.0, t_end = 0.0;
    std::string quantity;
};

struct FitPolicy {
    // Amplitude window relative to max(y); the post-transient regime is found
    // by amplitude, not time.
    double lo_frac = 1e-8;
    double hi_frac = 1e-3;
    // Optional absolute time bounds applied on top of the amplitude window.
    double t_min = -std::numeric_limits<double>::infinity();
    double t_max = std::numeric_limits<double>::infinity();
    int min_samples = 3;
};

/// Least-squares line through log y over the policy window. Throws
/// WindowEmpty when fewer than min_samples land in the window.
DecayFit fit_decay(std::span<const double> t, std::span<const double> y, FitPolicy policy = {},
                   std::string quantity = "");

} // namespace lgy::stability
