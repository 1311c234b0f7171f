#include "lgy/spectral.hpp"

#include <fftw3.h>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>
#include <cstdio>
#include <optional>
#include <random>

namespace lgy::spectral {

using fields::CellScalar;
using fields::FaceField;
using fields::Grid;

// ---------------------------------------------------------------------------
// Exact inverse of the component Laplacian K_nu = -nu lap with velocity BCs
// (wall-face Dirichlet along the normal axis, ghost reflection tangentially),
// diagonalized by sine transforms.
// ---------------------------------------------------------------------------

namespace {

std::mutex& plannerMutex() {
    static std::mutex m;
    return m;
}

struct AxisPlan {
    fftw_plan fwd = nullptr, inv = nullptr;
    VecX lambda;                  // positive eigenvalues of -d2, indexed by slot
    int offset = 0;               // first transformed index along the axis
    std::int64_t offset_elems = 0;  // element offset of the planned base pointer

    void execFwd(double* arr) const { fftw_execute_r2r(fwd, arr + offset_elems, arr + offset_elems); }
    void execInv(double* arr) const { fftw_execute_r2r(inv, arr + offset_elems, arr + offset_elems); }

    ~AxisPlan() {
        std::lock_guard<std::mutex> lock(plannerMutex());
        if (fwd) fftw_destroy_plan(fwd);
        if (inv) fftw_destroy_plan(inv);
    }
};

// Builds the batched transform along `axis` of an array with dims d[3]
// (x-fastest). normal==true: DST-I on the interior slots (on-node Dirichlet);
// else DST-II/III (half-cell Dirichlet via reflection).
void buildAxisPlan(AxisPlan& ap, const std::array<int, 3>& d, int axis, bool normal, double h, double* buf) {
    const std::array<std::int64_t, 3> stride = {1, d[0], std::int64_t(d[0]) * d[1]};
    const int n_full = d[static_cast<std::size_t>(axis)];

    int n_tr;
    fftw_r2r_kind kf, ki;
    if (normal) {
        n_tr = n_full - 2;  // interior of the face-count axis (n_full = n+1)
        kf = ki = FFTW_RODFT00;
        ap.offset = 1;
    } else {
        n_tr = n_full;
        kf = FFTW_RODFT10;
        ki = FFTW_RODFT01;
        ap.offset = 0;
    }

    fftw_iodim64 dim{n_tr, stride[static_cast<std::size_t>(axis)], stride[static_cast<std::size_t>(axis)]};
    std::array<fftw_iodim64, 2> hm{};
    int hi = 0;
    for (int a = 0; a < 3; ++a)
        if (a != axis) {
            hm[static_cast<std::size_t>(hi)] = {d[static_cast<std::size_t>(a)], stride[static_cast<std::size_t>(a)], stride[static_cast<std::size_t>(a)]};
            ++hi;
        }

    ap.offset_elems = ap.offset * stride[static_cast<std::size_t>(axis)];
    double* base = buf + ap.offset_elems;
    {
        std::lock_guard<std::mutex> lock(plannerMutex());
        ap.fwd = fftw_plan_guru64_r2r(1, &dim, 2, hm.data(), base, base, &kf, FFTW_ESTIMATE);
        ap.inv = fftw_plan_guru64_r2r(1, &dim, 2, hm.data(), base, base, &ki, FFTW_ESTIMATE);
    }
    if (!ap.fwd || !ap.inv) throw fields::SolverFailure("fftw plan creation failed");

    // Both families share lambda_m = 4/h^2 sin^2(pi m / 2n) with n the cell
    // count; DST-I runs m=1..n-1, DST-II m=1..n.
    const int n_cells = normal ? n_full - 1 : n_full;
    ap.lambda.setZero(n_full);
    for (int s = 0; s < n_tr; ++s) {
        const int m = s + 1;
        const double sn = std::sin(0.5 * M_PI * m / n_cells);
        ap.lambda[ap.offset + s] = 4.0 / (h * h) * sn * sn;
    }
}

struct ComponentSolver {
    std::array<int, 3> dims{};
    AxisPlan ax, ay, az;
    double scale = 1.0;

    void build(const std::array<int, 3>& d, int normal_axis, const Grid& g, double* buf) {
        dims = d;
        buildAxisPlan(ax, d, 0, normal_axis == 0, g.hx(), buf);
        buildAxisPlan(ay, d, 1, normal_axis == 1, g.hy(), buf);
        buildAxisPlan(az, d, 2, normal_axis == 2, g.hz(), buf);
        const int ncx = normal_axis == 0 ? d[0] - 1 : d[0];
        const int ncy = normal_axis == 1 ? d[1] - 1 : d[1];
        const int ncz = normal_axis == 2 ? d[2] - 1 : d[2];
        scale = 1.0 / (8.0 * ncx * ncy * ncz);
    }

    // arr <- K_nu^{-1} arr; wall-face entries must be zero and remain zero.
    void solve(double* arr, double nu) const {
        ax.execFwd(arr);
        ay.execFwd(arr);
        az.execFwd(arr);
        const std::int64_t sx = 1, sy = dims[0], sz = std::int64_t(dims[0]) * dims[1];
        for (int k = 0; k < dims[2]; ++k)
            for (int j = 0; j < dims[1]; ++j) {
                double* row = arr + sy * j + sz * k;
                const double lyz = ay.lambda[j] + az.lambda[k];
                for (int i = 0; i < dims[0]; ++i) {
                    const double den = nu * (ax.lambda[i] + lyz);
                    row[i * sx] = den > 0.0 ? row[i * sx] / den * scale : 0.0;
                }
            }
        ax.execInv(arr);
        ay.execInv(arr);
        az.execInv(arr);
    }
};

// Exact discrete Stokes solve A0^{-1} f via the pressure Schur complement
// (CG; S is spectrally equivalent to the pressure mass matrix).
class StokesSolver {
public:
    StokesSolver(const Grid& g, double nu, const StokesOptions& opts)
        : grid_(g), nu_(nu), opts_(opts), projector_(g), probe_(FaceField(g)) {
        cu_.build({g.nx() + 1, g.ny(), g.nz()}, 0, g, probe_.u.data());
        cv_.build({g.nx(), g.ny() + 1, g.nz()}, 1, g, probe_.v.data());
        cw_.build({g.nx(), g.ny(), g.nz() + 1}, 2, g, probe_.w.data());
    }

    void kinv(FaceField& F) const {
        cu_.solve(F.u.data(), nu_);
        cv_.solve(F.v.data(), nu_);
        cw_.solve(F.w.data(), nu_);
    }

    // S q = -div K^{-1} grad q (SPD on mean-zero cell scalars).
    void applySchur(const CellScalar& q, CellScalar& out, FaceField& scratch) const {
        fields::gradientInto(q, scratch);
        kinv(scratch);
        fields::divergenceInto(scratch, out);
        out.data() = -out.data();
    }

    FaceField solve(const FaceField& f) {
        FaceField w = f;
        kinv(w);

        CellScalar g(grid_), r(grid_), p(grid_), Sp(grid_), q(grid_);
        fields::divergenceInto(w, g);
        g.data() = -g.data();
        g.removeMean();

        const auto dot = [&](const CellScalar& a, const CellScalar& b) {
            return pairwiseDot(a.data().data(), b.data().data(), static_cast<std::size_t>(a.data().size()));
        };

        FaceField scratch(grid_);
        r.data() = g.data();
        p.data() = r.data();
        double rr = dot(r, r);
        const double rr0 = rr;
        if (rr0 > 0.0) {
            for (int it = 0; it < opts_.cg_max_iter; ++it) {
                if (rr <= opts_.cg_tol * opts_.cg_tol * rr0) break;
                applySchur(p, Sp, scratch);
                const double pSp = dot(p, Sp);
                if (!(pSp > 0.0)) throw NoConvergence("Stokes Schur CG breakdown");
                const double alpha = rr / pSp;
                q.data() += alpha * p.data();
                r.data() -= alpha * Sp.data();
                const double rr_new = dot(r, r);
                p.data() = r.data() + (rr_new / rr) * p.data();
                rr = rr_new;
            }
            if (rr > opts_.cg_tol * opts_.cg_tol * rr0)
                throw NoConvergence("Stokes Schur CG did not reach tolerance");
        }

        fields::gradientInto(q, scratch);
        kinv(scratch);
        w -= scratch;
        projector_.applyInPlace(w, phiScratch());
        return w;
    }

    // A0 phi = P(-nu lap phi).
    FaceField applyA0(const FaceField& x) {
        FaceField y(grid_);
        fields::laplacianInto(x, y);
        y *= -nu_;
        projector_.applyInPlace(y, phiScratch());
        return y;
    }

private:
    CellScalar& phiScratch() {
        if (!phi_) phi_.emplace(grid_);
        return *phi_;
    }

    Grid grid_;
    double nu_;
    StokesOptions opts_;
    fields::Projector projector_;
    FaceField probe_;
    ComponentSolver cu_, cv_, cw_;
    std::optional<CellScalar> phi_;
};

} // namespace

// ---------------------------------------------------------------------------
// Stokes modes: block-Krylov on A0^{-1} with Rayleigh-Ritz on A0
// ---------------------------------------------------------------------------

ReducedBasis stokes_modes(const core::Cavity& cavity, double nu, int N, StokesOptions opts) {
    if (N < 1) throw std::invalid_argument("stokes_modes: N must be >= 1");
    const Grid g = cavity.grid();
    StokesSolver solver(g, nu, opts);

    const int block = std::max(2, opts.block);
    const int max_basis = opts.max_basis > 0 ? opts.max_basis : 5 * N + 128;

    std::vector<FaceField> Q;   // orthonormal basis
    std::vector<FaceField> AQ;  // A0 applied to each basis vector
    MatX H(max_basis, max_basis);   // Q^T A0 Q
    MatX G2(max_basis, max_basis);  // (A0 Q)^T (A0 Q)
    H.setZero();
    G2.setZero();

    // Seed vectors must overlap every reflection-parity sector of the box, so
    // draw raw random faces (not the smooth sin^2 generator) and project.
    std::mt19937_64 seed_rng(opts.seed);
    fields::Projector seed_projector(g);
    fields::CellScalar seed_phi(g);
    auto freshField = [&]() {
        fields::FaceField F(g);
        for (auto* arr : {&F.u, &F.v, &F.w})
            for (std::int64_t i = 0; i < arr->size(); ++i) (*arr)[i] = uniformSym(seed_rng());
        F.zeroNormalBoundary();
        seed_projector.applyInPlace(F, seed_phi);
        return F;
    };

    // Two-pass modified Gram-Schmidt; returns false when the candidate is
    // numerically dependent.
    auto appendOrth = [&](FaceField cand) -> bool {
        const double pre = fields::l2_norm(cand);
        if (!(pre > 0.0)) return false;
        for (int pass = 0; pass < 2; ++pass) {
            for (const auto& qv : Q) {
                const double c = fields::inner(cand, qv);
                cand.u -= c * qv.u;
                cand.v -= c * qv.v;
                cand.w -= c * qv.w;
            }
        }
        const double post = fields::l2_norm(cand);
        if (post < 1e-8 * pre) return false;
        cand *= 1.0 / post;

        FaceField Ax = solver.applyA0(cand);
        const int idx = static_cast<int>(Q.size());
        for (int j = 0; j < idx; ++j) {
            H(j, idx) = fields::inner(AQ[static_cast<std::size_t>(j)], cand);
            H(idx, j) = fields::inner(Ax, Q[static_cast<std::size_t>(j)]);
            const double g2 = fields::inner(Ax, AQ[static_cast<std::size_t>(j)]);
            G2(j, idx) = g2;
            G2(idx, j) = g2;
        }
        H(idx, idx) = fields::inner(Ax, cand);
        G2(idx, idx) = fields::inner(Ax, Ax);
        Q.push_back(std::move(cand));
        AQ.push_back(std::move(Ax));
        return true;
    };

    for (int i = 0; i < block && static_cast<int>(Q.size()) < max_basis; ++i) appendOrth(freshField());

    VecX ritz_mu;
    MatX ritz_U;
    std::vector<double> ritz_res;

    auto rayleighRitz = [&]() -> bool {
        const int K = static_cast<int>(Q.size());
        MatX Hs = 0.5 * (H.topLeftCorner(K, K) + H.topLeftCorner(K, K).transpose());
        Eigen::SelfAdjointEigenSolver<MatX> es(Hs);
        ritz_mu = es.eigenvalues();
        ritz_U = es.eigenvectors();
        ritz_res.assign(static_cast<std::size_t>(std::min(N, K)), 0.0);
        bool all_ok = K >= N;
        for (int r = 0; r < std::min(N, K); ++r) {
            const VecX u = ritz_U.col(r);
            const double mu = ritz_mu[r];
            const double res2 = u.dot(G2.topLeftCorner(K, K) * u) - 2.0 * mu * u.dot(Hs * u) + mu * mu;
            const double res = std::sqrt(std::max(0.0, res2));
            ritz_res[static_cast<std::size_t>(r)] = res;
            if (!(mu > 0.0) || res > opts.tol * mu) all_ok = false;
        }
#ifdef LGY_SPECTRAL_DEBUG
        std::fprintf(stderr, "[rr] K=%d mu0=%.6g res0=%.3g muN=%.6g resN=%.3g\n", K,
                     ritz_mu.size() ? ritz_mu[0] : -1.0, ritz_res.empty() ? -1.0 : ritz_res[0],
                     K >= N ? ritz_mu[N - 1] : -1.0,
                     ritz_res.size() >= static_cast<std::size_t>(N) ? ritz_res[static_cast<std::size_t>(N - 1)] : -1.0);
#endif
        return all_ok;
    };

    int frontier = 0;  // next basis vector whose Krylov image has not been taken
    auto expandBlock = [&]() -> bool {
        const int K = static_cast<int>(Q.size());
        int added = 0;
        for (int j = frontier; j < K && static_cast<int>(Q.size()) < max_basis && added < block; ++j) {
            if (appendOrth(solver.solve(Q[static_cast<std::size_t>(j)]))) ++added;
        }
        frontier = K;
        if (added == 0) return appendOrth(freshField());
        return true;
    };

    bool converged = rayleighRitz();
    while (!converged && static_cast<int>(Q.size()) < max_basis) {
        if (!expandBlock()) break;
        converged = rayleighRitz();
    }
    if (!converged)
        throw NoConvergence("stokes_modes: basis limit reached before residual tolerance");

    // Assemble Ritz fields and verify the residual contract on the operator
    // itself (the matrix estimate above cancels near its floor).
    ReducedBasis basis{g, nu, {}, VecX(N), VecX(N), MatX(3, N)};
    for (bool verified = false; !verified;) {
        basis.modes.clear();
        basis.modes.reserve(static_cast<std::size_t>(N));
        const int K = static_cast<int>(Q.size());
        verified = true;
        for (int r = 0; r < N; ++r) {
            FaceField mode(g);
            for (int j = 0; j < K; ++j) {
                const double c = ritz_U(j, r);
                mode.u += c * Q[static_cast<std::size_t>(j)].u;
                mode.v += c * Q[static_cast<std::size_t>(j)].v;
                mode.w += c * Q[static_cast<std::size_t>(j)].w;
            }
            FaceField resid = solver.applyA0(mode);
            resid.u -= ritz_mu[r] * mode.u;
            resid.v -= ritz_mu[r] * mode.v;
            resid.w -= ritz_mu[r] * mode.w;
            const double res = fields::l2_norm(resid);
            basis.mu[r] = ritz_mu[r];
            basis.residuals[r] = res;
            basis.angularMoments.col(r) = fields::angular_moment(mode);
            basis.modes.push_back(std::move(mode));
            if (res > opts.tol * ritz_mu[r]) {
                verified = false;
                break;
            }
        }
        if (!verified) {
            if (static_cast<int>(Q.size()) >= max_basis || !expandBlock())
                throw NoConvergence("stokes_modes: residual verification failed at the basis limit");
            rayleighRitz();
        }
    }
    return basis;
}

// ---------------------------------------------------------------------------
// Pencil assembly
// ---------------------------------------------------------------------------

Pencil assemble_pencil(const ReducedBasis& basis, const core::InertiaModel& inertia, const Vec3& omega0) {
    const int N = basis.N();
    const int n = N + 3;
    Pencil p;
    p.n = n;
    p.mu1 = basis.mu.size() ? basis.mu[0] : 0.0;
    p.omega0 = omega0;
    p.Mform.setZero(n, n);
    p.Aform.setZero(n, n);
    p.Bform.setZero(n, n);

    // Mass form <I u, v>.
    for (int j = 0; j < N; ++j)
        for (int k = 0; k <= j; ++k) {
            const double mjk = fields::inner(basis.modes[static_cast<std::size_t>(j)], basis.modes[static_cast<std::size_t>(k)]);
            p.Mform(j, k) = mjk;
            p.Mform(k, j) = mjk;
        }
    for (int j = 0; j < N; ++j) {
        const Vec3 c = basis.angularMoments.col(j);
        for (int i = 0; i < 3; ++i) {
            p.Mform(N + i, j) = c[i];
            p.Mform(j, N + i) = c[i];
        }
    }
    p.Mform.block<3, 3>(N, N) = inertia.matrix();

    // a-form: nu grad:grad on the fluid block (assembled through the same
    // discrete Laplacian as the stepper), identity on the rigid block.
    {
        FaceField lap(basis.grid);
        for (int j = 0; j < N; ++j) {
            fields::laplacianInto(basis.modes[static_cast<std::size_t>(j)], lap);
            for (int k = 0; k < N; ++k)
                p.Aform(k, j) = -basis.nu * fields::inner(lap, basis.modes[static_cast<std::size_t>(k)]);
        }
        p.Aform.topLeftCorner(N, N) = 0.5 * (p.Aform.topLeftCorner(N, N) + p.Aform.topLeftCorner(N, N).transpose()).eval();
        p.Aform.block<3, 3>(N, N).setIdentity();
    }

    // b-form.
    {
        FaceField cor(basis.grid);
        for (int j = 0; j < N; ++j) {
            fields::coriolisInto(basis.modes[static_cast<std::size_t>(j)], omega0, cor);
            for (int k = 0; k < N; ++k)
                p.Bform(k, j) = 2.0 * fields::inner(cor, basis.modes[static_cast<std::size_t>(k)]);
            const Vec3 t = omega0.cross(Vec3(basis.angularMoments.col(j)));
            for (int i = 0; i < 3; ++i) p.Bform(N + i, j) = t[i];
        }
        const Vec3 Iw0 = inertia.apply(omega0);
        for (int c = 0; c < 3; ++c) {
            Vec3 ec = Vec3::Zero();
            ec[c] = 1.0;
            const Vec3 body = omega0.cross(inertia.apply(ec)) + ec.cross(Iw0) - ec;
            for (int r = 0; r < 3; ++r) p.Bform(N + r, N + c) = body[r];
        }
    }
    return p;
}

// ---------------------------------------------------------------------------
// Dense eigensolve of the pencil
// ---------------------------------------------------------------------------

EigReport eigenspectrum(const Pencil& pencil, int m_expected) {
    const int n = pencil.n;
    Eigen::LLT<MatX> llt(pencil.Mform);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("eigenspectrum: mass form is not positive definite");
    const MatX L = llt.matrixL();

    MatX T = pencil.Aform + pencil.Bform;
    T = L.triangularView<Eigen::Lower>().solve(T);
    T = L.triangularView<Eigen::Lower>().solve(T.transpose()).transpose();

    Eigen::EigenSolver<MatX> es(T, true);
    if (es.info() != Eigen::Success) throw std::runtime_error("eigenspectrum: dense eigensolve failed");

    Eigen::VectorXcd lam = es.eigenvalues();
    Eigen::MatrixXcd Z = es.eigenvectors();
    // Back to pencil coordinates: x = L^{-T} z.
    Eigen::MatrixXcd Vx(n, n);
    {
        MatX re = Z.real(), im = Z.imag();
        re = L.transpose().triangularView<Eigen::Upper>().solve(re);
        im = L.transpose().triangularView<Eigen::Upper>().solve(im);
        Vx.real() = re;
        Vx.imag() = im;
    }

    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (lam[a].real() != lam[b].real()) return lam[a].real() < lam[b].real();
        return lam[a].imag() < lam[b].imag();
    });

    EigReport rep;
    rep.m_expected = m_expected;
    rep.mu1 = pencil.mu1;
    rep.cluster_radius = 1e-6 * pencil.mu1;
    rep.eigenvalues.resize(n);
    for (int i = 0; i < n; ++i) rep.eigenvalues[i] = lam[order[static_cast<std::size_t>(i)]];

    for (int i = 0; i < n; ++i) {
        const double a = std::abs(rep.eigenvalues[i]);
        if (a <= rep.cluster_radius)
            rep.zero_cluster.push_back(i);
        else if (a <= 10.0 * rep.cluster_radius)
            throw ClusterAmbiguous("eigenvalue with |lambda| = " + std::to_string(a) +
                                   " straddles the cluster radius " + std::to_string(rep.cluster_radius));
    }
    rep.zero_multiplicity = static_cast<int>(rep.zero_cluster.size());

    rep.min_abs_re_nonzero = std::numeric_limits<double>::infinity();
    rep.min_re_nonzero = std::numeric_limits<double>::infinity();
    bool any_nonzero = false;
    for (int i = 0; i < n; ++i) {
        if (std::abs(rep.eigenvalues[i]) <= rep.cluster_radius) continue;
        any_nonzero = true;
        rep.min_abs_re_nonzero = std::min(rep.min_abs_re_nonzero, std::abs(rep.eigenvalues[i].real()));
        rep.min_re_nonzero = std::min(rep.min_re_nonzero, rep.eigenvalues[i].real());
    }
    rep.verdict = (!any_nonzero || rep.min_re_nonzero > 0.0) ? SpectrumVerdict::AllPositive
                                                             : SpectrumVerdict::SomeNegative;

    // Oblique projector onto the zero cluster from the full eigenbasis.
    Eigen::MatrixXcd S = Eigen::MatrixXcd::Zero(n, n);
    for (int i : rep.zero_cluster) {
        // map back from sorted index to solver index
        const int src = order[static_cast<std::size_t>(i)];
        S(src, src) = 1.0;
    }
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(Vx);
    const Eigen::MatrixXcd Vinv = lu.solve(Eigen::MatrixXcd::Identity(n, n));
    rep.Q = (Vx * S * Vinv).real();

    const int m = rep.zero_multiplicity;
    rep.right0.resize(n, m);
    rep.left0.resize(m, n);
    for (int c = 0; c < m; ++c) {
        const int src = order[static_cast<std::size_t>(rep.zero_cluster[static_cast<std::size_t>(c)])];
        rep.right0.col(c) = Vx.col(src).real();
        rep.left0.row(c) = Vinv.row(src).real();
    }

    if (m > 0) {
        Eigen::JacobiSVD<MatX> svd(rep.right0);
        const auto& sv = svd.singularValues();
        int rank = 0;
        for (int i = 0; i < sv.size(); ++i)
            if (sv[i] > 1e-8 * sv[0]) ++rank;
        rep.semisimple = (rank == m);
    } else {
        rep.semisimple = false;
    }
    return rep;
}

std::pair<VecX, VecX> spectral_projection(const VecX& u, const EigReport& report) {
    if (report.Q.rows() != u.size()) throw std::invalid_argument("spectral_projection: size mismatch");
    VecX u0 = report.Q * u;
    VecX u1 = u - u0;
    return {u0, u1};
}

} // namespace lgy::spectral
