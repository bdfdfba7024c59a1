#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "enscond/qfun.hpp"
#include "enscond/spectrum.hpp"

namespace enscond {

// Diffusion matrix (symmetric 2x2) and drift of the effective generator on
// the cone interior, assembled from the conditional mode energies.
struct DiffusionCoeffs {
    double a_uu = 0.0, a_uv = 0.0, a_vv = 0.0;
    double b_u = 0.0, b_v = 0.0;
};

DiffusionCoeffs coeffs_from_q(const Spectrum& s, const QVector& q);
DiffusionCoeffs coeffs(const Spectrum& s, ConePoint w);

// Trace and determinant of the diffusion matrix; both positive in the
// interior. Throws NotPositiveDefiniteError otherwise (that signals a bug in
// the q evaluation, not a property of the input).
std::pair<double, double> ellipticity(const Spectrum& s, ConePoint w);

// Explicit positive lower bound on det(a) in terms of the pair energies.
double ellipticity_lower_bound(const Spectrum& s, const QVector& q);

// A scalar field with the derivatives the generator needs.
struct FieldPoint {
    double value = 0.0;
    double du = 0.0, dv = 0.0;
    double duu = 0.0, duv = 0.0, dvv = 0.0;
};
using ScalarField = std::function<FieldPoint(ConePoint)>;

// Generator applied with arbitrary per-mode weights in place of the
// conditional energies (weights[l-1] for mode l). Shared by the effective
// generator and the lifted N-dimensional check.
double apply_generator_weighted(const Spectrum& s, const FieldPoint& psi,
                                std::span<const double> mode_weights);
double apply_generator(const Spectrum& s, const FieldPoint& psi, const QVector& q);
double apply_generator(const Spectrum& s, const ScalarField& psi, ConePoint w);

// Parameters of the drift function Phi = (u-v)^(-alpha0) + (lam_N v-u)^(-beta0)
// + exp(gamma0 v) and of the compact set Gamma = {u-v >= f0, lam_N v-u >= g0,
// v <= v0} for the Lyapunov-Foster condition.
struct LyapunovParams {
    double alpha0 = 0.0, beta0 = 0.0, gamma0 = 0.0;
    double f0 = 0.0, g0 = 0.0, v0 = 0.0;
    double c_f = 0.0, c_g = 0.0, c_v = 0.0;  // per-part upper bounds
    double c_phi = 0.0;
};

// Exponents from the spectral feasibility inequalities (half the supremum),
// gamma0 = 1/(2a); the set parameters by dyadic search with a 2x margin.
// Throws InfeasibleLyapunovError when no searched candidate satisfies the
// drift condition (feasibility is guaranteed, so that signals a bug).
LyapunovParams choose_lyapunov(const Spectrum& s, int grid = 40);

// Generator applied to the three parts of Phi, plus the per-part analytic
// upper bounds they must respect pointwise.
struct LyapunovParts {
    double a_phi_f = 0.0, a_phi_g = 0.0, a_phi_v = 0.0;
    double bound_f = 0.0, bound_g = 0.0, bound_v = 0.0;
    double a_phi() const { return a_phi_f + a_phi_g + a_phi_v; }
};
LyapunovParts lyapunov_parts(const Spectrum& s, const LyapunovParams& p, ConePoint w);

struct LyapunovReport {
    bool drift_ok = false;       // A Phi <= -1 outside Gamma, <= c_phi on it
    bool bounds_ok = false;      // per-part analytic bounds hold pointwise
    bool ratio_ok = false;       // |A Phi| / blowup-envelope bounded below
    int grid_points = 0;
    int outside_points = 0;
    double worst_outside = 0.0;  // max A Phi outside Gamma
    double worst_inside = 0.0;   // max A Phi on Gamma
    double min_ratio = 0.0;
    double ratio_floor = 0.0;
    ConePoint worst_point{};
    bool ok() const { return drift_ok && bounds_ok && ratio_ok; }
};

// Check the drift condition over a log-spaced grid covering the boundary
// layers and the large-v range. Throws DriftViolationError only when asked to
// (the report always carries the offending point).
LyapunovReport verify_lyapunov(const Spectrum& s, const LyapunovParams& p, int grid,
                               bool throw_on_violation = false);

// 1D reduction on the lowest sector: U - V behaves as a diffusion with
// generator A x rho'' + (C x + D) rho' up to the sector exit time.
struct Sector2Coeffs {
    double A = 0.0, C = 0.0, D = 0.0;
};
Sector2Coeffs sector2_coeffs(const Spectrum& s);

// ----------------------------------------------------------------------------
// simulation

struct SimulateOptions {
    double dt = 1e-3;
    std::uint64_t steps = 1'000'000;   // per trajectory
    std::uint64_t burn_in = 0;         // 0 selects the default steps/10
    std::uint64_t seed = 0;
    int trajectories = 1;
    int batches_per_trajectory = 50;
    int threads = 1;
    // optional columnar dump (step, t, u, v) of trajectory 0
    std::string dump_path;
    bool dump_gzip = false;
    std::uint64_t dump_every = 1;
};

struct StationaryStats {
    double mean_u = 0.0, se_u = 0.0;
    double mean_v = 0.0, se_v = 0.0;
    double mean_umv = 0.0, se_umv = 0.0;   // U - V
    double mean_slq = 0.0, se_slq = 0.0;   // sum_l lambda_l q_l(W)
    std::uint64_t steps = 0;               // per trajectory
    std::uint64_t burn_in = 0;
    double dt = 0.0;
    std::uint64_t seed = 0;
    int trajectories = 0;
    std::uint64_t safeguard_steps = 0;     // steps that needed shrinking
    std::uint64_t projections = 0;         // steps that needed projecting
    double safeguard_rate = 0.0;
};

// Euler-Maruyama with a boundary safeguard: a proposal leaving the open cone
// retries with halved step (fresh noise) up to 20 times, then projects to
// relative depth 1e-8 inside the violated face. Throws StepRejectedError when
// more than 10% of steps need the safeguard (step size too large).
StationaryStats simulate(const Spectrum& s, ConePoint w0, const SimulateOptions& opt);

} // namespace enscond
