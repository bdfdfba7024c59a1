#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "enscond/geometry.hpp"
#include "enscond/spectrum.hpp"

namespace enscond {

// Conditional mean energies given (u, v): qhat(i) is the expected pair energy
// S_i = x_{2i}^2 + x_{2i-1}^2, q(l) = qhat(ceil(l/2)) / 2 the expected single
// mode energy. Entries are nonnegative, sum to u, and sum to v with weights
// 1/mu_i; they never depend on the Gaussian scale a.
struct QVector {
    std::vector<double> qhat;  // entries for pairs i = 1..n

    double qhat_i(int i) const { return qhat[size_t(i - 1)]; }
    double q(int ell) const { return 0.5 * qhat[size_t((ell - 1) / 2)]; }
    int pairs() const { return int(qhat.size()); }
};

// Evaluate on the whole cone with continuity-correct dispatch: exact closed
// form on the lowest sector, exact boundary values near u = v and u = mu_n v,
// symmetric offset averaging on interior rays, barycenter quadrature elsewhere.
// Throws OutsideConeError.
QVector qhat_eval(const Spectrum& s, ConePoint w);
void qhat_eval_into(const Spectrum& s, ConePoint w, std::span<double> out);

double q_ell(const Spectrum& s, ConePoint w, int ell);

// Residuals of the two linear identities: (sum_i qhat_i - u, sum_i qhat_i/mu_i - v).
std::pair<double, double> identity_residuals(const Spectrum& s, const QVector& q, ConePoint w);

// Differences g_i = (1 - 1/mu_{i+1}) qhat_{i+1} - (1 - 1/mu_i) qhat_i for
// i = 2..n-1; all are nonnegative up to rounding.
std::vector<double> monotonicity_gaps(const Spectrum& s, ConePoint w);

// Slack of the upper bound qhat_i <= (u - v) / ((n - i + 1)(1 - 1/mu_i)).
double upper_bound_slack(const Spectrum& s, ConePoint w, int i);

// Independent Monte Carlo check: Nadaraya-Watson estimate of E[S_i | U, V]
// from Gaussian mode samples, with a product Gaussian kernel of the given
// bandwidth and block-bootstrap standard errors.
struct ConditionalEstimate {
    std::vector<double> qhat;      // estimates for pairs i = 1..n
    std::vector<double> stderr_q;  // bootstrap standard errors
    double effective_samples = 0.0;
};
ConditionalEstimate mc_conditional_oracle(const Spectrum& s, ConePoint w, double bandwidth,
                                          std::uint64_t samples, std::uint64_t seed,
                                          int threads = 1);

// Largest finite-difference slope of any qhat_i over a triangulated grid of
// the cone slice {u <= 1}; finite and stable under refinement.
double lipschitz_probe(const Spectrum& s, int grid);

} // namespace enscond
