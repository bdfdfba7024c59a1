#include "enscond/qfun.hpp"

#include <algorithm>
#include <cmath>

#include "enscond/errors.hpp"
#include "enscond/parallel.hpp"
#include "enscond/rng.hpp"

namespace enscond {

namespace {

constexpr double kRayEps = 1e-7;  // offset used when averaging across a ray

// Closed form on the closure of the lowest sector (v <= u <= mu_2 v):
// qhat_i = (u - v) / ((n - 1)(1 - 1/mu_i)) for i >= 2, and qhat_1 makes up
// the remainder of the sum identity.
void qhat_lowest_sector(const Spectrum& s, ConePoint w, std::span<double> out) {
    const int n = s.n();
    const double diff = (w.u - w.v) / double(n - 1);
    double tail = 0.0;
    for (int i = 2; i <= n; ++i) {
        out[size_t(i - 1)] = diff / (1.0 - 1.0 / s.mu(i));
        tail += diff / (s.mu(i) - 1.0);
    }
    out[0] = w.v - tail;
}

// Recover the two lowest pair energies from the linear identities once the
// barycenter supplies the entries for i >= 3.
void recover_low_pairs(const Spectrum& s, ConePoint w, std::span<double> out) {
    const double mu2 = s.mu(2);
    double l1 = 0.0, l2 = 0.0;
    for (int i = 3; i <= s.n(); ++i) {
        const double qi = out[size_t(i - 1)];
        l1 += (1.0 - 1.0 / s.mu(i)) * qi;
        l2 += (1.0 - mu2 / s.mu(i)) * qi;
    }
    out[1] = (w.u - w.v - l1) / (1.0 - 1.0 / mu2);
    out[0] = (-w.u + mu2 * w.v + l2) / (mu2 - 1.0);
}

void eval_dispatch(const Spectrum& s, ConePoint w, std::span<double> out, bool allow_ray_average);

void eval_generic(const Spectrum& s, ConePoint w, std::span<double> out) {
    thread_local std::vector<double> bary;
    bary.resize(size_t(s.n() - 2));
    barycenter_into(s, w, bary);
    for (int i = 3; i <= s.n(); ++i) out[size_t(i - 1)] = bary[size_t(i - 3)];
    recover_low_pairs(s, w, out);
}

void eval_dispatch(const Spectrum& s, ConePoint w, std::span<double> out, bool allow_ray_average) {
    const int n = s.n();
    if (!inside_cone(s, w)) throw OutsideConeError("qhat: point outside the cone");

    std::fill(out.begin(), out.end(), 0.0);
    if (w.u < 1e-300) return;  // apex

    // exact boundary values: all mass on the lowest (resp. highest) pair
    if (w.u - w.v <= kBoundaryTol * w.u) {
        out[0] = w.u;
        return;
    }
    if (s.lambda_max() * w.v - w.u <= kBoundaryTol * w.u) {
        out[size_t(n - 1)] = w.u;
        return;
    }
    if (w.u <= s.mu(2) * w.v) {
        qhat_lowest_sector(s, w, out);
        return;
    }
    if (allow_ray_average) {
        for (int i = 3; i < n; ++i) {
            if (std::abs(w.u - s.mu(i) * w.v) <= kRayTol * w.u) {
                // the piecewise forms change across the ray; average two
                // symmetric offsets (the function itself is continuous)
                thread_local std::vector<double> lo, hi;
                lo.resize(size_t(n));
                hi.resize(size_t(n));
                const double base = s.mu(i) * w.v;
                eval_dispatch(s, {base * (1.0 - kRayEps), w.v}, lo, false);
                eval_dispatch(s, {base * (1.0 + kRayEps), w.v}, hi, false);
                for (int k = 0; k < n; ++k)
                    out[size_t(k)] = 0.5 * (lo[size_t(k)] + hi[size_t(k)]);
                return;
            }
        }
    }
    eval_generic(s, w, out);
}

} // namespace

void qhat_eval_into(const Spectrum& s, ConePoint w, std::span<double> out) {
    if (int(out.size()) != s.n()) throw IndexOutOfRangeError("qhat output span has wrong size");
    eval_dispatch(s, w, out, true);
}

QVector qhat_eval(const Spectrum& s, ConePoint w) {
    QVector q;
    q.qhat.resize(size_t(s.n()));
    qhat_eval_into(s, w, q.qhat);
    return q;
}

double q_ell(const Spectrum& s, ConePoint w, int ell) {
    if (ell < 1 || ell > s.N())
        throw IndexOutOfRangeError("mode index must lie in 1..N, got " + std::to_string(ell));
    return qhat_eval(s, w).q(ell);
}

std::pair<double, double> identity_residuals(const Spectrum& s, const QVector& q, ConePoint w) {
    double ru = -w.u, rv = -w.v;
    for (int i = 1; i <= s.n(); ++i) {
        ru += q.qhat_i(i);
        rv += q.qhat_i(i) / s.mu(i);
    }
    return {ru, rv};
}

std::vector<double> monotonicity_gaps(const Spectrum& s, ConePoint w) {
    const QVector q = qhat_eval(s, w);
    std::vector<double> gaps;
    gaps.reserve(size_t(s.n() - 2));
    for (int i = 2; i + 1 <= s.n(); ++i) {
        const double lo = (1.0 - 1.0 / s.mu(i)) * q.qhat_i(i);
        const double hi = (1.0 - 1.0 / s.mu(i + 1)) * q.qhat_i(i + 1);
        gaps.push_back(hi - lo);
    }
    return gaps;
}

double upper_bound_slack(const Spectrum& s, ConePoint w, int i) {
    if (i < 2 || i > s.n())
        throw IndexOutOfRangeError("upper bound index must lie in 2..n");
    const QVector q = qhat_eval(s, w);
    const double rhs = (w.u - w.v) / (double(s.n() - i + 1) * (1.0 - 1.0 / s.mu(i)));
    return rhs - q.qhat_i(i);
}

ConditionalEstimate mc_conditional_oracle(const Spectrum& s, ConePoint w, double bandwidth,
                                          std::uint64_t samples, std::uint64_t seed,
                                          int threads) {
    if (!(bandwidth > 0.0)) throw ValidationError("oracle: bandwidth must be positive");
    if (!inside_cone(s, w)) throw OutsideConeError("oracle: point outside the cone");
    const int n = s.n();
    const double sigma = std::sqrt(s.a() / 2.0);
    const double inv2h2 = 1.0 / (2.0 * bandwidth * bandwidth);

    // Per-block sums of the kernel weight, weight^2 and weighted pair
    // energies; blocks are the bootstrap resampling unit.
    constexpr std::uint64_t kChunk = 1u << 14;
    const std::uint64_t blocks = (samples + kChunk - 1) / kChunk;
    const size_t stride = size_t(n) + 2;
    std::vector<double> block_sums(size_t(blocks) * stride, 0.0);

    parallel_chunks(blocks, threads, [&](std::uint64_t b) {
        rng::Stream stream(seed, b);
        const std::uint64_t count = std::min(kChunk, samples - b * kChunk);
        double* sums = &block_sums[size_t(b) * stride];
        std::vector<double> pair_energy(size_t(n));
        for (std::uint64_t k = 0; k < count; ++k) {
            double big_u = 0.0, big_v = 0.0;
            for (int i = 1; i <= n; ++i) {
                const double x1 = sigma * stream.normal();
                const double x2 = sigma * stream.normal();
                const double si = x1 * x1 + x2 * x2;
                pair_energy[size_t(i - 1)] = si;
                big_u += si;
                big_v += si / s.mu(i);
            }
            const double du = big_u - w.u, dv = big_v - w.v;
            const double wt = std::exp(-(du * du + dv * dv) * inv2h2);
            sums[0] += wt;
            sums[1] += wt * wt;
            for (int i = 0; i < n; ++i) sums[size_t(i) + 2] += wt * pair_energy[size_t(i)];
        }
    });

    double wsum = 0.0, w2sum = 0.0;
    std::vector<double> wssum(size_t(n), 0.0);
    for (std::uint64_t b = 0; b < blocks; ++b) {
        const double* sums = &block_sums[size_t(b) * stride];
        wsum += sums[0];
        w2sum += sums[1];
        for (int i = 0; i < n; ++i) wssum[size_t(i)] += sums[size_t(i) + 2];
    }
    const double ess = (w2sum > 0.0) ? wsum * wsum / w2sum : 0.0;
    if (ess < 100.0)
        throw InsufficientEffectiveSamplesError(
            "oracle: kernel-effective sample size " + std::to_string(ess) + " < 100");

    ConditionalEstimate est;
    est.effective_samples = ess;
    est.qhat.resize(size_t(n));
    for (int i = 0; i < n; ++i) est.qhat[size_t(i)] = wssum[size_t(i)] / wsum;

    // block bootstrap over the chunk aggregates
    constexpr int kResamples = 200;
    std::vector<double> acc(size_t(n));
    std::vector<double> mean_boot(size_t(n), 0.0), m2_boot(size_t(n), 0.0);
    rng::Stream boot(seed ^ 0xB00757A9ull, 0);
    for (int rep = 0; rep < kResamples; ++rep) {
        double wacc = 0.0;
        std::fill(acc.begin(), acc.end(), 0.0);
        for (std::uint64_t b = 0; b < blocks; ++b) {
            const std::uint64_t pick =
                std::uint64_t(boot.uniform() * double(blocks)) % blocks;
            const double* sums = &block_sums[size_t(pick) * stride];
            wacc += sums[0];
            for (int i = 0; i < n; ++i) acc[size_t(i)] += sums[size_t(i) + 2];
        }
        for (int i = 0; i < n; ++i) {
            const double val = (wacc > 0.0) ? acc[size_t(i)] / wacc : 0.0;
            const double d = val - mean_boot[size_t(i)];
            mean_boot[size_t(i)] += d / double(rep + 1);
            m2_boot[size_t(i)] += d * (val - mean_boot[size_t(i)]);
        }
    }
    est.stderr_q.resize(size_t(n));
    for (int i = 0; i < n; ++i)
        est.stderr_q[size_t(i)] = std::sqrt(m2_boot[size_t(i)] / double(kResamples - 1));
    return est;
}

double lipschitz_probe(const Spectrum& s, int grid) {
    if (grid < 2) throw ValidationError("lipschitz probe: grid must be at least 2");
    const int n = s.n();
    const double top = s.lambda_max();

    // map the unit square onto the cone slice {u <= 1}: u = sigma,
    // v between u/lambda_N and u
    const auto point = [&](int iu, int it) {
        const double uu = double(iu + 1) / double(grid);
        const double tt = double(it) / double(grid - 1);
        const double vv = uu * (1.0 / top + tt * (1.0 - 1.0 / top));
        return ConePoint{uu, vv};
    };

    std::vector<double> values(size_t(grid) * size_t(grid) * size_t(n));
    const auto slot = [&](int iu, int it) {
        return (size_t(iu) * size_t(grid) + size_t(it)) * size_t(n);
    };
    thread_local std::vector<double> q;
    q.resize(size_t(n));
    for (int iu = 0; iu < grid; ++iu) {
        for (int it = 0; it < grid; ++it) {
            qhat_eval_into(s, point(iu, it), q);
            std::copy(q.begin(), q.end(), values.begin() + long(slot(iu, it)));
        }
    }

    double max_slope = 0.0;
    const auto edge = [&](int iu0, int it0, int iu1, int it1) {
        const ConePoint w0 = point(iu0, it0), w1 = point(iu1, it1);
        const double dist = std::hypot(w1.u - w0.u, w1.v - w0.v);
        if (dist < 1e-14) return;
        const double* a = &values[slot(iu0, it0)];
        const double* b = &values[slot(iu1, it1)];
        for (int i = 0; i < n; ++i)
            max_slope = std::max(max_slope, std::abs(b[i] - a[i]) / dist);
    };
    for (int iu = 0; iu < grid; ++iu) {
        for (int it = 0; it < grid; ++it) {
            if (iu + 1 < grid) edge(iu, it, iu + 1, it);
            if (it + 1 < grid) edge(iu, it, iu, it + 1);
            if (iu + 1 < grid && it + 1 < grid) edge(iu, it, iu + 1, it + 1);
        }
    }
    return max_slope;
}

} // namespace enscond
