#include "enscond/reference.hpp"

#include <cmath>

#include "enscond/errors.hpp"
#include "enscond/parallel.hpp"
#include "enscond/qfun.hpp"

namespace enscond {

double ModeVector::norm2() const {
    double acc = 0.0;
    for (const double xi : x) acc += xi * xi;
    return acc;
}

double norm2_weighted(const Spectrum& s, const ModeVector& m) {
    double acc = 0.0;
    for (int ell = 1; ell <= s.N(); ++ell) {
        const double xi = m.x[size_t(ell - 1)];
        acc += xi * xi / s.lambda(ell);
    }
    return acc;
}

ConePoint push_forward(const Spectrum& s, const ModeVector& m) {
    return {m.norm2(), norm2_weighted(s, m)};
}

ModeVector sample_mu(const Spectrum& s, rng::Stream& stream) {
    ModeVector m;
    m.x.resize(size_t(s.N()));
    const double sigma = std::sqrt(s.a() / 2.0);
    for (auto& xi : m.x) xi = sigma * stream.normal();
    return m;
}

ConePoint sample_nu(const Spectrum& s, rng::Stream& stream) {
    double delta = 0.0;
    if (!s.equal_delta(&delta))
        throw UnequalDeltaError("sample_nu: the stationary law is explicit only for equal delta");
    const double sigma = std::sqrt(s.a() * (1.0 + delta) / 2.0);
    double u = 0.0, v = 0.0;
    for (int ell = 1; ell <= s.N(); ++ell) {
        const double xi = sigma * stream.normal();
        u += xi * xi;
        v += xi * xi / s.lambda(ell);
    }
    return {u, v};
}

void ou_step(const Spectrum& s, ModeVector& m, double dt, rng::Stream& stream) {
    for (int ell = 1; ell <= s.N(); ++ell) {
        const double lam = s.lambda(ell);
        const double decay = std::exp(-lam * dt);
        const double stat_var = s.a() * (1.0 + s.delta(ell)) / 2.0;
        const double noise_sd = std::sqrt(stat_var * (1.0 - decay * decay));
        double& xi = m.x[size_t(ell - 1)];
        xi = decay * xi + noise_sd * stream.normal();
    }
}

GeneratorResidual lifted_generator_check(const Spectrum& s, const ScalarField& psi,
                                         std::uint64_t samples, std::uint64_t seed,
                                         int threads) {
    double delta = 0.0;
    if (!s.equal_delta(&delta))
        throw UnequalDeltaError("lifted generator check requires equal delta");
    // With equal delta the stationary coordinate variance is a(1+delta)/2; an
    // equivalent spectrum with a' = a(1+delta), delta' = 0 has the same
    // generator, so sample at the rescaled variance.
    const double sigma = std::sqrt(s.a() * (1.0 + delta) / 2.0);
    const int N = s.N();

    constexpr std::uint64_t kChunk = 1u << 13;
    const std::uint64_t chunks = (samples + kChunk - 1) / kChunk;
    struct Sums {
        double l = 0, l2 = 0, e = 0, e2 = 0, d = 0, d2 = 0;
    };
    std::vector<Sums> acc(size_t(chunks));

    parallel_chunks(chunks, threads, [&](std::uint64_t c) {
        rng::Stream stream(seed, c);
        const std::uint64_t count = std::min(kChunk, samples - c * kChunk);
        std::vector<double> sq(size_t(N));
        QVector q;
        q.qhat.resize(size_t(s.n()));
        Sums& out = acc[size_t(c)];
        for (std::uint64_t k = 0; k < count; ++k) {
            double u = 0.0, v = 0.0;
            for (int ell = 1; ell <= N; ++ell) {
                const double xi = sigma * stream.normal();
                const double x2 = xi * xi;
                sq[size_t(ell - 1)] = x2;
                u += x2;
                v += x2 / s.lambda(ell);
            }
            const ConePoint w{u, v};
            const FieldPoint fp = psi(w);
            const double lifted = apply_generator_weighted(s, fp, sq);
            qhat_eval_into(s, w, q.qhat);
            const double effective = apply_generator(s, fp, q);
            const double diff = lifted - effective;
            out.l += lifted;
            out.l2 += lifted * lifted;
            out.e += effective;
            out.e2 += effective * effective;
            out.d += diff;
            out.d2 += diff * diff;
        }
    });

    Sums tot;
    for (const auto& a : acc) {
        tot.l += a.l;
        tot.l2 += a.l2;
        tot.e += a.e;
        tot.e2 += a.e2;
        tot.d += a.d;
        tot.d2 += a.d2;
    }
    const double m = double(samples);
    const auto finish = [&](double sum, double sum2, double* mean, double* se) {
        *mean = sum / m;
        const double var = std::max(0.0, sum2 / m - (*mean) * (*mean));
        *se = std::sqrt(var / m);
    };
    GeneratorResidual res;
    res.samples = samples;
    finish(tot.l, tot.l2, &res.mean_lifted, &res.se_lifted);
    finish(tot.e, tot.e2, &res.mean_effective, &res.se_effective);
    finish(tot.d, tot.d2, &res.mean_diff, &res.se_diff);
    return res;
}

double nu_density_unnormalized(const Spectrum& s, ConePoint w) {
    if (!inside_cone(s, w)) return 0.0;
    return std::exp(-w.u / s.a()) * volume(s, w);
}

double nu_normalization(const Spectrum& s) {
    return std::pow(s.a(), s.n()) * (1.0 - 1.0 / s.mu(2));
}

} // namespace enscond
