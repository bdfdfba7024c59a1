#include "enscond/effective.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include <zlib.h>

#include "enscond/errors.hpp"
#include "enscond/parallel.hpp"
#include "enscond/rng.hpp"

namespace enscond {

namespace {

constexpr int kMaxStepHalvings = 20;
constexpr double kProjectionDepth = 1e-8;
constexpr double kSafeguardLimit = 0.10;

// pair-indexed sums over the conditional energies
struct QSums {
    double plain = 0.0;     // sum (1+delta_i) qhat_i
    double lam = 0.0;       // sum mu_i (1+delta_i) qhat_i
    double invlam = 0.0;    // sum (1+delta_i) qhat_i / mu_i
    double lam_raw = 0.0;   // sum mu_i qhat_i
    double raw = 0.0;       // sum qhat_i
};

QSums accumulate_sums(const Spectrum& s, const QVector& q) {
    QSums acc;
    for (int i = 1; i <= s.n(); ++i) {
        const double w = (1.0 + s.delta_pair(i)) * q.qhat_i(i);
        acc.plain += w;
        acc.lam += s.mu(i) * w;
        acc.invlam += w / s.mu(i);
        acc.lam_raw += s.mu(i) * q.qhat_i(i);
        acc.raw += q.qhat_i(i);
    }
    return acc;
}

} // namespace

DiffusionCoeffs coeffs_from_q(const Spectrum& s, const QVector& q) {
    const QSums acc = accumulate_sums(s, q);
    const ForcingConstants fc = forcing_constants(s);
    DiffusionCoeffs c;
    const double scale = 4.0 * s.a();
    c.a_uu = scale * acc.lam;
    c.a_uv = scale * acc.plain;
    c.a_vv = scale * acc.invlam;
    c.b_u = fc.B1 - 2.0 * acc.lam_raw;
    c.b_v = fc.B0 - 2.0 * acc.raw;
    return c;
}

DiffusionCoeffs coeffs(const Spectrum& s, ConePoint w) {
    return coeffs_from_q(s, qhat_eval(s, w));
}

std::pair<double, double> ellipticity(const Spectrum& s, ConePoint w) {
    const DiffusionCoeffs c = coeffs(s, w);
    const double trace = c.a_uu + c.a_vv;
    const double det = c.a_uu * c.a_vv - c.a_uv * c.a_uv;
    if (!(trace > 0.0) || !(det > 0.0))
        throw NotPositiveDefiniteError("diffusion matrix not positive definite at (" +
                                       std::to_string(w.u) + ", " + std::to_string(w.v) + ")");
    return {trace, det};
}

double ellipticity_lower_bound(const Spectrum& s, const QVector& q) {
    const int n = s.n();
    double gap = std::numeric_limits<double>::infinity();
    for (int i = 1; i <= n; ++i) {
        for (int j = 1; j <= n; ++j) {
            if (i == j) continue;
            const double r = s.mu(i) / s.mu(j);
            gap = std::min(gap, r + 1.0 / r - 2.0);
        }
    }
    double cross = 0.0;
    for (int i = 1; i <= n; ++i) {
        for (int j = 1; j <= n; ++j) {
            if (i == j) continue;
            cross += (1.0 + s.delta_pair(i)) * 0.5 * q.qhat_i(i) *
                     (1.0 + s.delta_pair(j)) * 0.5 * q.qhat_i(j);
        }
    }
    return 32.0 * s.a() * s.a() * gap * cross;
}

double apply_generator_weighted(const Spectrum& s, const FieldPoint& psi,
                                std::span<const double> mode_weights) {
    if (int(mode_weights.size()) != s.N())
        throw IndexOutOfRangeError("generator weights must have one entry per mode");
    double second_uu = 0.0, second_uv = 0.0, second_vv = 0.0;
    double drift_u = 0.0, drift_v = 0.0;
    for (int ell = 1; ell <= s.N(); ++ell) {
        const double lam = s.lambda(ell);
        const double one_plus = 1.0 + s.delta(ell);
        const double wl = mode_weights[size_t(ell - 1)];
        second_uu += lam * one_plus * wl;
        second_uv += one_plus * wl;
        second_vv += one_plus * wl / lam;
        drift_u += s.a() * lam * one_plus - 2.0 * lam * wl;
        drift_v += s.a() * one_plus - 2.0 * wl;
    }
    return 2.0 * s.a() * (second_uu * psi.duu + 2.0 * second_uv * psi.duv + second_vv * psi.dvv) +
           drift_u * psi.du + drift_v * psi.dv;
}

double apply_generator(const Spectrum& s, const FieldPoint& psi, const QVector& q) {
    const QSums acc = accumulate_sums(s, q);
    const ForcingConstants fc = forcing_constants(s);
    return 2.0 * s.a() * (acc.lam * psi.duu + 2.0 * acc.plain * psi.duv + acc.invlam * psi.dvv) +
           (fc.B1 - 2.0 * acc.lam_raw) * psi.du + (fc.B0 - 2.0 * acc.raw) * psi.dv;
}

double apply_generator(const Spectrum& s, const ScalarField& psi, ConePoint w) {
    return apply_generator(s, psi(w), qhat_eval(s, w));
}

// ----------------------------------------------------------------------------
// Lyapunov drift function

namespace {

double sum_low_weight(const Spectrum& s) {  // sum (lambda_l - 1)(1 + delta_l)
    double acc = 0.0;
    for (int ell = 1; ell <= s.N(); ++ell)
        acc += (s.lambda(ell) - 1.0) * (1.0 + s.delta(ell));
    return acc;
}

double sum_high_weight(const Spectrum& s) {  // sum (lambda_N - lambda_l)(1 + delta_l)
    double acc = 0.0;
    for (int ell = 1; ell <= s.N(); ++ell)
        acc += (s.lambda_max() - s.lambda(ell)) * (1.0 + s.delta(ell));
    return acc;
}

double max_low_weight(const Spectrum& s) {
    double m = 0.0;
    for (int ell = 1; ell <= s.N(); ++ell)
        m = std::max(m, (s.lambda(ell) - 1.0) * (1.0 + s.delta(ell)));
    return m;
}

double max_high_weight(const Spectrum& s) {
    double m = 0.0;
    for (int ell = 1; ell <= s.N(); ++ell)
        m = std::max(m, (s.lambda_max() - s.lambda(ell)) * (1.0 + s.delta(ell)));
    return m;
}

// peak of x -> -(e/x^(e+1)) * (K - 2 lam x) over x > 0 (the envelope of the
// per-part drift bound); attained at x* = (e+1) K / (2 e lam)
double envelope_peak(double e, double K, double lam) {
    const double xs = (e + 1.0) * K / (2.0 * e * lam);
    return -(e / std::pow(xs, e + 1.0)) * (K - 2.0 * lam * xs);
}

std::vector<ConePoint> lyapunov_grid(const Spectrum& s, int grid) {
    std::vector<ConePoint> pts;
    pts.reserve(size_t(grid) * size_t(grid) * 2);
    const double lam_n = s.lambda_max();
    const auto logspace = [&](int k, double lo, double hi) {
        return lo * std::pow(hi / lo, double(k) / double(grid - 1));
    };
    // boundary layers: log-spaced distances to the two faces
    for (int a = 0; a < grid; ++a) {
        const double f = logspace(a, 1e-6, 1e3);
        for (int b = 0; b < grid; ++b) {
            const double g = logspace(b, 1e-6, 1e3);
            const double v = (f + g) / (lam_n - 1.0);
            pts.push_back({v + f, v});
        }
    }
    // large-v sweep across the sector fan
    for (int a = 0; a < grid; ++a) {
        const double v = logspace(a, 1e-2, 1e3);
        for (int b = 0; b < grid; ++b) {
            const double r = 1.0 + (double(b) + 0.5) / double(grid) * (lam_n - 1.0);
            pts.push_back({r * v, v});
        }
    }
    return pts;
}

} // namespace

LyapunovParts lyapunov_parts(const Spectrum& s, const LyapunovParams& p, ConePoint w) {
    const QVector q = qhat_eval(s, w);
    const double lam_n = s.lambda_max();
    const double f = w.u - w.v;
    const double g = lam_n * w.v - w.u;
    const double a = s.a();
    const double N = double(s.N());

    LyapunovParts out;
    {
        const double al = p.alpha0;
        FieldPoint psi;
        psi.value = std::pow(f, -al);
        const double d1 = al * std::pow(f, -al - 1.0);
        const double d2 = al * (al + 1.0) * std::pow(f, -al - 2.0);
        psi.du = -d1;
        psi.dv = d1;
        psi.duu = d2;
        psi.duv = -d2;
        psi.dvv = d2;
        out.a_phi_f = apply_generator(s, psi, q);
        out.bound_f = -(al / std::pow(f, al + 1.0)) *
                      (a * al / (2.0 * al + 1.0) * sum_low_weight(s) - 2.0 * lam_n * f);
    }
    {
        const double be = p.beta0;
        FieldPoint psi;
        psi.value = std::pow(g, -be);
        const double d1 = be * std::pow(g, -be - 1.0);
        const double d2 = be * (be + 1.0) * std::pow(g, -be - 2.0);
        psi.du = d1;
        psi.dv = -lam_n * d1;
        psi.duu = d2;
        psi.duv = -lam_n * d2;
        psi.dvv = lam_n * lam_n * d2;
        out.a_phi_g = apply_generator(s, psi, q);
        out.bound_g = -(be / std::pow(g, be + 1.0)) *
                      (a * be / (2.0 * be + 1.0) * sum_high_weight(s) - 2.0 * lam_n * g);
    }
    {
        const double ga = p.gamma0;
        FieldPoint psi;
        const double ev = std::exp(ga * w.v);
        psi.value = ev;
        psi.dv = ga * ev;
        psi.dvv = ga * ga * ev;
        out.a_phi_v = apply_generator(s, psi, q);
        out.bound_v = (a * N - w.u) / (2.0 * a) * std::exp(w.v / (2.0 * a));
    }
    return out;
}

LyapunovParams choose_lyapunov(const Spectrum& s, int grid) {
    LyapunovParams p;
    p.alpha0 = 0.5 * 0.5 * (sum_low_weight(s) / (2.0 * max_low_weight(s)) - 1.0);
    p.beta0 = 0.5 * 0.5 * (sum_high_weight(s) / (2.0 * max_high_weight(s)) - 1.0);
    p.gamma0 = 1.0 / (2.0 * s.a());

    const double lam_n = s.lambda_max();
    p.c_f = envelope_peak(p.alpha0, s.a() * p.alpha0 / (2.0 * p.alpha0 + 1.0) * sum_low_weight(s),
                          lam_n);
    p.c_g = envelope_peak(p.beta0, s.a() * p.beta0 / (2.0 * p.beta0 + 1.0) * sum_high_weight(s),
                          lam_n);
    p.c_v = double(s.N()) / 2.0 * std::exp(double(s.N()) / 2.0);
    p.c_phi = p.c_f + p.c_g + p.c_v;

    // cache the generator values once; the set parameters only move the
    // membership boundary
    const std::vector<ConePoint> pts = lyapunov_grid(s, grid);
    std::vector<double> fs(pts.size()), gs(pts.size()), vs(pts.size()), aphi(pts.size());
    for (size_t k = 0; k < pts.size(); ++k) {
        fs[k] = pts[k].u - pts[k].v;
        gs[k] = lam_n * pts[k].v - pts[k].u;
        vs[k] = pts[k].v;
        aphi[k] = lyapunov_parts(s, p, pts[k]).a_phi();
    }
    const auto passes = [&](double f0, double g0, double v0) {
        for (size_t k = 0; k < pts.size(); ++k) {
            const bool in_gamma = fs[k] >= f0 && gs[k] >= g0 && vs[k] <= v0;
            if (!in_gamma && !(aphi[k] <= -1.0)) return false;
        }
        return true;
    };
    for (int k = 1; k <= 40; ++k) {
        const double f0 = std::pow(2.0, -k);
        const double v0 = std::pow(2.0, k);
        if (passes(f0, f0, v0)) {
            p.f0 = f0 / 2.0;  // 2x safety margin
            p.g0 = f0 / 2.0;
            p.v0 = 2.0 * v0;
            return p;
        }
    }
    throw InfeasibleLyapunovError("no drift set found on the search grid (internal)");
}

LyapunovReport verify_lyapunov(const Spectrum& s, const LyapunovParams& p, int grid,
                               bool throw_on_violation) {
    const double lam_n = s.lambda_max();
    const std::vector<ConePoint> pts = lyapunov_grid(s, grid);

    LyapunovReport rep;
    rep.grid_points = int(pts.size());
    rep.drift_ok = true;
    rep.bounds_ok = true;
    rep.ratio_floor = 1e-6;
    rep.worst_outside = -std::numeric_limits<double>::infinity();
    rep.worst_inside = -std::numeric_limits<double>::infinity();
    rep.min_ratio = std::numeric_limits<double>::infinity();

    for (const ConePoint& w : pts) {
        const double f = w.u - w.v;
        const double g = lam_n * w.v - w.u;
        const LyapunovParts parts = lyapunov_parts(s, p, w);
        const double total = parts.a_phi();

        const double slack = 1e-9 * (1.0 + std::abs(parts.bound_f) + std::abs(parts.bound_g) +
                                     std::abs(parts.bound_v));
        if (parts.a_phi_f > parts.bound_f + slack || parts.a_phi_g > parts.bound_g + slack ||
            parts.a_phi_v > parts.bound_v + slack)
            rep.bounds_ok = false;

        const bool in_gamma = f >= p.f0 && g >= p.g0 && w.v <= p.v0;
        if (in_gamma) {
            if (total > rep.worst_inside) rep.worst_inside = total;
            if (total > p.c_phi + 1e-9 * (1.0 + std::abs(p.c_phi))) {
                rep.drift_ok = false;
                rep.worst_point = w;
            }
        } else {
            ++rep.outside_points;
            if (total > rep.worst_outside) {
                rep.worst_outside = total;
                if (total > -1.0) rep.worst_point = w;
            }
            // blowup envelope of the drift near the boundary / at large v
            const double envelope = std::pow(f, -p.alpha0 - 1.0) +
                                    std::pow(g, -p.beta0 - 1.0) + std::exp(p.gamma0 * w.v);
            rep.min_ratio = std::min(rep.min_ratio, std::abs(total) / envelope);
        }
    }
    if (rep.outside_points > 0 && rep.worst_outside > -1.0) rep.drift_ok = false;
    rep.ratio_ok = rep.outside_points > 0 && rep.min_ratio >= rep.ratio_floor;

    if (throw_on_violation && !rep.ok())
        throw DriftViolationError("Lyapunov drift condition violated at (" +
                                  std::to_string(rep.worst_point.u) + ", " +
                                  std::to_string(rep.worst_point.v) + ")");
    return rep;
}

Sector2Coeffs sector2_coeffs(const Spectrum& s) {
    Sector2Coeffs c;
    const double sum_f = sum_low_weight(s);
    double sum_lam_high = 0.0;
    for (int ell = 3; ell <= s.N(); ++ell) sum_lam_high += s.lambda(ell);
    c.A = 2.0 * s.a() / double(s.N() - 2) * sum_f;
    c.C = -2.0 / double(s.N() - 2) * sum_lam_high;
    c.D = s.a() * sum_f;
    return c;
}

// ----------------------------------------------------------------------------
// simulation

namespace {

struct BatchAccum {
    double wsum = 0.0;
    double su = 0.0, sv = 0.0, sumv = 0.0, sslq = 0.0;
};

struct TrajectoryResult {
    std::vector<BatchAccum> batches;
    std::uint64_t safeguard_steps = 0;
    std::uint64_t projections = 0;
};

class TrajectoryDump {
public:
    TrajectoryDump(const std::string& path, bool gzip) : gzip_(gzip) {
        if (path.empty()) return;
        if (gzip_) {
            gz_ = gzopen(path.c_str(), "wb");
            if (!gz_) throw IoError("cannot open trajectory dump: " + path);
            gzprintf(gz_, "step\tt\tu\tv\n");
        } else {
            plain_.open(path);
            if (!plain_) throw IoError("cannot open trajectory dump: " + path);
            plain_ << "step\tt\tu\tv\n";
        }
        active_ = true;
    }
    ~TrajectoryDump() {
        if (gz_) gzclose(gz_);
    }
    bool active() const { return active_; }
    void line(std::uint64_t step, double t, double u, double v) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "%llu\t%.10g\t%.17g\t%.17g\n",
                      (unsigned long long)step, t, u, v);
        if (gz_)
            gzputs(gz_, buf);
        else
            plain_ << buf;
    }

private:
    bool active_ = false;
    bool gzip_ = false;
    std::ofstream plain_;
    gzFile gz_ = nullptr;
};

void stats_from_batches(const std::vector<TrajectoryResult>& results, StationaryStats* st) {
    double wtot = 0.0, su = 0.0, sv = 0.0, sumv = 0.0, sslq = 0.0;
    std::vector<std::array<double, 4>> means;
    for (const auto& tr : results) {
        for (const auto& b : tr.batches) {
            if (b.wsum <= 0.0) continue;
            wtot += b.wsum;
            su += b.su;
            sv += b.sv;
            sumv += b.sumv;
            sslq += b.sslq;
            means.push_back({b.su / b.wsum, b.sv / b.wsum, b.sumv / b.wsum, b.sslq / b.wsum});
        }
    }
    st->mean_u = su / wtot;
    st->mean_v = sv / wtot;
    st->mean_umv = sumv / wtot;
    st->mean_slq = sslq / wtot;

    const double k = double(means.size());
    double var[4] = {0, 0, 0, 0};
    const double avg[4] = {st->mean_u, st->mean_v, st->mean_umv, st->mean_slq};
    for (const auto& m : means)
        for (int c = 0; c < 4; ++c) var[c] += (m[size_t(c)] - avg[c]) * (m[size_t(c)] - avg[c]);
    for (int c = 0; c < 4; ++c) var[c] /= std::max(1.0, k - 1.0);
    st->se_u = std::sqrt(var[0] / k);
    st->se_v = std::sqrt(var[1] / k);
    st->se_umv = std::sqrt(var[2] / k);
    st->se_slq = std::sqrt(var[3] / k);
}

} // namespace

StationaryStats simulate(const Spectrum& s, ConePoint w0, const SimulateOptions& opt) {
    if (!(opt.dt > 0.0)) throw ValidationError("simulate: dt must be positive");
    if (opt.trajectories < 1) throw ValidationError("simulate: need at least one trajectory");
    if (!inside_cone(s, w0) || w0.u - w0.v <= kBoundaryTol * w0.u ||
        s.lambda_max() * w0.v - w0.u <= kBoundaryTol * w0.u)
        throw OutsideConeError("simulate: start point must be strictly interior");

    const std::uint64_t burn = opt.burn_in > 0 ? opt.burn_in : opt.steps / 10;
    if (burn >= opt.steps) throw ValidationError("simulate: burn-in swallows all steps");
    const std::uint64_t post = opt.steps - burn;
    const int batches = std::max(1, opt.batches_per_trajectory);
    if (post < std::uint64_t(batches))
        throw ValidationError("simulate: too few steps for the batch count");

    const double lam_n = s.lambda_max();
    const int n = s.n();
    std::vector<TrajectoryResult> results(size_t(opt.trajectories));

    parallel_chunks(std::uint64_t(opt.trajectories), opt.threads, [&](std::uint64_t tr) {
        rng::Stream stream(opt.seed, tr);
        TrajectoryResult& res = results[size_t(tr)];
        res.batches.assign(size_t(batches), BatchAccum{});

        TrajectoryDump dump(tr == 0 ? opt.dump_path : std::string(), opt.dump_gzip);

        QVector q;
        q.qhat.resize(size_t(n));
        ConePoint w = w0;
        double t = 0.0;

        for (std::uint64_t step = 0; step < opt.steps; ++step) {
            qhat_eval_into(s, w, q.qhat);
            const DiffusionCoeffs c = coeffs_from_q(s, q);

            // lower-triangular square root; rounding near the boundary can
            // push the Schur complement slightly negative, clamp to rank one
            double l11 = 0.0, l21 = 0.0, l22 = 0.0;
            if (c.a_uu > 0.0) {
                l11 = std::sqrt(c.a_uu);
                l21 = c.a_uv / l11;
                l22 = std::sqrt(std::max(0.0, c.a_vv - l21 * l21));
            } else {
                l22 = std::sqrt(std::max(0.0, c.a_vv));
            }

            double h = opt.dt;
            ConePoint next{};
            bool accepted = false;
            int tries = 0;
            while (tries <= kMaxStepHalvings) {
                const double z1 = stream.normal();
                const double z2 = stream.normal();
                const double sq = std::sqrt(h);
                next.u = w.u + c.b_u * h + sq * l11 * z1;
                next.v = w.v + c.b_v * h + sq * (l21 * z1 + l22 * z2);
                if (next.v > 0.0 && next.u > next.v && next.u < lam_n * next.v) {
                    accepted = true;
                    break;
                }
                ++tries;
                h *= 0.5;
            }
            if (tries > 0) ++res.safeguard_steps;
            if (!accepted) {
                ++res.projections;
                if (next.v > 0.0 && next.u > 0.0) {
                    const double r = next.u / next.v;
                    if (r <= 1.0) next.u = next.v * (1.0 + kProjectionDepth);
                    else if (r >= lam_n) next.u = lam_n * next.v * (1.0 - kProjectionDepth);
                } else {
                    next = w;  // fall back to the previous state
                }
            }

            if (step >= burn) {
                double slq = 0.0;
                for (int i = 1; i <= n; ++i) slq += s.mu(i) * q.qhat_i(i);
                const std::uint64_t idx = (step - burn) * std::uint64_t(batches) / post;
                BatchAccum& b = res.batches[size_t(std::min<std::uint64_t>(
                    idx, std::uint64_t(batches - 1)))];
                b.wsum += h;
                b.su += h * w.u;
                b.sv += h * w.v;
                b.sumv += h * (w.u - w.v);
                b.sslq += h * slq;
            }
            if (dump.active() && step % opt.dump_every == 0) dump.line(step, t, w.u, w.v);

            w = next;
            t += h;

            if (step == 999 || (step > 0 && step % 100000 == 0)) {
                if (double(res.safeguard_steps) > kSafeguardLimit * double(step + 1))
                    throw StepRejectedError(
                        "simulate: more than 10% of steps hit the boundary safeguard; "
                        "reduce dt");
            }
        }
    });

    StationaryStats st;
    st.steps = opt.steps;
    st.burn_in = burn;
    st.dt = opt.dt;
    st.seed = opt.seed;
    st.trajectories = opt.trajectories;
    for (const auto& r : results) {
        st.safeguard_steps += r.safeguard_steps;
        st.projections += r.projections;
    }
    st.safeguard_rate =
        double(st.safeguard_steps) / (double(opt.steps) * double(opt.trajectories));
    if (st.safeguard_rate > kSafeguardLimit)
        throw StepRejectedError("simulate: more than 10% of steps hit the boundary safeguard; "
                                "reduce dt");
    stats_from_batches(results, &st);
    return st;
}

} // namespace enscond
