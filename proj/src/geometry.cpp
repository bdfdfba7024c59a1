#include "enscond/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>

#include "enscond/errors.hpp"
#include "enscond/parallel.hpp"
#include "enscond/rng.hpp"

namespace enscond {

namespace {

constexpr double kApexFloor = 1e-300;    // below this v the point is the apex
constexpr double kVolumeFloor = 1e-280;  // normalized-volume underflow cutoff
constexpr double kGenericityTol = 1e-8;  // Lawrence functional rejection threshold
constexpr int kMaxFunctionalDraws = 64;

double factorial(int k) {
    double f = 1.0;
    for (int i = 2; i <= k; ++i) f *= double(i);
    return f;
}

// ---------------------------------------------------------------------------
// Gauss-Legendre rules (nodes/weights on [-1, 1]), cached per order.

struct GlRule {
    std::vector<double> x, w;
};

const GlRule& gl_rule(int k) {
    static std::mutex mu;
    static std::vector<GlRule> cache;
    std::lock_guard<std::mutex> lock(mu);
    if (int(cache.size()) <= k) cache.resize(size_t(k + 1));
    GlRule& rule = cache[size_t(k)];
    if (!rule.x.empty()) return rule;
    rule.x.resize(size_t(k));
    rule.w.resize(size_t(k));
    for (int i = 0; i < (k + 1) / 2; ++i) {
        double t = std::cos(M_PI * (double(i) + 0.75) / (double(k) + 0.5));
        double dp = 1.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = t;
            for (int j = 2; j <= k; ++j) {
                const double p2 = ((2.0 * j - 1.0) * t * p1 - (j - 1.0) * p0) / double(j);
                p0 = p1;
                p1 = p2;
            }
            dp = double(k) * (t * p1 - p0) / (t * t - 1.0);
            const double dt = p1 / dp;
            t -= dt;
            if (std::abs(dt) < 1e-15) break;
        }
        rule.x[size_t(i)] = -t;
        rule.x[size_t(k - 1 - i)] = t;
        const double wi = 2.0 / ((1.0 - t * t) * dp * dp);
        rule.w[size_t(i)] = wi;
        rule.w[size_t(k - 1 - i)] = wi;
    }
    return rule;
}

// ---------------------------------------------------------------------------
// Normalized subsystem geometry. A subsystem retains a subset of the pair
// eigenvalues {mu_3..mu_n}; its polytope at the normalized point (r, 1) is
//   { s in R_+^d : sum p_j s_j <= r - 1,  sum q_j s_j >= r - mu2 },
// with p_j = 1 - 1/mu_j and q_j = 1 - mu2/mu_j.

struct Subsys {
    double mu2 = 0.0;
    std::span<const double> mu;  // retained eigenvalues, ascending, all > mu2
    int dim() const { return int(mu.size()); }
};

double closed_form_low(const Subsys& ss, double r) {
    // Simplex below the first slab; the second constraint is vacuous for r <= mu2.
    double prod = 1.0;
    for (const double m : ss.mu) prod *= 1.0 - 1.0 / m;
    return std::pow(r - 1.0, ss.dim()) / (factorial(ss.dim()) * prod);
}

double closed_form_mid(const Subsys& ss, double r) {
    // Difference of the two slab simplices; valid for mu2 <= r <= min(mu).
    double prod1 = 1.0, prod2 = 1.0;
    for (const double m : ss.mu) {
        prod1 *= 1.0 - 1.0 / m;
        prod2 *= 1.0 - ss.mu2 / m;
    }
    const int d = ss.dim();
    return (std::pow(r - 1.0, d) / prod1 - std::pow(r - ss.mu2, d) / prod2) / factorial(d);
}

// One Lawrence vertex-sum attempt with functional f (unit norm). Returns
// false when some vertex coefficient is below the genericity threshold.
bool lawrence_attempt(const Subsys& ss, double r, std::span<const double> f, double* out) {
    const int d = ss.dim();
    thread_local std::vector<double> gamma;
    gamma.resize(size_t(d));

    double sum = 0.0;
    bool generic = true;
    const auto account = [&](double fdotv, double absdet, double gprod) {
        sum += std::pow(fdotv, d) / (absdet * gprod);
    };

    for (int jj = 0; jj < d && generic; ++jj) {
        const double mj = ss.mu[size_t(jj)];
        if (!(mj >= r)) continue;  // axis vertices exist on the high side only
        const double pj = 1.0 - 1.0 / mj;
        const double qj = 1.0 - ss.mu2 / mj;

        // t_{1,j} e_j : first slab tight, all coordinates but j tight
        {
            const double g1 = f[size_t(jj)] / pj;
            double gprod = g1;
            double gmin = std::abs(g1);
            for (int kk = 0; kk < d; ++kk) {
                if (kk == jj) continue;
                const double gk = g1 * (1.0 - 1.0 / ss.mu[size_t(kk)]) - f[size_t(kk)];
                gprod *= gk;
                gmin = std::min(gmin, std::abs(gk));
            }
            if (gmin < kGenericityTol) { generic = false; break; }
            account(f[size_t(jj)] * (r - 1.0) / pj, pj, gprod);
        }
        // t_{2,j} e_j : second slab tight, all coordinates but j tight
        {
            const double g2 = -f[size_t(jj)] / qj;
            double gprod = g2;
            double gmin = std::abs(g2);
            for (int kk = 0; kk < d; ++kk) {
                if (kk == jj) continue;
                const double gk = -g2 * (1.0 - ss.mu2 / ss.mu[size_t(kk)]) - f[size_t(kk)];
                gprod *= gk;
                gmin = std::min(gmin, std::abs(gk));
            }
            if (gmin < kGenericityTol) { generic = false; break; }
            account(f[size_t(jj)] * (r - ss.mu2) / qj, qj, gprod);
        }
    }

    // two-plane vertices: both slabs tight, coordinates i (low side) and j
    // (high side) free
    for (int ii = 0; ii < d && generic; ++ii) {
        const double mi = ss.mu[size_t(ii)];
        if (!(mi < r)) break;  // ascending order: no low-side indices beyond here
        const double pi = 1.0 - 1.0 / mi;
        const double qi = 1.0 - ss.mu2 / mi;
        for (int jj = ii + 1; jj < d && generic; ++jj) {
            const double mj = ss.mu[size_t(jj)];
            if (!(mj >= r)) continue;
            const double pj = 1.0 - 1.0 / mj;
            const double qj = 1.0 - ss.mu2 / mj;
            const double det2 = qi * pj - pi * qj;
            const double g1 = (-qj * f[size_t(ii)] + qi * f[size_t(jj)]) / det2;
            const double g2 = (-pj * f[size_t(ii)] + pi * f[size_t(jj)]) / det2;
            double gprod = g1 * g2;
            double gmin = std::min(std::abs(g1), std::abs(g2));
            for (int kk = 0; kk < d; ++kk) {
                if (kk == ii || kk == jj) continue;
                const double mk = ss.mu[size_t(kk)];
                const double gk = g1 * (1.0 - 1.0 / mk) - g2 * (1.0 - ss.mu2 / mk) - f[size_t(kk)];
                gprod *= gk;
                gmin = std::min(gmin, std::abs(gk));
            }
            if (gmin < kGenericityTol) { generic = false; break; }
            const double alpha = (1.0 - r / mj) / (1.0 / mi - 1.0 / mj);
            const double beta = (1.0 - r / mi) / (1.0 / mj - 1.0 / mi);
            account(f[size_t(ii)] * alpha + f[size_t(jj)] * beta, std::abs(det2), gprod);
        }
    }

    if (!generic) return false;
    *out = sum / factorial(d);
    return true;
}

double lawrence_volume(const Subsys& ss, double r, std::uint64_t f_seed) {
    const int d = ss.dim();
    thread_local std::vector<double> f;
    f.resize(size_t(d));
    for (int attempt = 0; attempt < kMaxFunctionalDraws; ++attempt) {
        rng::Stream stream(f_seed, 0xFEED0000u + std::uint64_t(attempt));
        double norm2 = 0.0;
        for (auto& fi : f) {
            fi = stream.normal();
            norm2 += fi * fi;
        }
        if (norm2 < 1e-12) continue;
        const double inv = 1.0 / std::sqrt(norm2);
        for (auto& fi : f) fi *= inv;
        double value = 0.0;
        if (lawrence_attempt(ss, r, f, &value)) return value;
    }
    throw DegenerateFunctionalError("lawrence: no generic functional after 64 draws");
}

// Exact normalized volume at (r, 1), dispatching between the closed forms and
// the vertex sum.
double subsys_volume(const Subsys& ss, double r, std::uint64_t f_seed, VolumeMethod* method) {
    if (method) *method = VolumeMethod::ClosedForm;
    if (!(r > 1.0)) return 0.0;
    const double mu_max = ss.mu.back();
    if (!(r < mu_max)) return 0.0;
    if (r <= ss.mu2) return closed_form_low(ss, r);
    if (r <= ss.mu.front()) return closed_form_mid(ss, r);
    if (method) *method = VolumeMethod::Lawrence;
    return lawrence_volume(ss, r, f_seed);
}

Subsys full_subsys(const Spectrum& s, std::vector<double>& scratch) {
    scratch.assign(s.mus().begin() + 2, s.mus().end());
    return Subsys{s.mu(2), scratch};
}

Subsys reduced_subsys(const Spectrum& s, int i0, std::vector<double>& scratch) {
    scratch.clear();
    for (int i = 3; i <= s.n(); ++i)
        if (i != i0) scratch.push_back(s.mu(i));
    return Subsys{s.mu(2), scratch};
}

void check_reduced_index(const Spectrum& s, int i0) {
    if (i0 < 3 || i0 > s.n())
        throw IndexOutOfRangeError("reduced index i0 must lie in {3..n}, got " + std::to_string(i0));
}

// integral over t of t^moment * V^{i0}(r0 - t, 1 - t/mu_{i0}) at the
// normalized point (r0, 1). Between consecutive breakpoints (crossings of the
// rays r = mu) the integrand is a polynomial of degree <= moment + d, so the
// fixed Gauss-Legendre order is exact.
double line_integral_normalized(const Spectrum& s, int i0, double r0, int moment) {
    thread_local std::vector<double> mus, cuts;
    const Subsys ss = reduced_subsys(s, i0, mus);
    const double mu0 = s.mu(i0);

    const double cap = std::min(mu0, r0);
    cuts.clear();
    cuts.push_back(0.0);
    cuts.push_back(cap);
    const auto add_cut = [&](double m) {
        if (std::abs(m - mu0) < 1e-14 * mu0) return;
        const double t = mu0 * (m - r0) / (m - mu0);
        if (t > 0.0 && t < cap) cuts.push_back(t);
    };
    add_cut(1.0);
    add_cut(ss.mu2);
    for (const double m : ss.mu) add_cut(m);
    std::sort(cuts.begin(), cuts.end());

    const int k = (s.n() - 1) / 2 + 1;  // exact for degree <= 2k-1 >= n-2+moment
    const GlRule& rule = gl_rule(k);

    double total = 0.0;
    const int d = ss.dim();
    for (size_t p = 0; p + 1 < cuts.size(); ++p) {
        const double ta = cuts[p], tb = cuts[p + 1];
        if (tb - ta < 1e-15 * cap) continue;
        // skip pieces outside the support of the reduced volume
        const double tm = 0.5 * (ta + tb);
        const double vm = 1.0 - tm / mu0;
        const double um = r0 - tm;
        if (!(vm > 0.0) || !(um > vm) || !(um < vm * ss.mu.back())) continue;

        const double half = 0.5 * (tb - ta), mid = 0.5 * (ta + tb);
        double piece = 0.0;
        for (int g = 0; g < k; ++g) {
            const double t = mid + half * rule.x[size_t(g)];
            const double vp = 1.0 - t / mu0;
            const double up = r0 - t;
            const double vol = std::pow(vp, d) * subsys_volume(ss, up / vp, 0, nullptr);
            piece += rule.w[size_t(g)] * (moment == 0 ? vol : t * vol);
        }
        total += half * piece;
    }
    return total;
}

} // namespace

// ---------------------------------------------------------------------------
// cone membership and sector classification

bool inside_cone(const Spectrum& s, ConePoint w, double tol) {
    if (!std::isfinite(w.u) || !std::isfinite(w.v)) return false;
    if (w.u < 0.0 || w.v < 0.0) return false;
    const double slack = tol * std::max(w.u, kApexFloor);
    return w.u >= w.v - slack && w.u <= s.lambda_max() * w.v + slack;
}

SectorLocation locate_sector(const Spectrum& s, ConePoint w, double ray_tol) {
    if (!inside_cone(s, w, ray_tol))
        throw OutsideConeError("point (" + std::to_string(w.u) + ", " + std::to_string(w.v) +
                               ") lies outside the cone");
    if (w.u < kApexFloor) return {SectorLocation::Kind::Apex, 0};

    for (int i = 1; i <= s.n(); ++i) {
        if (std::abs(w.u - s.mu(i) * w.v) <= ray_tol * w.u)
            return {SectorLocation::Kind::Ray, i};
    }
    const double r = w.u / w.v;
    for (int m = 2; m <= s.n(); ++m) {
        if (r < s.mu(m)) return {SectorLocation::Kind::Interior, m};
    }
    // membership held within tolerance but r >= mu_n: treat as the top ray
    return {SectorLocation::Kind::Ray, s.n()};
}

// ---------------------------------------------------------------------------
// vertex enumeration (full system, sector m >= 4)

std::vector<PolytopeVertex> vertex_set(const Spectrum& s, ConePoint w) {
    const SectorLocation loc = locate_sector(s, w);
    if (loc.kind != SectorLocation::Kind::Interior || loc.index < 4)
        throw WrongSectorError("vertex_set requires a point strictly inside a sector m >= 4");

    const int n = s.n();
    const int d = n - 2;
    const double r = w.u / w.v;
    std::vector<PolytopeVertex> out;
    const auto coord_slot = [&](int pair_index) { return size_t(pair_index - 3); };

    for (int j = 3; j <= n; ++j) {
        if (!(s.mu(j) > r)) continue;
        PolytopeVertex v1;
        v1.kind = PolytopeVertex::Kind::Axis1;
        v1.j = j;
        v1.coords.assign(size_t(d), 0.0);
        v1.coords[coord_slot(j)] = (w.u - w.v) / (1.0 - 1.0 / s.mu(j));
        out.push_back(std::move(v1));

        PolytopeVertex v2;
        v2.kind = PolytopeVertex::Kind::Axis2;
        v2.j = j;
        v2.coords.assign(size_t(d), 0.0);
        v2.coords[coord_slot(j)] = (w.u - s.mu(2) * w.v) / (1.0 - s.mu(2) / s.mu(j));
        out.push_back(std::move(v2));
    }
    for (int i = 3; i <= n; ++i) {
        if (!(s.mu(i) < r)) continue;
        for (int j = i + 1; j <= n; ++j) {
            if (!(s.mu(j) > r)) continue;
            PolytopeVertex vv;
            vv.kind = PolytopeVertex::Kind::TwoPlane;
            vv.i = i;
            vv.j = j;
            vv.coords.assign(size_t(d), 0.0);
            vv.coords[coord_slot(i)] =
                (w.v - w.u / s.mu(j)) / (1.0 / s.mu(i) - 1.0 / s.mu(j));
            vv.coords[coord_slot(j)] =
                (w.v - w.u / s.mu(i)) / (1.0 / s.mu(j) - 1.0 / s.mu(i));
            out.push_back(std::move(vv));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// volumes

VolumeEstimate volume_closed_form(const Spectrum& s, ConePoint w) {
    if (!inside_cone(s, w)) throw OutsideConeError("volume_closed_form: point outside the cone");
    if (w.v < kApexFloor) return {0.0, 0.0, VolumeMethod::ClosedForm};
    thread_local std::vector<double> mus;
    const Subsys ss = full_subsys(s, mus);
    const double r = w.u / w.v;
    const double scale = std::pow(w.v, s.n() - 2);
    if (r <= s.mu(2)) return {scale * closed_form_low(ss, r), 0.0, VolumeMethod::ClosedForm};
    if (r <= s.mu(3)) return {scale * closed_form_mid(ss, r), 0.0, VolumeMethod::ClosedForm};
    throw WrongSectorError("volume_closed_form applies on the two lowest sectors only");
}

VolumeEstimate volume_lawrence(const Spectrum& s, ConePoint w, std::uint64_t f_seed) {
    if (!inside_cone(s, w)) throw OutsideConeError("volume_lawrence: point outside the cone");
    if (w.v < kApexFloor) return {0.0, 0.0, VolumeMethod::ClosedForm};
    thread_local std::vector<double> mus;
    const Subsys ss = full_subsys(s, mus);
    VolumeMethod method = VolumeMethod::ClosedForm;
    const double value =
        std::pow(w.v, s.n() - 2) * subsys_volume(ss, w.u / w.v, f_seed, &method);
    return {value, 0.0, method};
}

double volume(const Spectrum& s, ConePoint w) {
    if (!inside_cone(s, w) || w.v < kApexFloor) return 0.0;
    thread_local std::vector<double> mus;
    const Subsys ss = full_subsys(s, mus);
    return std::pow(w.v, s.n() - 2) * subsys_volume(ss, w.u / w.v, 0, nullptr);
}

VolumeEstimate reduced_volume(const Spectrum& s, int i0, ConePoint w) {
    check_reduced_index(s, i0);
    if (!inside_cone(s, w, kBoundaryTol) || w.v < kApexFloor)
        return {0.0, 0.0, VolumeMethod::ClosedForm};
    thread_local std::vector<double> mus;
    const Subsys ss = reduced_subsys(s, i0, mus);
    VolumeMethod method = VolumeMethod::ClosedForm;
    const double value =
        std::pow(w.v, s.n() - 3) * subsys_volume(ss, w.u / w.v, 0, &method);
    return {value, 0.0, method};
}

VolumeEstimate volume_mc(const Spectrum& s, ConePoint w, std::uint64_t samples,
                         std::uint64_t seed, int threads) {
    if (!inside_cone(s, w)) throw OutsideConeError("volume_mc: point outside the cone");
    const int d = s.n() - 2;
    if (w.u - w.v <= kRayTol * w.u || w.v < kApexFloor)
        return {0.0, 0.0, VolumeMethod::RejectionMC};

    std::vector<double> box(size_t(d));
    double box_volume = 1.0;
    for (int i = 3; i <= s.n(); ++i) {
        box[size_t(i - 3)] = (w.u - w.v) / (1.0 - 1.0 / s.mu(i));
        box_volume *= box[size_t(i - 3)];
    }
    const double b1 = w.u - w.v;
    const double b2 = w.u - s.mu(2) * w.v;

    constexpr std::uint64_t kChunk = 1u << 16;
    const std::uint64_t chunks = (samples + kChunk - 1) / kChunk;
    std::vector<std::uint64_t> accepted(size_t(chunks), 0);
    parallel_chunks(chunks, threads, [&](std::uint64_t c) {
        rng::Stream stream(seed, c);
        const std::uint64_t count = std::min(kChunk, samples - c * kChunk);
        std::uint64_t acc = 0;
        for (std::uint64_t k = 0; k < count; ++k) {
            double l1 = 0.0, l2 = 0.0;
            for (int i = 0; i < d; ++i) {
                const double si = box[size_t(i)] * stream.uniform();
                const double m = s.mu(i + 3);
                l1 += (1.0 - 1.0 / m) * si;
                l2 += (1.0 - s.mu(2) / m) * si;
            }
            if (l1 <= b1 && l2 >= b2) ++acc;
        }
        accepted[size_t(c)] = acc;
    });

    std::uint64_t acc = 0;
    for (const auto c : accepted) acc += c;
    const double p = double(acc) / double(samples);
    VolumeEstimate est;
    est.method = VolumeMethod::RejectionMC;
    est.value = box_volume * p;
    est.stderr_v = box_volume * std::sqrt(p * (1.0 - p) / double(samples));
    return est;
}

double reduced_volume_line_integral(const Spectrum& s, int i0, ConePoint w, int moment) {
    check_reduced_index(s, i0);
    if (moment != 0 && moment != 1)
        throw IndexOutOfRangeError("line integral supports moments 0 and 1");
    if (!inside_cone(s, w, kBoundaryTol) || w.v < kApexFloor) return 0.0;
    // t = v*t' reduces to the normalized integral; degree n-3 from the volume,
    // one more from each of the scaling and the moment factor
    const double scale = std::pow(w.v, s.n() - 2 + moment);
    return scale * line_integral_normalized(s, i0, w.u / w.v, moment);
}

// ---------------------------------------------------------------------------
// barycenter

void barycenter_into(const Spectrum& s, ConePoint w, std::span<double> out) {
    const int count = s.n() - 2;
    if (int(out.size()) != count)
        throw IndexOutOfRangeError("barycenter output span has wrong size");
    if (!inside_cone(s, w, kBoundaryTol))
        throw OutsideConeError("barycenter: point outside the cone");
    if (w.v < kApexFloor)
        throw NumericalDegeneracyError("barycenter: degenerate at the apex");

    thread_local std::vector<double> mus;
    const Subsys ss = full_subsys(s, mus);
    const double r0 = w.u / w.v;
    const double vol = subsys_volume(ss, r0, 0, nullptr);
    if (!(vol > kVolumeFloor))
        throw NumericalDegeneracyError("barycenter: polytope volume underflow near the boundary");
    for (int i0 = 3; i0 <= s.n(); ++i0)
        out[size_t(i0 - 3)] = w.v * line_integral_normalized(s, i0, r0, 1) / vol;
}

std::vector<double> barycenter(const Spectrum& s, ConePoint w) {
    std::vector<double> out(size_t(s.n() - 2));
    barycenter_into(s, w, out);
    return out;
}

} // namespace enscond
