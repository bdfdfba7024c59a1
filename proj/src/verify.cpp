#include "enscond/verify.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "enscond/errors.hpp"

namespace enscond {

std::pair<double, double> condensation_bound_rhs(const Spectrum& s, int ell0) {
    if (ell0 < 3 || ell0 > s.N())
        throw IndexOutOfRangeError("condensation bound index must lie in {3..N}");
    const ForcingConstants fc = forcing_constants(s);
    const int i0 = (ell0 + 1) / 2;
    const double lead = (fc.B1 - fc.B0) / (s.lambda(ell0) - 1.0);
    const double low_factor = s.lambda(3) / (s.lambda(3) - 1.0);

    double partial = 0.0;
    for (int k = 1; k <= i0 - 2; ++k) partial += 1.0 / double(s.n() - k);
    const double mid = lead + low_factor * partial * fc.B0;

    const double loose =
        (ell0 == s.N())
            ? std::numeric_limits<double>::infinity()
            : lead + low_factor * double(ell0) / double(s.N() - ell0) * fc.B0;
    return {mid, loose};
}

CondensationReport condensation_report(const Spectrum& s, const StationaryStats& stats) {
    CondensationReport rep;
    rep.lhs = 2.0 * stats.mean_umv;
    rep.lhs_se = 2.0 * stats.se_umv;
    rep.ratio = stats.mean_umv / stats.mean_u;
    for (int ell0 = 3; ell0 <= s.N(); ++ell0) {
        const auto [mid, loose] = condensation_bound_rhs(s, ell0);
        CondensationRow row;
        row.ell0 = ell0;
        row.rhs_mid = mid;
        row.rhs_loose = loose;
        row.margin_mid = mid - rep.lhs;
        row.pass = rep.lhs <= mid + 3.0 * rep.lhs_se;
        rep.all_pass = rep.all_pass && row.pass;
        rep.rows.push_back(row);
    }
    return rep;
}

ConservationReport conservation_report(const Spectrum& s, const StationaryStats& stats) {
    const ForcingConstants fc = forcing_constants(s);
    ConservationReport rep;
    rep.residual_u = (2.0 * stats.mean_u - fc.B0) / fc.B0;
    rep.se_u = 2.0 * stats.se_u / fc.B0;
    rep.residual_slq = (2.0 * stats.mean_slq - fc.B1) / fc.B1;
    rep.se_slq = 2.0 * stats.se_slq / fc.B1;
    rep.pass_u = std::abs(rep.residual_u) <= std::max(3.0 * rep.se_u, 0.03);
    rep.pass_slq = std::abs(rep.residual_slq) <= std::max(3.0 * rep.se_slq, 0.03);
    return rep;
}

// ----------------------------------------------------------------------------
// report emission

namespace {
std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}
} // namespace

void write_kv(std::ostream& out, const std::string& key, const std::string& value) {
    out << key << " = " << value << "\n";
}
void write_kv(std::ostream& out, const std::string& key, double value) {
    out << key << " = " << fmt(value) << "\n";
}
void write_kv(std::ostream& out, const std::string& key, std::uint64_t value) {
    out << key << " = " << value << "\n";
}

void write_spectrum_echo(std::ostream& out, const Spectrum& s) {
    write_kv(out, "spectrum.n", std::uint64_t(s.n()));
    std::string mus, deltas;
    for (int i = 1; i <= s.n(); ++i) {
        if (i > 1) {
            mus += " ";
            deltas += " ";
        }
        mus += fmt(s.mu(i));
        deltas += fmt(s.delta_pair(i));
    }
    write_kv(out, "spectrum.mu", mus);
    write_kv(out, "spectrum.delta_pair", deltas);
    write_kv(out, "spectrum.a", s.a());
    const ForcingConstants fc = forcing_constants(s);
    write_kv(out, "spectrum.B0", fc.B0);
    write_kv(out, "spectrum.B1", fc.B1);
}

void write_stats(std::ostream& out, const StationaryStats& st) {
    write_kv(out, "stats.mean_u", st.mean_u);
    write_kv(out, "stats.se_u", st.se_u);
    write_kv(out, "stats.mean_v", st.mean_v);
    write_kv(out, "stats.se_v", st.se_v);
    write_kv(out, "stats.mean_u_minus_v", st.mean_umv);
    write_kv(out, "stats.se_u_minus_v", st.se_umv);
    write_kv(out, "stats.mean_sum_lambda_q", st.mean_slq);
    write_kv(out, "stats.se_sum_lambda_q", st.se_slq);
    write_kv(out, "stats.steps", st.steps);
    write_kv(out, "stats.burn_in", st.burn_in);
    write_kv(out, "stats.dt", st.dt);
    write_kv(out, "stats.seed", st.seed);
    write_kv(out, "stats.trajectories", std::uint64_t(st.trajectories));
    write_kv(out, "stats.safeguard_steps", st.safeguard_steps);
    write_kv(out, "stats.projections", st.projections);
    write_kv(out, "stats.safeguard_rate", st.safeguard_rate);
}

void write_condensation(std::ostream& out, const CondensationReport& rep) {
    write_kv(out, "condensation.lhs", rep.lhs);
    write_kv(out, "condensation.lhs_se", rep.lhs_se);
    write_kv(out, "condensation.ratio", rep.ratio);
    for (const auto& row : rep.rows) {
        const std::string p = "condensation.l0_" + std::to_string(row.ell0);
        write_kv(out, p + ".rhs_mid", row.rhs_mid);
        write_kv(out, p + ".rhs_loose", row.rhs_loose);
        write_kv(out, p + ".margin_mid", row.margin_mid);
        write_kv(out, p + ".pass", std::string(row.pass ? "yes" : "no"));
    }
    write_kv(out, "condensation.all_pass", std::string(rep.all_pass ? "yes" : "no"));
}

void write_conservation(std::ostream& out, const ConservationReport& rep) {
    write_kv(out, "conservation.residual_2EU_vs_B0", rep.residual_u);
    write_kv(out, "conservation.se_2EU_vs_B0", rep.se_u);
    write_kv(out, "conservation.pass_2EU_vs_B0", std::string(rep.pass_u ? "yes" : "no"));
    write_kv(out, "conservation.residual_2ESlq_vs_B1", rep.residual_slq);
    write_kv(out, "conservation.se_2ESlq_vs_B1", rep.se_slq);
    write_kv(out, "conservation.pass_2ESlq_vs_B1", std::string(rep.pass_slq ? "yes" : "no"));
}

} // namespace enscond
