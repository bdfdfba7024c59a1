#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "enscond/effective.hpp"
#include "enscond/spectrum.hpp"

namespace enscond {

// Upper bounds on 2 E[U - V] from the stationary identities and the ordered
// decay of the high-mode conditional energies. The middle bound uses the
// exact partial-sum weights, the loose one the simpler l0/(N - l0) envelope
// (infinite for l0 = N).
std::pair<double, double> condensation_bound_rhs(const Spectrum& s, int ell0);

struct CondensationRow {
    int ell0 = 0;
    double rhs_mid = 0.0;
    double rhs_loose = 0.0;
    double margin_mid = 0.0;  // rhs_mid - lhs
    bool pass = false;
};

struct CondensationReport {
    double lhs = 0.0;      // 2 E[U - V]
    double lhs_se = 0.0;
    double ratio = 0.0;    // E[U - V] / E[U]
    std::vector<CondensationRow> rows;
    bool all_pass = true;
};

CondensationReport condensation_report(const Spectrum& s, const StationaryStats& stats);

// Relative residuals of the stationary identities 2E[U] = B0 and
// 2E[sum lambda_l q_l] = B1, passing at max(3 se, 3%).
struct ConservationReport {
    double residual_u = 0.0, se_u = 0.0;
    double residual_slq = 0.0, se_slq = 0.0;
    bool pass_u = false, pass_slq = false;
};

ConservationReport conservation_report(const Spectrum& s, const StationaryStats& stats);

// Key/value report emission (one "key = value" line each), shared by the CLI.
void write_kv(std::ostream& out, const std::string& key, const std::string& value);
void write_kv(std::ostream& out, const std::string& key, double value);
void write_kv(std::ostream& out, const std::string& key, std::uint64_t value);
void write_spectrum_echo(std::ostream& out, const Spectrum& s);
void write_stats(std::ostream& out, const StationaryStats& st);
void write_condensation(std::ostream& out, const CondensationReport& rep);
void write_conservation(std::ostream& out, const ConservationReport& rep);

} // namespace enscond
