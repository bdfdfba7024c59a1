#include "enscond/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "enscond/errors.hpp"

namespace enscond {

namespace {

std::vector<double> parse_number_list(const std::string& value, const std::string& key) {
    std::vector<double> out;
    std::string cleaned = value;
    std::replace(cleaned.begin(), cleaned.end(), ',', ' ');
    std::istringstream in(cleaned);
    double x = 0.0;
    while (in >> x) out.push_back(x);
    if (!in.eof()) throw ParseError("config: non-numeric entry in '" + key + "'");
    return out;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

} // namespace

SpectrumConfig parse_spectrum_config(const std::string& text) {
    SpectrumConfig cfg;
    bool have_preset = false;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key == "n") {
            cfg.n = std::stoi(value);
        } else if (key == "mu") {
            cfg.mu = parse_number_list(value, key);
        } else if (key == "delta_pair") {
            cfg.delta_pair = parse_number_list(value, key);
        } else if (key == "a") {
            cfg.a = std::stod(value);
        } else if (key == "preset") {
            // geometric(n, r): mu_i = r^(i-1), delta = 0
            const auto open = value.find('(');
            const auto close = value.rfind(')');
            if (value.substr(0, open) != "geometric" || open == std::string::npos ||
                close == std::string::npos || close < open)
                throw ParseError("config: unknown preset '" + value + "'");
            const auto args = parse_number_list(value.substr(open + 1, close - open - 1), key);
            if (args.size() != 2) throw ParseError("config: preset geometric expects (n, r)");
            const auto g = geometric_config(int(args[0]), args[1], cfg.a);
            cfg.n = g.n;
            cfg.mu = g.mu;
            cfg.delta_pair = g.delta_pair;
            have_preset = true;
        } else {
            throw ParseError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        }
    }
    if (cfg.n == 0 && !have_preset) throw ParseError("config: missing key 'n'");
    if (cfg.delta_pair.empty()) cfg.delta_pair.assign(size_t(cfg.n), 0.0);
    return cfg;
}

SpectrumConfig load_spectrum_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_spectrum_config(buf.str());
}

SpectrumConfig geometric_config(int n, double ratio, double a) {
    SpectrumConfig cfg;
    cfg.n = n;
    cfg.a = a;
    cfg.mu.resize(size_t(std::max(n, 0)));
    for (int i = 0; i < n; ++i) cfg.mu[size_t(i)] = std::pow(ratio, i);
    if (!cfg.mu.empty()) {
        const double scale = cfg.mu.front();
        for (auto& m : cfg.mu) m /= scale;
    }
    cfg.delta_pair.assign(size_t(std::max(n, 0)), 0.0);
    return cfg;
}

Spectrum build_spectrum(const SpectrumConfig& config) {
    if (config.n < 4)
        throw ValidationError("spectrum: n must be at least 4 (got " + std::to_string(config.n) + ")");
    if (int(config.mu.size()) != config.n)
        throw ValidationError("spectrum: mu must list exactly n values");
    if (int(config.delta_pair.size()) != config.n)
        throw ValidationError("spectrum: delta_pair must list exactly n values");
    if (config.mu.front() != 1.0)
        throw ValidationError("spectrum: mu_1 must equal 1");
    for (int i = 1; i < config.n; ++i) {
        if (!(config.mu[size_t(i)] > config.mu[size_t(i - 1)]))
            throw ValidationError("spectrum: mu must be strictly increasing (violated at pair " +
                                  std::to_string(i + 1) + ")");
    }
    for (int i = 0; i < config.n; ++i) {
        const double d = config.delta_pair[size_t(i)];
        if (!(d > -1.0 && d <= 0.0))
            throw ValidationError("spectrum: delta must lie in (-1, 0] (violated at pair " +
                                  std::to_string(i + 1) + ")");
        if (!std::isfinite(config.mu[size_t(i)]))
            throw ValidationError("spectrum: mu must be finite");
    }
    if (!(config.a > 0.0) || !std::isfinite(config.a))
        throw ValidationError("spectrum: a must be positive");

    Spectrum s;
    s.n_ = config.n;
    s.a_ = config.a;
    s.mu_ = config.mu;
    s.delta_ = config.delta_pair;

    // Feasibility of the drift-function exponents: twice the largest summand
    // stays below the full sum, on both the low-mode and high-mode side.
    // Guaranteed for any valid spectrum (n >= 4), so a failure here means a bug.
    double sum_f = 0, max_f = 0, sum_g = 0, max_g = 0;
    const double lam_n = s.mu_.back();
    for (int i = 1; i <= s.n_; ++i) {
        const double wf = (s.mu(i) - 1.0) * (1.0 + s.delta_pair(i));
        const double wg = (lam_n - s.mu(i)) * (1.0 + s.delta_pair(i));
        sum_f += 2.0 * wf;
        sum_g += 2.0 * wg;
        max_f = std::max(max_f, wf);
        max_g = std::max(max_g, wg);
    }
    if (!(2.0 * max_f < sum_f) || !(2.0 * max_g < sum_g))
        throw ValidationError("spectrum: drift-exponent feasibility failed (internal)");

    return s;
}

bool Spectrum::equal_delta(double* value) const {
    const double d0 = delta_.front();
    for (const double d : delta_)
        if (d != d0) return false;
    if (value) *value = d0;
    return true;
}

ForcingConstants forcing_constants(const Spectrum& s) {
    ForcingConstants fc;
    for (int ell = 1; ell <= s.N(); ++ell) {
        const double w = 1.0 + s.delta(ell);
        fc.B0 += w;
        fc.B1 += s.lambda(ell) * w;
    }
    fc.B0 *= s.a();
    fc.B1 *= s.a();
    return fc;
}

} // namespace enscond
