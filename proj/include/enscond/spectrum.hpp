#pragma once

#include <string>
#include <vector>

namespace enscond {

// Raw configuration of an eigenvalue/forcing family. Eigenvalues mu and
// forcing perturbations delta are given once per pair i = 1..n and expanded
// to the 2n mode indices on validation.
struct SpectrumConfig {
    int n = 0;
    std::vector<double> mu;          // mu_1..mu_n, mu_1 = 1, strictly increasing
    std::vector<double> delta_pair;  // one value per pair, each in (-1, 0]
    double a = 1.0;                  // Gaussian variance scale, > 0
};

// Parse the key/value config format (see README: keys n, mu, delta_pair, a,
// optional preset). Throws ParseError on malformed input.
SpectrumConfig parse_spectrum_config(const std::string& text);
SpectrumConfig load_spectrum_config(const std::string& path);

// Preset family mu_i = r^(i-1) (so mu_1 = 1) with flat delta = 0.
SpectrumConfig geometric_config(int n, double ratio, double a = 1.0);

// Validated spectrum. Immutable after construction, safe to share across
// threads. Indices are 1-based throughout: mu(i) for pairs i = 1..n,
// lambda(l)/delta(l) for modes l = 1..N with lambda_{2i} = lambda_{2i-1} = mu_i.
class Spectrum {
public:
    int n() const { return n_; }
    int N() const { return 2 * n_; }
    double a() const { return a_; }

    double mu(int i) const { return mu_[size_t(i - 1)]; }
    double delta_pair(int i) const { return delta_[size_t(i - 1)]; }
    double lambda(int ell) const { return mu_[size_t((ell - 1) / 2)]; }
    double delta(int ell) const { return delta_[size_t((ell - 1) / 2)]; }
    double lambda_max() const { return mu_.back(); }

    const std::vector<double>& mus() const { return mu_; }
    const std::vector<double>& delta_pairs() const { return delta_; }

    // True when all delta coincide; the common value goes to *value.
    bool equal_delta(double* value = nullptr) const;

private:
    friend Spectrum build_spectrum(const SpectrumConfig&);
    int n_ = 0;
    double a_ = 1.0;
    std::vector<double> mu_;
    std::vector<double> delta_;
};

// Validate and build. Throws ValidationError naming the first violated
// assumption (n too small, mu_1 != 1, mu not strictly increasing, delta out
// of range, a <= 0).
Spectrum build_spectrum(const SpectrumConfig& config);

// Forcing constants B0 = a*sum(1+delta_l), B1 = a*sum(lambda_l*(1+delta_l)).
struct ForcingConstants {
    double B0 = 0.0;
    double B1 = 0.0;
};
ForcingConstants forcing_constants(const Spectrum& s);

} // namespace enscond
