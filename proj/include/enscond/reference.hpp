#pragma once

#include <cstdint>
#include <vector>

#include "enscond/effective.hpp"
#include "enscond/geometry.hpp"
#include "enscond/rng.hpp"
#include "enscond/spectrum.hpp"

namespace enscond {

// Amplitudes of the N modes.
struct ModeVector {
    std::vector<double> x;
    double norm2() const;  // U = sum x_l^2
};
double norm2_weighted(const Spectrum& s, const ModeVector& m);  // V = sum x_l^2 / lambda_l
ConePoint push_forward(const Spectrum& s, const ModeVector& m);

// One draw from the product Gaussian with per-coordinate variance a/2.
ModeVector sample_mu(const Spectrum& s, rng::Stream& stream);

// One (U, V) draw from the image of the Gaussian with variance a(1+delta)/2,
// the stationary law when all delta coincide. Throws UnequalDeltaError.
ConePoint sample_nu(const Spectrum& s, rng::Stream& stream);

// Exact Ornstein-Uhlenbeck transition over time dt, coordinatewise:
// x <- exp(-lambda dt) x + noise with the exact transition variance.
void ou_step(const Spectrum& s, ModeVector& m, double dt, rng::Stream& stream);

// Monte Carlo stationarity residual of the lifted generator: the average of
// L g over the stationary Gaussian must vanish for g = psi(U, V). The dual
// average replaces the squared modes by their conditional means and must
// vanish too; their pathwise difference is centered exactly.
struct GeneratorResidual {
    double mean_lifted = 0.0, se_lifted = 0.0;
    double mean_effective = 0.0, se_effective = 0.0;
    double mean_diff = 0.0, se_diff = 0.0;
    std::uint64_t samples = 0;
};
GeneratorResidual lifted_generator_check(const Spectrum& s, const ScalarField& psi,
                                         std::uint64_t samples, std::uint64_t seed,
                                         int threads = 1);

// Unnormalized density of the Gaussian image law on the cone:
// exp(-u/a) * V(u, v); zero outside. Divide by nu_normalization to integrate
// to one.
double nu_density_unnormalized(const Spectrum& s, ConePoint w);
double nu_normalization(const Spectrum& s);  // a^n (1 - 1/mu_2)

} // namespace enscond
