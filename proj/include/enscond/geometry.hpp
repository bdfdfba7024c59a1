#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "enscond/spectrum.hpp"

namespace enscond {

// A point w = (u, v) of the state cone C = {0 <= v <= u <= lambda_N * v}.
// u is twice the enstrophy, v twice the energy of the underlying mode vector.
struct ConePoint {
    double u = 0.0;
    double v = 0.0;
};

// Relative tolerance for treating a point as lying on a sector ray.
inline constexpr double kRayTol = 1e-12;
// Relative distance below which a point counts as on the cone boundary.
inline constexpr double kBoundaryTol = 1e-10;

struct SectorLocation {
    enum class Kind { Apex, Ray, Interior };
    Kind kind = Kind::Apex;
    // Ray: the pair index i with u = mu_i * v (1 <= i <= n).
    // Interior: the sector index m with mu_{m-1} < u/v < mu_m (2 <= m <= n).
    int index = 0;
};

bool inside_cone(const Spectrum& s, ConePoint w, double tol = kRayTol);

// Classify w. Throws OutsideConeError when w lies outside C beyond tolerance.
SectorLocation locate_sector(const Spectrum& s, ConePoint w, double ray_tol = kRayTol);

enum class VolumeMethod { ClosedForm, Lawrence, RejectionMC };

struct VolumeEstimate {
    double value = 0.0;
    double stderr_v = 0.0;  // zero for exact methods
    VolumeMethod method = VolumeMethod::ClosedForm;
};

// A vertex of the allocation polytope
//   V_w = { s in R_+^Sigma : l1(s) <= u - mu_1 v, l2(s) >= u - mu_2 v },
// Sigma = {3..n}, l1(s) = sum (1 - mu_1/mu_i) s_i, l2(s) = sum (1 - mu_2/mu_i) s_i.
// Each vertex saturates exactly n-2 of the defining constraints.
struct PolytopeVertex {
    enum class Kind {
        Axis1,    // t_{1,j} e_j, saturates l1 and all coordinates but j
        Axis2,    // t_{2,j} e_j, saturates l2 and all coordinates but j
        TwoPlane  // alpha_{i,j} e_i + beta_{j,i} e_j, saturates l1, l2 and the rest
    };
    Kind kind = Kind::Axis1;
    int i = 0;  // pair index of the low coordinate (TwoPlane only)
    int j = 0;  // pair index of the axis / high coordinate
    std::vector<double> coords;  // over Sigma in ascending index order
};

// Vertex set for w strictly inside sector m with m >= 4 (the taxonomy above
// needs a nonempty low-index group). Throws WrongSectorError for m <= 3.
std::vector<PolytopeVertex> vertex_set(const Spectrum& s, ConePoint w);

// Exact volume of V_w on the closures of the two lowest sectors, where the
// polytope is a simplex (resp. a difference of two simplices).
VolumeEstimate volume_closed_form(const Spectrum& s, ConePoint w);

// Exact volume via Lawrence's vertex sum with a generic linear functional.
// Dispatches to the closed forms on sectors 2 and 3. The functional is drawn
// deterministically from f_seed and redrawn (at most 64 times) whenever a
// vertex coefficient falls below the genericity threshold.
VolumeEstimate volume_lawrence(const Spectrum& s, ConePoint w, std::uint64_t f_seed = 0);

// Unbiased rejection-sampling estimate: uniform draws in the bounding box
// prod_i [0, t_{1,i}], binomial standard error. Chunked counter-based streams
// make the result independent of thread scheduling.
VolumeEstimate volume_mc(const Spectrum& s, ConePoint w, std::uint64_t samples,
                         std::uint64_t seed, int threads = 1);

// Volume of the reduced polytope with coordinate i0 removed (i0 in {3..n}),
// an (n-3)-dimensional body; zero outside the cone.
VolumeEstimate reduced_volume(const Spectrum& s, int i0, ConePoint w);

// Exact dispatching volume of V_w (closed forms or Lawrence).
double volume(const Spectrum& s, ConePoint w);

// integral over t >= 0 of t^moment * V^{i0}(u - t, v - t/mu_{i0}). The
// integrand is piecewise polynomial in t with analytic breakpoints, so
// fixed-order Gauss-Legendre per piece is exact up to rounding.
double reduced_volume_line_integral(const Spectrum& s, int i0, ConePoint w, int moment);

// Conditional means of the pair energies S_i for i in Sigma given (u, v):
// the barycenter of V_w. Requires w strictly interior; throws
// NumericalDegeneracyError when V_w underflows (use the boundary dispatch of
// the q-function module instead).
std::vector<double> barycenter(const Spectrum& s, ConePoint w);
void barycenter_into(const Spectrum& s, ConePoint w, std::span<double> out);

} // namespace enscond
