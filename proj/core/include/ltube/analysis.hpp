#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ltube/flow.hpp"
#include "ltube/rng.hpp"
#include "ltube/sections.hpp"
#include "ltube/tube.hpp"

namespace ltube {

//---------------------------------------------------------------------------//
// Tangent dynamics

/// Orthonormal basis of the plane orthogonal to v, with a 2x2 matrix of
/// accumulated transverse derivative.
struct TransverseFrame {
    LineElement base;
    std::array<Vec3, 2> basis;
    std::array<std::array<double, 2>, 2> matrix{{{1, 0}, {0, 1}}};
};

TransverseFrame transverse_frame(const LineElement& x);

/// Tangent vector of the flow: position and velocity perturbations, both
/// kept orthogonal to the velocity.
struct TangentVector {
    Vec3 dq;
    Vec3 dv;
};

/// Linearized free flight of duration tau.
void tangent_flight(TangentVector& t, double tau);

/// Linearized reflection at a collision with pre-collision velocity v_in,
/// inner normal n and shape operator W at the hit point. The result is
/// projected onto the plane orthogonal to the outgoing velocity.
void tangent_collision(TangentVector& t, const Vec3& v_in, const Vec3& n, const Mat3& W);

enum class LyapunovMethod { Tangent, Shadow };

const char* to_string(LyapunovMethod m);
LyapunovMethod parse_lyapunov_method(const std::string& s);

struct LyapunovOptions {
    std::int64_t block_events{100};  // events per bootstrap block
    std::int64_t bootstrap_resamples{2000};
    double confidence{0.99};
    double shadow_offset{1e-9};
    double shadow_discard{1e-4};  // separation above which a shadow segment is dropped
    std::uint64_t bootstrap_seed{12345};
    std::int64_t running_every{100};  // stride of the running-estimate trace
};

/// Per-block log growth (first and second exponents) and elapsed time.
struct LyapunovBlock {
    double log1{0};
    double log2{0};
    double time{0};
};

struct LyapunovResult {
    LyapunovMethod method{LyapunovMethod::Tangent};
    double lambda1{0};
    double lambda2{0};  // NaN for the shadow method
    std::array<double, 2> ci1{0, 0};
    std::array<double, 2> ci2{0, 0};
    std::int64_t events{0};
    double time{0};
    std::int64_t restarts{0};  // singular events met (orbit restarted)
    std::int64_t discarded{0};  // shadow segments dropped
    std::vector<LyapunovBlock> blocks;
    std::vector<std::pair<std::int64_t, double>> running;  // (events, lambda1 so far)
};

/// Lyapunov exponents per unit time along the orbit of x0 over n_events flow
/// events. On a singular event the orbit restarts from a fresh free-region
/// sample drawn with `rng` (counted in `restarts`).
LyapunovResult lyapunov_spectrum(const QuenchedTube& tube, const LineElement& x0, std::int64_t n_events,
                                 LyapunovMethod method, Rng& rng, const LyapunovOptions& options = {});

/// Pools the blocks of several orbits into one estimate with a bootstrap
/// confidence interval over blocks.
LyapunovResult combine_lyapunov(const std::vector<LyapunovResult>& runs, const LyapunovOptions& options = {});

/// Random line element with q uniform in the free region of cell n and v
/// uniform on the sphere.
LineElement sample_free_element(const QuenchedTube& tube, std::int64_t n, Rng& rng);

struct ExpansionResult {
    double factor{1};  // smallest singular value after the last return
    std::vector<double> history;  // factor after each return (history[0] = 1)
    bool monotone{true};
};

/// Smallest singular value of the transverse position map of a parallel
/// (dispersing) beam leaving p, between p and its k-th M return, in the
/// position (orthogonal Jacobi) metric. Throws SingularOrbit.
ExpansionResult expansion_factor(const QuenchedTube& tube, const SectionPoint& p, std::int64_t k_returns,
                                 double eps);

//---------------------------------------------------------------------------//
// Assumption checkers

struct A3Report {
    std::int64_t samples{0};
    std::int64_t dispersing_samples{0};
    std::int64_t flat_excluded{0};
    double k_min{0};  // over all principal curvatures of dispersing points
    double k_max{0};
    double k_transverse_min{0};
    double k_transverse_max{0};
    double k_longitudinal_min{0};
    double k_longitudinal_max{0};
    std::int64_t violations{0};

    bool pass() const { return violations == 0 && dispersing_samples > 0; }
};

/// Samples boundary points of the cell and reports the principal curvature
/// range of the dispersing pieces. A violation is a dispersing point whose
/// transverse curvature is not positive or whose longitudinal curvature is
/// negative.
A3Report check_A3(const CellConfig& cell, std::int64_t samples, Rng& rng);

struct A4Options {
    std::int64_t stride{100};  // collisions between window anchors
    std::uint64_t seed{0};
    int workers{1};
    std::optional<double> window;  // defaults to L
};

struct A4Report {
    std::int64_t windows{0};
    std::int64_t max_collisions_per_L{0};
    double headon_window_fraction{0};
    double eps_used{0};
    double window_length{0};
    std::int64_t K3{0};
    std::int64_t restarts{0};
    std::vector<std::string> failures;  // offending windows, described

    bool pass() const { return windows > 0 && headon_window_fraction == 1.0 && max_collisions_per_L <= K3; }
};

/// Windows of length L anchored at collisions of sampled flow trajectories.
/// Each window (t_c, t_c + L] must contain a dispersing collision with
/// |v . o| > eps and at most K3 collisions.
A4Report check_A4(const QuenchedTube& tube, std::int64_t n_trajectories, std::int64_t windows_per_traj,
                  const A4Options& options = {});

struct A6Row {
    double delta{0};
    std::int64_t samples{0};
    std::int64_t in_neighborhood{0};
    double measure_estimate{0};
    double ratio{0};
};

struct A6Options {
    std::int64_t samples{20000};
    std::uint64_t seed{0};
    int workers{1};
    int area_resolution{600};
};

/// Monte Carlo estimate of the measure of the delta-neighborhood of the
/// singularity set inside M_alpha, alpha = (cell, scatterer). A sample is in
/// the neighborhood when any of its 8 probes (two surface directions and two
/// velocity rotations, each +-delta) has a different itinerary up to the
/// next M return, or leaves M_alpha.
std::vector<A6Row> check_A6(const QuenchedTube& tube, std::int64_t cell, int scatterer,
                            const std::vector<double>& deltas, const A6Options& options = {});

/// Largest over smallest ratio of the rows (infinity if any ratio is 0).
double ratio_spread(const std::vector<A6Row>& rows);

//---------------------------------------------------------------------------//
// Measure invariance

enum class InvarianceMap { Identity, PoincareN, FStep };

const char* to_string(InvarianceMap m);
InvarianceMap parse_invariance_map(const std::string& s);

struct InvarianceOptions {
    int directions{32};
    int permutations{199};
    double alpha{0.01};
    std::uint64_t seed{0};
    int workers{1};
    /// Draw the reference sample with uniform (not cosine-weighted)
    /// velocities: a negative control that must fail.
    bool biased_reference{false};
};

struct InvarianceResult {
    double statistic{0};
    double threshold{0};  // (1 - alpha) quantile of the permutation null
    double p_value{1};
    bool pass{false};
    std::int64_t samples{0};
    std::int64_t dropped{0};  // pushforward samples lost to singular orbits
};

using SectionCoords = std::array<double, 5>;  // (y, z, vx, vy, vz)

SectionCoords section_coords(const SectionPoint& p);

/// Sliced two-sample energy test: the 1D energy distance averaged over
/// random projections of the standardized samples, calibrated by label
/// permutations.
InvarianceResult energy_two_sample_test(const std::vector<SectionCoords>& a, const std::vector<SectionCoords>& b,
                                        const InvarianceOptions& options);

/// Compares fresh mu_N samples of the reference-cell gates with the image
/// of an independent mu_N sample under `map`.
InvarianceResult measure_invariance_test(const QuenchedTube& tube, InvarianceMap map, std::int64_t n_samples,
                                         const InvarianceOptions& options = {});

/// Image of mu_N samples under the map (singular orbits dropped).
std::vector<SectionCoords> pushforward_samples(const QuenchedTube& tube, InvarianceMap map, std::int64_t n,
                                               std::uint64_t seed, int workers, std::int64_t* dropped = nullptr);

/// Fresh mu_N samples (or biased ones) in section coordinates.
std::vector<SectionCoords> fresh_samples(const QuenchedTube& tube, std::int64_t n, std::uint64_t seed,
                                         bool biased);

//---------------------------------------------------------------------------//
// Diamond billiard oracle

/// Planar billiard inside the unit square minus the four disks of radius
/// rho centred at its corners.
template <class Real>
struct DiamondStateT {
    Real px{0};
    Real py{0};
    Real wx{0};
    Real wy{0};
};

using DiamondState = DiamondStateT<double>;

template <class Real>
struct DiamondStepT {
    DiamondStateT<Real> state;  // at the collision point, outgoing velocity
    Real t{0};
    Real cos_phi{0};
    Real phi{0};
    int arc{0};  // corner index 0..3: (0,0), (1,0), (1,1), (0,1)
};

using DiamondStep = DiamondStepT<double>;

/// One collision of the diamond billiard. Throws SingularOrbit within
/// kEdgeThreshold of a vertex (intersection of two arcs).
template <class Real>
DiamondStepT<Real> diamond_step(double rho, const DiamondStateT<Real>& s);

/// Zone of a boundary point: index of the nearest diamond vertex, the
/// vertices being ordered (1/2, a), (1 - a, 1/2), (1/2, 1 - a), (a, 1/2)
/// with a = sqrt(rho^2 - 1/4).
int diamond_zone(double rho, double px, double py);

struct DiamondZoneReport {
    std::int64_t steps{0};
    std::int64_t runs{0};
    double min_zone_change_time{0};
    std::int64_t max_run_length{0};
    std::int64_t runs_without_headon{0};
    std::int64_t M{0};
    double L1{0};
    double phi_bound{0};  // (pi - gamma) / 2
    std::int64_t singular_restarts{0};
};

/// Statistics of zone runs over random diamond orbits.
DiamondZoneReport diamond_zone_statistics(double rho, std::int64_t steps, Rng& rng);

struct ProjectionReport {
    std::int64_t orbits{0};
    std::int64_t collisions{0};
    double max_point_deviation{0};
    double max_identity_deviation{0};  // |cos theta - |v_yz| cos phi|
    std::int64_t restarts{0};
};

/// Runs the 3D flow in the cylindrical, bulkhead-free tube and the diamond
/// oracle from the projected initial condition, both in extended precision,
/// and compares every cylinder collision. Throws SingularOrbit.
ProjectionReport projection_check(const QuenchedTube& tube, const LineElement& x0, std::int64_t n);

//---------------------------------------------------------------------------//
// Correlations

struct CorrelationResult {
    std::vector<std::int64_t> lags;
    std::vector<double> values;
    std::vector<double> errors;  // batch-means standard errors
    std::int64_t returns{0};
};

using Observable = std::function<double(const SectionPoint&)>;

/// Autocorrelation of an observable along the first-return orbit to D.
/// Returns to the listed scatterers of any cell count when `any_cell` is
/// set (the quotient by translations, meaningful for periodic tubes).
CorrelationResult autocorrelation(const QuenchedTube& tube, const SectionSpec& D, const Observable& f,
                                  const std::vector<std::int64_t>& lags, std::int64_t n_returns, Rng& rng,
                                  bool centered = true, bool any_cell = false, int batches = 20);

/// Normalized autocorrelation of a series.
std::vector<double> series_autocorrelation(const std::vector<double>& series, const std::vector<std::int64_t>& lags,
                                           bool centered);

}  // namespace ltube
