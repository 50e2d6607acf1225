#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ltube/tube.hpp"

namespace ltube::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitParse = 2;
inline constexpr int kExitGeometry = 3;
inline constexpr int kExitCheck = 4;

/// Tube selection shared by every command: a config file, then a preset,
/// then individual overrides.
struct TubeOptions {
    std::string config_path;
    std::string preset;
    std::optional<double> h, g, rho, r_long, hole_side, hole_u, hole_v, perturbation;
    std::optional<std::uint64_t> tube_seed;
    bool no_validate{false};
};

struct CommonOptions {
    TubeOptions tube;
    std::uint64_t seed{1};
    int workers{1};
    std::string out{"."};
};

TubeConfig resolve_tube(const TubeOptions& o);

struct SimulateOptions {
    std::int64_t collisions{100};
    std::optional<double> max_time;
    std::vector<double> q;  // world position (3 values) or empty
    std::vector<double> v;
};

struct RecurrenceOptions {
    std::int64_t orbits{100};  // per quenched tube
    std::int64_t tubes{10};
    std::int64_t n_max{10'000};
    std::int64_t drift_horizon{100};
    double band_sigmas{3.0};
};

struct LyapunovOptionsCli {
    std::int64_t events{10'000};
    std::int64_t orbits{10};
    std::string method{"both"};
    double confidence{0.99};
    double agreement{0.05};
};

struct CheckOptions {
    std::vector<std::string> which;
    std::int64_t samples{0};  // 0: per-check default
    std::int64_t trajectories{100};
    std::int64_t windows{100};
    std::int64_t stride{100};
    std::vector<double> deltas{1e-2, 1e-3, 1e-4};
    double spread{2.0};
    std::int64_t cell{0};
    int scatterer{0};
    std::string map{"poincare-n"};
    int permutations{199};
    int directions{32};
    double alpha{0.01};
    std::int64_t orbits{100};
    std::int64_t collisions{100};
    double point_tolerance{1e-9};
    double identity_tolerance{1e-12};
};

int cmd_simulate(const CommonOptions& c, const SimulateOptions& o);
int cmd_recurrence(const CommonOptions& c, const RecurrenceOptions& o);
int cmd_lyapunov(const CommonOptions& c, const LyapunovOptionsCli& o);
int cmd_check(const CommonOptions& c, const CheckOptions& o);
int cmd_constants(const CommonOptions& c);

}  // namespace ltube::cli
