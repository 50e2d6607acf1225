#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "ltube/sections.hpp"
#include "ltube/tube.hpp"

namespace ltube {

/// In-cell reflection budget of one cell passage.
inline constexpr std::int64_t kCellBudget = 1'000'000;

/// State of the point-of-view-of-the-particle system: an element entering
/// the reference cell through gate 1 or 2 (cell-local coordinates) and the
/// shift of the quenched sequence.
struct PvpState {
    LineElement x;
    int gate{1};
    std::int64_t env_offset{0};
};

struct CellReturn {
    LineElement x;  // entering element in the reference-cell frame
    int gate{1};    // gate it enters through
    int exit{0};    // +1 through gate 2, -1 through gate 1
    std::int64_t collisions{0};
    double time{0};
};

/// Traces the element x entering cell `cell_index` through `gate` until it
/// first crosses a gate; the crossing element is returned shifted back by
/// one cell together with the exit sign. Throws SingularOrbit or NotExited.
CellReturn R_omega(const QuenchedTube& tube, std::int64_t cell_index, const LineElement& x, int gate,
                   std::int64_t budget = kCellBudget);

/// One step of the PVP map: R evaluated in cell env_offset, then the
/// environment shifted by the exit sign.
PvpState F_step(const QuenchedTube& tube, const PvpState& s, int* exit = nullptr,
                std::int64_t budget = kCellBudget);

enum class CocycleEnd { Budget, FirstZero, Singular, NotExited };

const char* to_string(CocycleEnd e);

struct CocycleRecord {
    std::vector<int> exits;
    std::vector<std::int64_t> sums;  // S_0 .. S_n
    std::optional<std::int64_t> first_zero;
    CocycleEnd end{CocycleEnd::Budget};

    std::int64_t steps() const { return static_cast<std::int64_t>(exits.size()); }
};

struct CocycleOptions {
    /// Stop once S_n = 0, but never before `min_steps` steps.
    bool stop_at_first_zero{false};
    std::int64_t min_steps{0};
    std::int64_t cell_budget{kCellBudget};
};

/// Cocycle S_n = sum of exit signs along the PVP orbit of x0.
CocycleRecord cocycle(const QuenchedTube& tube, const PvpState& x0, std::int64_t n_max,
                      const CocycleOptions& options = {});

/// Cocycle bookkeeping from a list of exits.
CocycleRecord cocycle_from_exits(const std::vector<int>& exits);

struct OrbitRecord {
    std::uint64_t seed{0};
    std::int64_t orbit{0};
    std::optional<std::int64_t> first_zero;
    std::int64_t n_max{0};
    std::int64_t steps{0};
    CocycleEnd end{CocycleEnd::Budget};
    std::optional<std::int64_t> s_horizon;  // S_H at the drift horizon
};

struct RecurrenceConfig {
    TubeConfig tube;  // seed is replaced per quenched realization
    std::vector<std::uint64_t> tube_seeds{1};
    std::int64_t orbits_per_tube{1};
    std::int64_t n_max{0};
    std::uint64_t master_seed{0};
    int workers{1};
    /// Horizon H of the drift estimate mean(S_H)/H (capped by n_max).
    std::int64_t drift_horizon{100};
    double band_sigmas{3.0};
};

struct RecurrenceReport {
    std::int64_t orbits{0};
    std::int64_t n_max{0};
    double return_fraction{0};
    std::map<std::int64_t, std::int64_t> histogram;  // first_zero -> count
    std::int64_t horizon{0};
    std::int64_t drift_samples{0};
    double drift{0};
    double drift_band{0};
    bool drift_ok{true};
    std::int64_t not_exited{0};
    std::int64_t singular{0};
    std::vector<OrbitRecord> records;

    /// Fraction of orbits with first_zero <= n; non-decreasing in n.
    double return_fraction_at(std::int64_t n) const;
};

/// Draws one mu_0 point of the reference-cell gates.
PvpState sample_pvp_state(const QuenchedTube& tube, Rng& rng);

RecurrenceReport recurrence_ensemble(const RecurrenceConfig& config);

std::string to_json(const RecurrenceReport& r, int indent = 2);
void write_orbit_csv(std::ostream& os, const std::vector<OrbitRecord>& records);

}  // namespace ltube
