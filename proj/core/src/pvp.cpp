#include "ltube/pvp.hpp"

#include <cmath>

#include "json.hpp"

#include "ltube/errors.hpp"
#include "ltube/parallel.hpp"

namespace ltube {

const char* to_string(CocycleEnd e) {
    switch (e) {
        case CocycleEnd::Budget: return "Budget";
        case CocycleEnd::FirstZero: return "FirstZero";
        case CocycleEnd::Singular: return "Singular";
        case CocycleEnd::NotExited: return "NotExited";
    }
    return "?";
}

CellReturn R_omega(const QuenchedTube& tube, std::int64_t cell_index, const LineElement& x, int gate,
                   std::int64_t budget) {
    const CellConfig& cell = tube.cell(cell_index);
    const SectionReturn r = poincare_N(tube, gate_point(cell, gate, x), budget);
    CellReturn out;
    out.x = r.point.x;
    out.gate = r.point.gate();
    out.exit = r.exit_sign;
    out.collisions = r.collisions;
    out.time = r.time;
    return out;
}

PvpState F_step(const QuenchedTube& tube, const PvpState& s, int* exit, std::int64_t budget) {
    const CellReturn r = R_omega(tube, s.env_offset, s.x, s.gate, budget);
    if (exit) *exit = r.exit;
    return {r.x, r.gate, s.env_offset + r.exit};
}

CocycleRecord cocycle_from_exits(const std::vector<int>& exits) {
    CocycleRecord rec;
    rec.sums.push_back(0);
    for (int e : exits) {
        rec.exits.push_back(e);
        rec.sums.push_back(rec.sums.back() + e);
        if (!rec.first_zero && rec.sums.back() == 0) rec.first_zero = rec.steps();
    }
    return rec;
}

CocycleRecord cocycle(const QuenchedTube& tube, const PvpState& x0, std::int64_t n_max,
                      const CocycleOptions& options) {
    CocycleRecord rec;
    rec.sums.push_back(0);
    PvpState s = x0;
    for (std::int64_t n = 0; n < n_max; ++n) {
        if (options.stop_at_first_zero && rec.first_zero && n >= options.min_steps) {
            rec.end = CocycleEnd::FirstZero;
            return rec;
        }
        int e = 0;
        try {
            s = F_step(tube, s, &e, options.cell_budget);
        } catch (const SingularOrbit&) {
            rec.end = CocycleEnd::Singular;
            return rec;
        } catch (const NotExited&) {
            rec.end = CocycleEnd::NotExited;
            return rec;
        }
        rec.exits.push_back(e);
        rec.sums.push_back(rec.sums.back() + e);
        if (!rec.first_zero && rec.sums.back() == 0) rec.first_zero = rec.steps();
    }
    rec.end = options.stop_at_first_zero && rec.first_zero ? CocycleEnd::FirstZero : CocycleEnd::Budget;
    return rec;
}

PvpState sample_pvp_state(const QuenchedTube& tube, Rng& rng) {
    const SectionPoint p = sample_measure(tube, SectionSpec::N(0), 1, rng).front();
    return {p.x, p.gate(), 0};
}

double RecurrenceReport::return_fraction_at(std::int64_t n) const {
    if (records.empty()) return 0;
    std::int64_t hit = 0;
    for (const OrbitRecord& r : records) {
        if (r.first_zero && *r.first_zero <= n) ++hit;
    }
    return static_cast<double>(hit) / static_cast<double>(records.size());
}

RecurrenceReport recurrence_ensemble(const RecurrenceConfig& config) {
    if (config.tube_seeds.empty() || config.orbits_per_tube < 1)
        throw ConfigError("recurrence ensemble needs at least one tube and one orbit");
    std::vector<std::unique_ptr<QuenchedTube>> tubes;
    for (std::uint64_t seed : config.tube_seeds) {
        TubeConfig tc = config.tube;
        tc.seed = seed;
        tubes.push_back(std::make_unique<QuenchedTube>(tc));
    }

    const std::int64_t per = config.orbits_per_tube;
    const std::int64_t total = per * static_cast<std::int64_t>(tubes.size());
    const std::int64_t horizon = std::min(config.n_max, config.drift_horizon);
    std::vector<OrbitRecord> records(static_cast<std::size_t>(total));

    parallel_for(total, config.workers, [&](std::int64_t id) {
        const QuenchedTube& tube = *tubes[static_cast<std::size_t>(id / per)];
        Rng rng = Rng::for_stream(config.master_seed, id);
        const PvpState x0 = sample_pvp_state(tube, rng);
        CocycleOptions opt;
        opt.stop_at_first_zero = true;
        opt.min_steps = horizon;
        const CocycleRecord c = cocycle(tube, x0, config.n_max, opt);

        OrbitRecord& r = records[static_cast<std::size_t>(id)];
        r.seed = tube.config().seed;
        r.orbit = id % per;
        r.first_zero = c.first_zero;
        r.n_max = config.n_max;
        r.steps = c.steps();
        r.end = c.end;
        if (horizon > 0 && c.steps() >= horizon) r.s_horizon = c.sums[static_cast<std::size_t>(horizon)];
    });

    RecurrenceReport rep;
    rep.orbits = total;
    rep.n_max = config.n_max;
    rep.horizon = horizon;
    double sum = 0;
    double sum2 = 0;
    for (const OrbitRecord& r : records) {
        if (r.first_zero) rep.histogram[*r.first_zero] += 1;
        if (r.end == CocycleEnd::NotExited) ++rep.not_exited;
        if (r.end == CocycleEnd::Singular) ++rep.singular;
        if (r.s_horizon) {
            const double sh = static_cast<double>(*r.s_horizon);
            sum += sh;
            sum2 += sh * sh;
            ++rep.drift_samples;
        }
    }
    rep.records = std::move(records);
    rep.return_fraction = rep.return_fraction_at(config.n_max);
    if (rep.drift_samples > 0 && horizon > 0) {
        const double n = static_cast<double>(rep.drift_samples);
        const double h = static_cast<double>(horizon);
        rep.drift = sum / n / h;
        rep.drift_band = config.band_sigmas * std::sqrt(sum2 / n) / (h * std::sqrt(n));
        rep.drift_ok = std::abs(rep.drift) <= rep.drift_band;
    }
    return rep;
}

std::string to_json(const RecurrenceReport& r, int indent) {
    using nlohmann::json;
    json hist = json::array();
    for (const auto& [n, count] : r.histogram) hist.push_back({{"n", n}, {"count", count}});
    const json j{{"orbits", r.orbits},
                 {"n_max", r.n_max},
                 {"return_fraction", r.return_fraction},
                 {"histogram", hist},
                 {"drift",
                  {{"horizon", r.horizon},
                   {"samples", r.drift_samples},
                   {"estimate", r.drift},
                   {"band", r.drift_band},
                   {"within_band", r.drift_ok}}},
                 {"not_exited", r.not_exited},
                 {"singular", r.singular}};
    return j.dump(indent);
}

void write_orbit_csv(std::ostream& os, const std::vector<OrbitRecord>& records) {
    os << "seed,orbit,first_zero,n_max,steps,termination\n";
    for (const OrbitRecord& r : records) {
        os << r.seed << ',' << r.orbit << ',';
        if (r.first_zero) os << *r.first_zero;
        os << ',' << r.n_max << ',' << r.steps << ',' << to_string(r.end) << '\n';
    }
}

}  // namespace ltube
