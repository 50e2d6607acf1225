#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "ltube/analysis.hpp"
#include "ltube/errors.hpp"
#include "ltube/parallel.hpp"

namespace ltube {

//---------------------------------------------------------------------------//
// Curvature

A3Report check_A3(const CellConfig& cell, std::int64_t samples, Rng& rng) {
    A3Report r;
    std::set<int> scatterers;
    for (const Surface& s : cell.surfaces)
        if (!s.transparent()) scatterers.insert(s.id.scatterer);
    if (scatterers.empty() || samples <= 0) return r;

    const SectionSpec all = SectionSpec::D(cell.n, {scatterers.begin(), scatterers.end()});
    constexpr double inf = std::numeric_limits<double>::infinity();
    r.k_min = r.k_transverse_min = r.k_longitudinal_min = inf;
    r.k_max = r.k_transverse_max = r.k_longitudinal_max = -inf;
    while (r.samples < samples) {
        const SectionPoint p = sample_measure(cell, all, 1, rng).front();
        const Surface& s = cell.surfaces[static_cast<std::size_t>(p.surface_index)];
        std::pair<double, double> k;
        try {
            k = curvature_at(s, p.x.q);
        } catch (const EdgeProximity&) {
            continue;
        }
        ++r.samples;
        if (!s.dispersing) {
            ++r.flat_excluded;
            continue;
        }
        ++r.dispersing_samples;
        const auto [kt, kl] = k;
        r.k_transverse_min = std::min(r.k_transverse_min, kt);
        r.k_transverse_max = std::max(r.k_transverse_max, kt);
        r.k_longitudinal_min = std::min(r.k_longitudinal_min, kl);
        r.k_longitudinal_max = std::max(r.k_longitudinal_max, kl);
        r.k_min = std::min({r.k_min, kt, kl});
        r.k_max = std::max({r.k_max, kt, kl});
        if (!(kt > 0) || !(kl >= 0)) ++r.violations;
    }
    if (r.dispersing_samples == 0) r.k_min = r.k_max = r.k_transverse_min = r.k_transverse_max =
        r.k_longitudinal_min = r.k_longitudinal_max = 0;
    return r;
}

//---------------------------------------------------------------------------//
// Finite horizon and head-on collisions

namespace {

struct Reflection {
    double time;
    bool headon;
};

struct A4Partial {
    std::int64_t windows{0};
    std::int64_t headon_windows{0};
    std::int64_t max_count{0};
    std::int64_t restarts{0};
    std::vector<std::string> failures;
};

A4Partial a4_trajectory(const QuenchedTube& tube, std::int64_t id, std::int64_t n_windows, double L, double eps,
                        const A4Options& opt) {
    A4Partial out;
    Rng rng = Rng::for_stream(opt.seed, id);
    while (out.windows < n_windows) {
        FlowState s = make_state(tube, sample_free_element(tube, 0, rng));
        std::vector<Reflection> refl;
        std::size_t next_anchor = static_cast<std::size_t>(opt.stride);
        bool singular = false;
        while (out.windows < n_windows && !singular) {
            const CollisionEvent ev = next_event(tube, s);
            if (is_singular(ev.kind)) {
                singular = true;
                break;
            }
            s = ev.after;
            if (!is_reflection(ev.kind)) continue;
            const bool headon =
                ev.kind == EventKind::Dispersing && std::abs(ev.hit.cos_incidence) > eps;
            refl.push_back({ev.before.time, headon});
            // close every window whose end is now behind the clock
            while (next_anchor < refl.size() && refl[next_anchor].time + L < ev.before.time &&
                   out.windows < n_windows) {
                const double t0 = refl[next_anchor].time;
                std::int64_t count = 0;
                bool found = false;
                for (std::size_t k = next_anchor + 1; k < refl.size() && refl[k].time <= t0 + L; ++k) {
                    ++count;
                    if (refl[k].headon) found = true;
                }
                ++out.windows;
                if (found) {
                    ++out.headon_windows;
                } else if (out.failures.size() < 5) {
                    std::ostringstream os;
                    os << "trajectory " << id << ": no head-on collision in (" << t0 << ", " << t0 + L << "]";
                    out.failures.push_back(os.str());
                }
                out.max_count = std::max(out.max_count, count);
                next_anchor += static_cast<std::size_t>(opt.stride);
            }
        }
        if (singular) ++out.restarts;
    }
    return out;
}

}  // namespace

A4Report check_A4(const QuenchedTube& tube, std::int64_t n_trajectories, std::int64_t windows_per_traj,
                  const A4Options& options) {
    if (options.stride < 1) throw ConfigError("A4 window stride must be positive");
    const DerivedConstants& c = tube.constants();
    A4Report r;
    r.eps_used = c.eps;
    r.window_length = options.window.value_or(c.L);
    r.K3 = c.K3;
    std::vector<A4Partial> parts(static_cast<std::size_t>(std::max<std::int64_t>(n_trajectories, 0)));
    parallel_for(n_trajectories, options.workers, [&](std::int64_t i) {
        parts[static_cast<std::size_t>(i)] = a4_trajectory(tube, i, windows_per_traj, r.window_length, c.eps, options);
    });
    std::int64_t headon = 0;
    for (const A4Partial& p : parts) {
        r.windows += p.windows;
        headon += p.headon_windows;
        r.max_collisions_per_L = std::max(r.max_collisions_per_L, p.max_count);
        r.restarts += p.restarts;
        for (const std::string& f : p.failures)
            if (r.failures.size() < 20) r.failures.push_back(f);
    }
    r.headon_window_fraction = r.windows > 0 ? static_cast<double>(headon) / static_cast<double>(r.windows) : 0;
    return r;
}

//---------------------------------------------------------------------------//
// Singularity neighbourhoods

namespace {

constexpr std::int64_t kA6Budget = 1'000'000;

bool same_walk(const MWalk& a, const MWalk& b) { return a.status == b.status && a.itinerary == b.itinerary; }

// Probe of p moved by delta; nullopt when the probe leaves M_alpha.
std::optional<SectionPoint> surface_probe(const CellConfig& cell, const SectionPoint& p, int direction,
                                          double delta, double eps) {
    const Surface& s = cell.surfaces[static_cast<std::size_t>(p.surface_index)];
    const RevolutionPatch& r = *s.revolution();
    const Vec3 rel = p.x.q - r.axis_point;
    double sp = dot(rel, r.axis);
    const Vec3 w = rel - sp * r.axis;
    double phi = std::atan2(dot(w, r.e2), dot(w, r.e1));
    const double u = sp - r.s_center;
    if (direction == 0) {
        phi += delta / r.radius(u);
    } else {
        const double sl = r.slope(u);
        sp += delta / std::sqrt(1 + sl * sl);
    }
    if (sp < r.s_min || sp > r.s_max) return std::nullopt;
    const double rad = r.radius(sp - r.s_center);
    const Vec3 q = r.axis_point + sp * r.axis + rad * (std::cos(phi) * r.e1 + std::sin(phi) * r.e2);
    if (!cell.is_free(q + 1e-9 * surface_normal(s, q))) return std::nullopt;
    SectionPoint out = surface_point(cell, SectionKind::M, p.surface_index, q, p.x.v);
    if (out.cos_out < eps) return std::nullopt;
    return out;
}

std::optional<SectionPoint> velocity_probe(const CellConfig& cell, const SectionPoint& p, int direction,
                                           double delta, double eps) {
    const Surface& s = cell.surfaces[static_cast<std::size_t>(p.surface_index)];
    const Vec3 n = surface_normal(s, p.x.q);
    const Vec3 v = p.x.v;
    Vec3 u1 = reject(n, v);
    u1 = norm(u1) > 1e-12 ? normalized(u1) : any_orthogonal(v);
    const Vec3 u = direction == 0 ? u1 : cross(v, u1);
    const Vec3 v2 = normalized(std::cos(delta) * v + std::sin(delta) * u);
    SectionPoint out = surface_point(cell, SectionKind::M, p.surface_index, p.x.q, v2);
    if (out.cos_out < eps) return std::nullopt;
    return out;
}

}  // namespace

std::vector<A6Row> check_A6(const QuenchedTube& tube, std::int64_t cell_index, int scatterer,
                            const std::vector<double>& deltas, const A6Options& options) {
    std::vector<A6Row> rows;
    for (double d : deltas) {
        if (!(d > 0)) throw ConfigError("A6 deltas must be positive");
        A6Row row;
        row.delta = d;
        rows.push_back(row);
    }
    const CellConfig& cell = tube.cell(cell_index);
    bool present = false;
    for (int i : cell.dispersing())
        if (cell.surfaces[static_cast<std::size_t>(i)].id.scatterer == scatterer) present = true;
    if (!present || options.samples <= 0) return rows;

    const double eps = tube.constants().eps;
    const SectionSpec spec = SectionSpec::M(cell_index, scatterer, eps);
    const double measure = section_measure(tube, spec, options.area_resolution);

    constexpr std::int64_t kChunk = 1000;
    const std::int64_t chunks = (options.samples + kChunk - 1) / kChunk;
    std::vector<std::vector<std::int64_t>> hits(static_cast<std::size_t>(chunks),
                                                std::vector<std::int64_t>(deltas.size(), 0));
    parallel_for(chunks, options.workers, [&](std::int64_t c) {
        Rng rng = Rng::for_stream(options.seed, c);
        const std::int64_t count = std::min(kChunk, options.samples - c * kChunk);
        const std::vector<SectionPoint> pts = sample_measure(tube, spec, count, rng);
        for (const SectionPoint& p : pts) {
            const MWalk base = walk_M(tube, p, eps, kA6Budget, true);
            for (std::size_t k = 0; k < deltas.size(); ++k) {
                bool differs = base.status != ReturnStatus::Returned;
                for (int probe = 0; probe < 8 && !differs; ++probe) {
                    const double d = (probe % 2 == 0) ? deltas[k] : -deltas[k];
                    const int dir = (probe / 2) % 2;
                    const std::optional<SectionPoint> q = probe < 4 ? surface_probe(cell, p, dir, d, eps)
                                                                    : velocity_probe(cell, p, dir, d, eps);
                    if (!q) {
                        differs = true;
                        break;
                    }
                    differs = !same_walk(base, walk_M(tube, *q, eps, kA6Budget, true));
                }
                if (differs) ++hits[static_cast<std::size_t>(c)][k];
            }
        }
    });
    for (std::size_t k = 0; k < deltas.size(); ++k) {
        A6Row& row = rows[k];
        row.samples = options.samples;
        for (const auto& h : hits) row.in_neighborhood += h[k];
        row.measure_estimate =
            static_cast<double>(row.in_neighborhood) / static_cast<double>(row.samples) * measure;
        row.ratio = row.measure_estimate / row.delta;
    }
    return rows;
}

double ratio_spread(const std::vector<A6Row>& rows) {
    if (rows.empty()) return 1;
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0;
    for (const A6Row& r : rows) {
        lo = std::min(lo, r.ratio);
        hi = std::max(hi, r.ratio);
    }
    if (hi == 0) return 1;
    if (lo == 0) return std::numeric_limits<double>::infinity();
    return hi / lo;
}

}  // namespace ltube
