#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "ltube/analysis.hpp"
#include "ltube/errors.hpp"
#include "ltube/parallel.hpp"
#include "ltube/pvp.hpp"

namespace ltube {

const char* to_string(InvarianceMap m) {
    switch (m) {
        case InvarianceMap::Identity: return "identity";
        case InvarianceMap::PoincareN: return "poincare-n";
        case InvarianceMap::FStep: return "f-step";
    }
    return "?";
}

InvarianceMap parse_invariance_map(const std::string& s) {
    if (s == "identity") return InvarianceMap::Identity;
    if (s == "poincare-n") return InvarianceMap::PoincareN;
    if (s == "f-step") return InvarianceMap::FStep;
    throw ConfigError("unknown map '" + s + "' (expected identity, poincare-n or f-step)");
}

SectionCoords section_coords(const SectionPoint& p) {
    return {p.x.q.y, p.x.q.z, p.x.v.x, p.x.v.y, p.x.v.z};
}

namespace {

constexpr std::int64_t kChunk = 1000;
constexpr std::uint64_t kPushStream = 0x70757368ULL;

template <class Fn>
std::vector<SectionCoords> chunked(std::int64_t n, std::uint64_t seed, int workers, Fn&& per_chunk) {
    const std::int64_t chunks = (n + kChunk - 1) / kChunk;
    std::vector<std::vector<SectionCoords>> parts(static_cast<std::size_t>(std::max<std::int64_t>(chunks, 0)));
    parallel_for(chunks, workers, [&](std::int64_t c) {
        Rng rng = Rng::for_stream(seed, c);
        parts[static_cast<std::size_t>(c)] = per_chunk(std::min(kChunk, n - c * kChunk), rng);
    });
    std::vector<SectionCoords> out;
    for (auto& p : parts) out.insert(out.end(), p.begin(), p.end());
    return out;
}

}  // namespace

std::vector<SectionCoords> fresh_samples(const QuenchedTube& tube, std::int64_t n, std::uint64_t seed, bool biased) {
    return chunked(n, seed, 1, [&](std::int64_t count, Rng& rng) {
        std::vector<SectionCoords> out;
        for (SectionPoint p : sample_measure(tube, SectionSpec::N(0), count, rng)) {
            if (biased) {
                const Vec3 n_in{p.gate() == 1 ? 1.0 : -1.0, 0, 0};
                p.x.v = uniform_hemisphere(n_in, rng);
            }
            out.push_back(section_coords(p));
        }
        return out;
    });
}

std::vector<SectionCoords> pushforward_samples(const QuenchedTube& tube, InvarianceMap map, std::int64_t n,
                                               std::uint64_t seed, int workers, std::int64_t* dropped) {
    std::vector<std::int64_t> lost(static_cast<std::size_t>((n + kChunk - 1) / kChunk), 0);
    std::vector<SectionCoords> out = chunked(n, seed, workers, [&](std::int64_t count, Rng& rng) {
        std::vector<SectionCoords> part;
        for (const SectionPoint& p : sample_measure(tube, SectionSpec::N(0), count, rng)) {
            try {
                switch (map) {
                    case InvarianceMap::Identity: part.push_back(section_coords(p)); break;
                    case InvarianceMap::PoincareN: part.push_back(section_coords(poincare_N(tube, p).point)); break;
                    case InvarianceMap::FStep: {
                        const PvpState s = F_step(tube, {p.x, p.gate(), 0});
                        part.push_back(section_coords(gate_point(tube.cell(0), s.gate, s.x)));
                        break;
                    }
                }
            } catch (const SingularOrbit&) {
            } catch (const NotExited&) {
            }
        }
        return part;
    });
    if (dropped) *dropped = n - static_cast<std::int64_t>(out.size());
    return out;
}

InvarianceResult energy_two_sample_test(const std::vector<SectionCoords>& a, const std::vector<SectionCoords>& b,
                                        const InvarianceOptions& options) {
    InvarianceResult res;
    const std::size_t na = a.size();
    const std::size_t nb = b.size();
    const std::size_t n = na + nb;
    res.samples = static_cast<std::int64_t>(std::min(na, nb));
    if (na < 2 || nb < 2) throw ConfigError("energy test needs at least two points per sample");
    if (options.directions < 1 || options.permutations < 1) throw ConfigError("energy test needs directions and permutations");

    // pooled standardization
    constexpr int D = 5;
    std::array<double, D> mean{}, sd{};
    auto at = [&](std::size_t i) -> const SectionCoords& { return i < na ? a[i] : b[i - na]; };
    for (std::size_t i = 0; i < n; ++i)
        for (int k = 0; k < D; ++k) mean[k] += at(i)[k];
    for (double& m : mean) m /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
        for (int k = 0; k < D; ++k) sd[k] += (at(i)[k] - mean[k]) * (at(i)[k] - mean[k]);
    for (double& s : sd) s = std::sqrt(s / static_cast<double>(n - 1));

    Rng rng(options.seed ^ 0x656E65726779ULL);
    struct Slice {
        std::vector<std::uint32_t> order;
        std::vector<double> gaps;  // gap after each sorted point
    };
    std::vector<Slice> slices(static_cast<std::size_t>(options.directions));
    std::vector<std::array<double, D>> dirs;
    for (int d = 0; d < options.directions; ++d) {
        std::array<double, D> w{};
        double len = 0;
        for (double& x : w) {
            x = rng.normal();
            len += x * x;
        }
        for (double& x : w) x /= std::sqrt(len);
        dirs.push_back(w);
    }
    parallel_for(options.directions, options.workers, [&](std::int64_t d) {
        const auto& w = dirs[static_cast<std::size_t>(d)];
        std::vector<double> proj(n);
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0;
            for (int k = 0; k < D; ++k) s += w[k] * (sd[k] > 0 ? (at(i)[k] - mean[k]) / sd[k] : 0.0);
            proj[i] = s;
        }
        Slice& sl = slices[static_cast<std::size_t>(d)];
        sl.order.resize(n);
        std::iota(sl.order.begin(), sl.order.end(), 0u);
        std::sort(sl.order.begin(), sl.order.end(), [&](std::uint32_t x, std::uint32_t y) { return proj[x] < proj[y]; });
        sl.gaps.resize(n);
        for (std::size_t i = 0; i + 1 < n; ++i) sl.gaps[i] = proj[sl.order[i + 1]] - proj[sl.order[i]];
        sl.gaps[n - 1] = 0;
    });

    // 1D energy distance 2 * int (F_a - F_b)^2 averaged over slices
    auto statistic = [&](const std::vector<std::uint8_t>& in_a) {
        double total = 0;
        for (const Slice& sl : slices) {
            double ca = 0, cb = 0, e = 0;
            for (std::size_t i = 0; i + 1 < n; ++i) {
                if (in_a[sl.order[i]]) {
                    ca += 1;
                } else {
                    cb += 1;
                }
                const double diff = ca / static_cast<double>(na) - cb / static_cast<double>(nb);
                e += diff * diff * sl.gaps[i];
            }
            total += 2 * e;
        }
        return total / static_cast<double>(slices.size());
    };

    std::vector<std::uint8_t> labels(n, 0);
    std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(na), 1);
    res.statistic = statistic(labels);

    std::vector<double> null(static_cast<std::size_t>(options.permutations));
    parallel_for(options.permutations, options.workers, [&](std::int64_t p) {
        Rng prng = Rng::for_stream(options.seed ^ 0x7065726DULL, p);
        std::vector<std::uint8_t> perm = labels;
        for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[prng.bits() % (i + 1)]);
        null[static_cast<std::size_t>(p)] = statistic(perm);
    });
    std::int64_t exceed = 0;
    for (double x : null)
        if (x >= res.statistic) ++exceed;
    res.p_value = static_cast<double>(1 + exceed) / static_cast<double>(options.permutations + 1);
    std::sort(null.begin(), null.end());
    const std::size_t qi =
        std::min(null.size() - 1, static_cast<std::size_t>(std::ceil((1 - options.alpha) * static_cast<double>(null.size()))) - 1);
    res.threshold = null[qi];
    res.pass = res.p_value > options.alpha;
    return res;
}

InvarianceResult measure_invariance_test(const QuenchedTube& tube, InvarianceMap map, std::int64_t n_samples,
                                         const InvarianceOptions& options) {
    if (n_samples < 2) throw ConfigError("invariance test needs at least two samples");
    const std::vector<SectionCoords> fresh = fresh_samples(tube, n_samples, options.seed, options.biased_reference);
    std::int64_t dropped = 0;
    const std::vector<SectionCoords> image =
        pushforward_samples(tube, map, n_samples, options.seed ^ kPushStream, options.workers, &dropped);
    InvarianceResult r = energy_two_sample_test(fresh, image, options);
    r.dropped = dropped;
    return r;
}

}  // namespace ltube
