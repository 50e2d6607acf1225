#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ltube/analysis.hpp"
#include "ltube/errors.hpp"

namespace ltube {

TransverseFrame transverse_frame(const LineElement& x) {
    TransverseFrame f;
    f.base = x;
    f.basis[0] = any_orthogonal(x.v);
    f.basis[1] = cross(x.v, f.basis[0]);
    return f;
}

void tangent_flight(TangentVector& t, double tau) { t.dq += tau * t.dv; }

void tangent_collision(TangentVector& t, const Vec3& v_in, const Vec3& n, const Mat3& W) {
    const double vn = dot(v_in, n);
    const double dt = -dot(t.dq, n) / vn;
    const Vec3 dp = t.dq + dt * v_in;
    const Vec3 dn = W * dp;
    const Vec3 v_out = reflect(v_in, n);
    t.dq = t.dq - (2 * dot(t.dq, n)) * n;
    t.dv = t.dv - (2 * dot(t.dv, n)) * n - 2 * (dot(v_in, dn) * n + vn * dn);
    t.dq = reject(t.dq, v_out);
    t.dv = reject(t.dv, v_out);
}

const char* to_string(LyapunovMethod m) { return m == LyapunovMethod::Tangent ? "tangent" : "shadow"; }

LyapunovMethod parse_lyapunov_method(const std::string& s) {
    if (s == "tangent") return LyapunovMethod::Tangent;
    if (s == "shadow") return LyapunovMethod::Shadow;
    throw ConfigError("unknown Lyapunov method '" + s + "' (expected tangent or shadow)");
}

LineElement sample_free_element(const QuenchedTube& tube, std::int64_t n, Rng& rng) {
    const CellConfig& cell = tube.cell(n);
    for (int attempt = 0; attempt < 10'000'000; ++attempt) {
        const Vec3 q{rng.uniform(0, cell.h()), rng.uniform(), rng.uniform()};
        if (!cell.is_free(q)) continue;
        return {{q.x + static_cast<double>(n) * cell.h(), q.y, q.z}, rng.unit_vector()};
    }
    throw InvalidGeometry("cell has no free region");
}

namespace {

double dot6(const TangentVector& a, const TangentVector& b) { return dot(a.dq, b.dq) + dot(a.dv, b.dv); }

void scale(TangentVector& a, double s) {
    a.dq *= s;
    a.dv *= s;
}

void axpy(TangentVector& b, double c, const TangentVector& a) {
    b.dq += c * a.dq;
    b.dv += c * a.dv;
}

// Random orthonormal pair in the transverse space of v.
std::array<TangentVector, 2> random_pair(const Vec3& v, Rng& rng) {
    std::array<TangentVector, 2> t;
    for (TangentVector& a : t) a = {reject(rng.unit_vector(), v), reject(rng.unit_vector(), v)};
    scale(t[0], 1 / std::sqrt(dot6(t[0], t[0])));
    axpy(t[1], -dot6(t[0], t[1]), t[0]);
    scale(t[1], 1 / std::sqrt(dot6(t[1], t[1])));
    return t;
}

Mat3 shape_at(const CellConfig& cell, const CollisionEvent& ev) {
    if (ev.kind != EventKind::Dispersing) return Mat3{};
    return shape_operator(cell.surfaces[static_cast<std::size_t>(ev.surface_index)], ev.hit.point);
}

struct Accumulator {
    std::int64_t block_events;
    std::int64_t running_every;
    LyapunovBlock current;
    std::int64_t in_block{0};
    double total_log1{0};
    double total_time{0};
    LyapunovResult* out;

    void add(double log1, double log2, double dt) {
        current.log1 += log1;
        current.log2 += log2;
        current.time += dt;
        total_log1 += log1;
        total_time += dt;
    }
    void tick() {
        ++out->events;
        if (++in_block == block_events) {
            out->blocks.push_back(current);
            current = {};
            in_block = 0;
        }
        if (running_every > 0 && out->events % running_every == 0 && total_time > 0)
            out->running.emplace_back(out->events, total_log1 / total_time);
    }
};

void run_tangent(const QuenchedTube& tube, FlowState s, std::int64_t n_events, Rng& rng, Accumulator& acc) {
    auto t = random_pair(s.x.v, rng);
    while (acc.out->events < n_events) {
        const CellConfig& cell = tube.cell(s.cell);
        const CollisionEvent ev = next_event(cell, s);
        if (is_singular(ev.kind)) {
            ++acc.out->restarts;
            s = make_state(tube, sample_free_element(tube, s.cell, rng));
            t = random_pair(s.x.v, rng);
            continue;
        }
        const double tau = ev.before.time - s.time;
        for (TangentVector& a : t) tangent_flight(a, tau);
        if (is_reflection(ev.kind)) {
            const Mat3 W = shape_at(cell, ev);
            for (TangentVector& a : t) tangent_collision(a, ev.before.x.v, ev.hit.normal, W);
        }
        s = ev.after;
        const double r11 = std::sqrt(dot6(t[0], t[0]));
        scale(t[0], 1 / r11);
        axpy(t[1], -dot6(t[0], t[1]), t[0]);
        const double r22 = std::sqrt(dot6(t[1], t[1]));
        scale(t[1], 1 / r22);
        acc.add(std::log(r11), std::log(r22), tau);
        acc.tick();
    }
    acc.out->time = s.time;
}

// Advances a state by the flow to absolute time t_target. Returns false on a
// singular event.
bool flow_to(const QuenchedTube& tube, FlowState& s, double t_target) {
    for (int guard = 0; guard < 100'000; ++guard) {
        const CollisionEvent ev = next_event(tube, s);
        if (ev.before.time > t_target) {
            s = advance(s, t_target - s.time);
            return true;
        }
        if (is_singular(ev.kind)) return false;
        s = ev.after;
    }
    return false;
}

void run_shadow(const QuenchedTube& tube, FlowState s, std::int64_t n_events, Rng& rng,
                const LyapunovOptions& opt, Accumulator& acc) {
    const double h = tube.h();
    const double off = opt.shadow_offset;

    auto place = [&](const FlowState& ref, const TangentVector& dir) {
        FlowState sh = ref;
        sh.x.q = ref.x.q + off * dir.dq;
        sh.x.v = normalized(ref.x.v + off * dir.dv);
        sh.last_surface = -1;
        return sh;
    };

    TangentVector dir = random_pair(s.x.v, rng)[0];
    FlowState shadow = place(s, dir);
    double t_prev = s.time;
    while (acc.out->events < n_events) {
        const CellConfig& cell = tube.cell(s.cell);
        const CollisionEvent ev = next_event(cell, s);
        if (is_singular(ev.kind)) {
            ++acc.out->restarts;
            s = make_state(tube, sample_free_element(tube, s.cell, rng));
            dir = random_pair(s.x.v, rng)[0];
            shadow = place(s, dir);
            t_prev = s.time;
            continue;
        }
        const double t_mid = 0.5 * (s.time + ev.before.time);
        const FlowState ref_mid = advance(s, t_mid - s.time);
        s = ev.after;

        const bool ok = flow_to(tube, shadow, t_mid);
        double d = std::numeric_limits<double>::infinity();
        TangentVector diff;
        if (ok) {
            diff.dq = reject(shadow.world_q(h) - ref_mid.world_q(h), ref_mid.x.v);
            diff.dv = shadow.x.v - ref_mid.x.v;
            d = std::sqrt(dot6(diff, diff));
        }
        if (!(d <= opt.shadow_discard) || d == 0) {
            ++acc.out->discarded;
            acc.add(0, 0, 0);
        } else {
            scale(diff, 1 / d);
            dir = diff;
            acc.add(std::log(d / off), 0, t_mid - t_prev);
        }
        shadow = place(ref_mid, dir);
        t_prev = t_mid;
        acc.tick();
    }
    acc.out->time = s.time;
}

double quantile(std::vector<double>& v, double p) {
    std::sort(v.begin(), v.end());
    const double pos = p * static_cast<double>(v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

// Ratio estimates and percentile bootstrap over blocks.
void summarize(LyapunovResult& r, const LyapunovOptions& opt) {
    const std::vector<LyapunovBlock>& b = r.blocks;
    double l1 = 0, l2 = 0, t = 0;
    for (const LyapunovBlock& x : b) {
        l1 += x.log1;
        l2 += x.log2;
        t += x.time;
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    r.lambda1 = t > 0 ? l1 / t : nan;
    r.lambda2 = r.method == LyapunovMethod::Shadow ? nan : (t > 0 ? l2 / t : nan);
    if (b.size() < 2) {
        r.ci1 = {r.lambda1, r.lambda1};
        r.ci2 = {r.lambda2, r.lambda2};
        return;
    }
    Rng rng(opt.bootstrap_seed);
    std::vector<double> e1, e2;
    for (std::int64_t k = 0; k < opt.bootstrap_resamples; ++k) {
        double s1 = 0, s2 = 0, st = 0;
        for (std::size_t i = 0; i < b.size(); ++i) {
            const LyapunovBlock& x = b[static_cast<std::size_t>(rng.bits() % b.size())];
            s1 += x.log1;
            s2 += x.log2;
            st += x.time;
        }
        if (st <= 0) continue;
        e1.push_back(s1 / st);
        e2.push_back(s2 / st);
    }
    const double a = (1 - opt.confidence) / 2;
    r.ci1 = {quantile(e1, a), quantile(e1, 1 - a)};
    if (r.method == LyapunovMethod::Shadow) {
        r.ci2 = {nan, nan};
    } else {
        r.ci2 = {quantile(e2, a), quantile(e2, 1 - a)};
    }
}

}  // namespace

LyapunovResult lyapunov_spectrum(const QuenchedTube& tube, const LineElement& x0, std::int64_t n_events,
                                 LyapunovMethod method, Rng& rng, const LyapunovOptions& options) {
    if (n_events < 1) throw ConfigError("Lyapunov run needs at least one event");
    if (options.block_events < 1) throw ConfigError("Lyapunov block length must be positive");
    LyapunovResult r;
    r.method = method;
    Accumulator acc{options.block_events, options.running_every, {}, 0, 0, 0, &r};
    const FlowState s = make_state(tube, x0);
    if (method == LyapunovMethod::Tangent) {
        run_tangent(tube, s, n_events, rng, acc);
    } else {
        run_shadow(tube, s, n_events, rng, options, acc);
    }
    if (acc.in_block > 0) r.blocks.push_back(acc.current);
    summarize(r, options);
    return r;
}

LyapunovResult combine_lyapunov(const std::vector<LyapunovResult>& runs, const LyapunovOptions& options) {
    LyapunovResult r;
    if (runs.empty()) return r;
    r.method = runs.front().method;
    for (const LyapunovResult& x : runs) {
        r.blocks.insert(r.blocks.end(), x.blocks.begin(), x.blocks.end());
        r.events += x.events;
        r.time += x.time;
        r.restarts += x.restarts;
        r.discarded += x.discarded;
    }
    summarize(r, options);
    return r;
}

ExpansionResult expansion_factor(const QuenchedTube& tube, const SectionPoint& p, std::int64_t k_returns,
                                 double eps) {
    ExpansionResult out;
    out.history.push_back(1.0);
    if (k_returns <= 0) return out;

    FlowState s = p.state();
    const TransverseFrame frame = transverse_frame(p.x);
    std::array<TangentVector, 2> t{TangentVector{frame.basis[0], {}}, TangentVector{frame.basis[1], {}}};
    // Accumulated upper-triangular factor R (scaled by exp(log_scale)) of the
    // position-metric Gram-Schmidt; det R is tracked separately in logs.
    double R[2][2] = {{1, 0}, {0, 1}};
    double log_scale = 0;
    double log_det = 0;

    std::int64_t returns = 0;
    for (std::int64_t events = 0; returns < k_returns; ++events) {
        if (events > 10'000'000) throw SingularOrbit("expansion factor: event budget exhausted");
        const CellConfig& cell = tube.cell(s.cell);
        const CollisionEvent ev = next_event(cell, s);
        if (is_singular(ev.kind))
            throw SingularOrbit(std::string("expansion factor met a ") + to_string(ev.kind) + " event");
        const double tau = ev.before.time - s.time;
        for (TangentVector& a : t) tangent_flight(a, tau);
        if (is_reflection(ev.kind)) {
            const Mat3 W = shape_at(cell, ev);
            for (TangentVector& a : t) tangent_collision(a, ev.before.x.v, ev.hit.normal, W);
        }
        s = ev.after;

        const double r11 = norm(t[0].dq);
        scale(t[0], 1 / r11);
        const double r12 = dot(t[0].dq, t[1].dq);
        axpy(t[1], -r12, t[0]);
        const double r22 = norm(t[1].dq);
        scale(t[1], 1 / r22);
        const double n00 = r11 * R[0][0];
        const double n01 = r11 * R[0][1] + r12 * R[1][1];
        const double n11 = r22 * R[1][1];
        const double m = std::max({std::abs(n00), std::abs(n01), std::abs(n11)});
        R[0][0] = n00 / m;
        R[0][1] = n01 / m;
        R[1][0] = 0;
        R[1][1] = n11 / m;
        log_scale += std::log(m);
        log_det += std::log(r11) + std::log(r22);

        if (ev.kind != EventKind::Dispersing) continue;
        const double c = dot(s.x.v, ev.hit.normal);
        if (std::abs(c - eps) < kSectionBoundaryThreshold)
            throw SingularOrbit("expansion factor: orbit meets the section boundary");
        if (c < eps) continue;
        ++returns;
        // largest singular value of the scaled 2x2 upper-triangular R
        const double a = R[0][0], b = R[0][1], d = R[1][1];
        const double fro = a * a + b * b + d * d;
        const double det = a * d;
        const double smax2 = 0.5 * (fro + std::sqrt(std::max(0.0, fro * fro - 4 * det * det)));
        const double log_smax = log_scale + 0.5 * std::log(smax2);
        const double factor = std::exp(log_det - log_smax);
        // beyond double range the factor saturates; monotonicity is still judged
        if (factor < out.history.back() * (1 - 1e-9)) out.monotone = false;
        out.history.push_back(factor);
    }
    out.factor = out.history.back();
    return out;
}

}  // namespace ltube
