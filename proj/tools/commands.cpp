#include "commands.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>

#include "json.hpp"

#include "ltube/analysis.hpp"
#include "ltube/errors.hpp"
#include "ltube/parallel.hpp"
#include "ltube/pvp.hpp"

namespace ltube::cli {

using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::filesystem::path out_dir(const CommonOptions& c) {
    std::filesystem::path p(c.out);
    std::filesystem::create_directories(p);
    return p;
}

void write_json(const std::filesystem::path& path, const json& j) {
    std::ofstream os(path);
    os << j.dump(2) << '\n';
    if (!os) throw Error("cannot write '" + path.string() + "'");
}

json num(double x) {
    if (std::isfinite(x)) return x;
    if (std::isnan(x)) return nullptr;
    return x > 0 ? "inf" : "-inf";
}

json constants_json(const DerivedConstants& c) {
    return {{"gamma", c.gamma}, {"M", c.M},   {"L1", c.L1},   {"L2", c.L2},  {"L3", c.L3},
            {"L", c.L},         {"K3", c.K3}, {"eta", c.eta}, {"eps", c.eps}};
}

json header(const char* command, const CommonOptions& c, const QuenchedTube& tube) {
    return {{"command", command},
            {"seed", c.seed},
            {"workers", c.workers},
            {"tube", json::parse(serialize(tube.config()))},
            {"constants", constants_json(tube.constants())}};
}

LineElement initial_element(const QuenchedTube& tube, const SimulateOptions& o, std::uint64_t seed) {
    if (o.q.empty() != o.v.empty()) throw ConfigError("--q and --v must be given together");
    if (o.q.empty()) {
        Rng rng(seed);
        return sample_free_element(tube, 0, rng);
    }
    if (o.q.size() != 3 || o.v.size() != 3) throw ConfigError("--q and --v take three numbers each");
    const Vec3 v{o.v[0], o.v[1], o.v[2]};
    if (!(norm(v) > 0)) throw ConfigError("--v must be a nonzero vector");
    return {{o.q[0], o.q[1], o.q[2]}, normalized(v)};
}

}  // namespace

TubeConfig resolve_tube(const TubeOptions& o) {
    TubeConfig c;
    if (!o.config_path.empty()) c = parse_tube_config(read_file(o.config_path));
    if (!o.preset.empty()) c.cell = preset_parameters(parse_preset(o.preset));
    CellParameters& p = c.cell;
    if (o.h) p.h = *o.h;
    if (o.g) p.g = *o.g;
    if (o.rho) p.rho = *o.rho;
    if (o.r_long) p.r_long = *o.r_long;
    if (o.hole_side) p.hole.side = *o.hole_side;
    if (o.hole_u) p.hole.offset_u = *o.hole_u;
    if (o.hole_v) p.hole.offset_v = *o.hole_v;
    if (o.perturbation) c.perturbation = *o.perturbation;
    if (o.tube_seed) c.seed = *o.tube_seed;
    if (o.no_validate) c.validate = false;
    return c;
}

//---------------------------------------------------------------------------//

int cmd_simulate(const CommonOptions& c, const SimulateOptions& o) {
    const QuenchedTube tube(resolve_tube(c.tube));
    if (o.collisions < 0) throw ConfigError("--collisions must be >= 0");
    const LineElement x0 = initial_element(tube, o, c.seed);
    const auto dir = out_dir(c);

    StopCondition stop = StopCondition::collisions(o.collisions);
    if (o.max_time) stop.max_time = *o.max_time;
    Trajectory tr;
    tr.initial = make_state(tube, x0);
    tr.final_state = tr.initial;
    if (o.collisions > 0) tr = trace(tube, x0, stop);

    std::ofstream csv(dir / "trajectory.csv");
    csv << "time,qx,qy,qz,vx,vy,vz,cell,kind,cos_incidence\n" << std::setprecision(17);
    double max_dev = 0;
    std::int64_t reflections = 0;
    for (const CollisionEvent& ev : tr.events) {
        const Vec3 q = ev.before.world_q(tube.h());
        const Vec3& v = ev.after.x.v;
        max_dev = std::max(max_dev, std::abs(norm(v) - 1));
        if (is_reflection(ev.kind)) ++reflections;
        csv << ev.before.time << ',' << q.x << ',' << q.y << ',' << q.z << ',' << v.x << ',' << v.y << ','
            << v.z << ',' << ev.before.cell << ',' << to_string(ev.kind) << ',' << ev.hit.cos_incidence << '\n';
    }
    if (!csv) throw Error("cannot write trajectory.csv");

    json j = header("simulate", c, tube);
    j["initial"] = {{"q", {x0.q.x, x0.q.y, x0.q.z}}, {"v", {x0.v.x, x0.v.y, x0.v.z}}};
    j["events"] = tr.events.size();
    j["collisions"] = reflections;
    j["final_time"] = tr.final_state.time;
    j["final_cell"] = tr.final_state.cell;
    j["termination"] = to_string(tr.termination);
    j["max_speed_deviation"] = max_dev;
    write_json(dir / "summary.json", j);
    std::cout << j.dump(2) << '\n';
    return kExitOk;
}

//---------------------------------------------------------------------------//

int cmd_recurrence(const CommonOptions& c, const RecurrenceOptions& o) {
    RecurrenceConfig rc;
    rc.tube = resolve_tube(c.tube);
    if (o.tubes < 1 || o.orbits < 1 || o.n_max < 0) throw ConfigError("recurrence needs tubes, orbits >= 1 and n_max >= 0");
    rc.tube_seeds.clear();
    for (std::int64_t k = 0; k < o.tubes; ++k) rc.tube_seeds.push_back(rc.tube.seed + static_cast<std::uint64_t>(k));
    rc.orbits_per_tube = o.orbits;
    rc.n_max = o.n_max;
    rc.master_seed = c.seed;
    rc.workers = c.workers;
    rc.drift_horizon = o.drift_horizon;
    rc.band_sigmas = o.band_sigmas;
    const QuenchedTube probe(rc.tube);  // validates the template up front
    const RecurrenceReport rep = recurrence_ensemble(rc);

    const auto dir = out_dir(c);
    std::ofstream csv(dir / "orbits.csv");
    write_orbit_csv(csv, rep.records);
    if (!csv) throw Error("cannot write orbits.csv");

    json j = header("recurrence", c, probe);
    j["tube_seeds"] = rc.tube_seeds;
    j["orbits_per_tube"] = o.orbits;
    j["report"] = json::parse(to_json(rep));
    json mono = json::array();
    bool monotone = true;
    double prev = 0;
    for (std::int64_t n = 1; n <= std::max<std::int64_t>(o.n_max, 1); n *= 10) {
        const double f = rep.return_fraction_at(std::min(n, o.n_max));
        monotone = monotone && f >= prev;
        prev = f;
        mono.push_back({{"n", std::min(n, o.n_max)}, {"return_fraction", f}});
    }
    j["return_fraction_by_budget"] = mono;
    j["monotone_in_budget"] = monotone;
    write_json(dir / "recurrence.json", j);
    std::cout << j.dump(2) << '\n';
    return kExitOk;
}

//---------------------------------------------------------------------------//

int cmd_lyapunov(const CommonOptions& c, const LyapunovOptionsCli& o) {
    const QuenchedTube tube(resolve_tube(c.tube));
    std::vector<LyapunovMethod> methods;
    if (o.method == "both") {
        methods = {LyapunovMethod::Tangent, LyapunovMethod::Shadow};
    } else {
        methods = {parse_lyapunov_method(o.method)};
    }
    if (o.events < 1 || o.orbits < 1) throw ConfigError("lyapunov needs events and orbits >= 1");
    LyapunovOptions opt;
    opt.confidence = o.confidence;

    std::vector<std::vector<LyapunovResult>> runs(methods.size(), std::vector<LyapunovResult>(static_cast<std::size_t>(o.orbits)));
    parallel_for(o.orbits, c.workers, [&](std::int64_t i) {
        Rng init = Rng::for_stream(c.seed, i);
        const LineElement x0 = sample_free_element(tube, 0, init);
        for (std::size_t m = 0; m < methods.size(); ++m) {
            Rng rng = Rng::for_stream(c.seed ^ 0x6C79617075ULL, i);
            runs[m][static_cast<std::size_t>(i)] = lyapunov_spectrum(tube, x0, o.events, methods[m], rng, opt);
        }
    });

    const auto dir = out_dir(c);
    std::ofstream csv(dir / "convergence.csv");
    csv << "orbit,method,events,lambda1\n" << std::setprecision(17);
    json j = header("lyapunov", c, tube);
    j["events_per_orbit"] = o.events;
    j["orbits"] = o.orbits;
    json per_method = json::object();
    std::vector<LyapunovResult> combined;
    for (std::size_t m = 0; m < methods.size(); ++m) {
        for (std::size_t i = 0; i < runs[m].size(); ++i)
            for (const auto& [ev, l1] : runs[m][i].running)
                csv << i << ',' << to_string(methods[m]) << ',' << ev << ',' << l1 << '\n';
        const LyapunovResult all = combine_lyapunov(runs[m], opt);
        combined.push_back(all);
        json orbits = json::array();
        for (const LyapunovResult& r : runs[m])
            orbits.push_back({{"lambda1", num(r.lambda1)}, {"lambda2", num(r.lambda2)}, {"restarts", r.restarts},
                              {"discarded", r.discarded}, {"time", r.time}});
        per_method[to_string(methods[m])] = {{"lambda1", num(all.lambda1)},
                                             {"lambda2", num(all.lambda2)},
                                             {"ci1", {num(all.ci1[0]), num(all.ci1[1])}},
                                             {"ci2", {num(all.ci2[0]), num(all.ci2[1])}},
                                             {"confidence", o.confidence},
                                             {"ci_excludes_zero", all.ci1[0] > 0 || all.ci1[1] < 0},
                                             {"restarts", all.restarts},
                                             {"discarded", all.discarded},
                                             {"per_orbit", orbits}};
    }
    j["methods"] = per_method;
    if (combined.size() == 2) {
        const double a = combined[0].lambda1;
        const double b = combined[1].lambda1;
        const double rel = std::abs(a - b) / std::max(std::abs(a), std::abs(b));
        j["agreement"] = {{"relative_difference", num(rel)}, {"tolerance", o.agreement}, {"within", rel <= o.agreement}};
    }
    write_json(dir / "lyapunov.json", j);
    std::cout << j.dump(2) << '\n';
    return kExitOk;
}

//---------------------------------------------------------------------------//

namespace {

struct CheckOutcome {
    bool pass{false};
    json report;
    std::string reason;
};

CheckOutcome check_a3(const QuenchedTube& tube, const CommonOptions& c, const CheckOptions& o) {
    Rng rng(c.seed);
    const A3Report r = check_A3(tube.cell(o.cell), o.samples > 0 ? o.samples : 100'000, rng);
    CheckOutcome out;
    out.pass = r.pass();
    out.report = {{"samples", r.samples},
                  {"dispersing_samples", r.dispersing_samples},
                  {"flat_excluded", r.flat_excluded},
                  {"k_min", r.k_min},
                  {"k_max", r.k_max},
                  {"k_transverse", {r.k_transverse_min, r.k_transverse_max}},
                  {"k_longitudinal", {r.k_longitudinal_min, r.k_longitudinal_max}},
                  {"violations", r.violations}};
    if (!out.pass) out.reason = std::to_string(r.violations) + " curvature violations";
    return out;
}

CheckOutcome check_a4(const QuenchedTube& tube, const CommonOptions& c, const CheckOptions& o) {
    A4Options opt;
    opt.seed = c.seed;
    opt.workers = c.workers;
    opt.stride = o.stride;
    const A4Report r = check_A4(tube, o.trajectories, o.windows, opt);
    CheckOutcome out;
    out.pass = r.pass();
    out.report = {{"windows", r.windows},
                  {"window_length", r.window_length},
                  {"max_collisions_per_L", r.max_collisions_per_L},
                  {"K3", r.K3},
                  {"headon_window_fraction", r.headon_window_fraction},
                  {"eps_used", r.eps_used},
                  {"restarts", r.restarts},
                  {"failures", r.failures}};
    if (!out.pass) {
        out.reason = "head-on fraction " + std::to_string(r.headon_window_fraction) + ", max count " +
                     std::to_string(r.max_collisions_per_L);
        for (const std::string& f : r.failures) std::cerr << "A4 offending window: " << f << '\n';
    }
    return out;
}

CheckOutcome check_a6(const QuenchedTube& tube, const CommonOptions& c, const CheckOptions& o) {
    A6Options opt;
    opt.seed = c.seed;
    opt.workers = c.workers;
    opt.samples = o.samples > 0 ? o.samples : 100'000;
    const std::vector<A6Row> rows = check_A6(tube, o.cell, o.scatterer, o.deltas, opt);
    const double spread = ratio_spread(rows);
    CheckOutcome out;
    json jr = json::array();
    for (const A6Row& r : rows)
        jr.push_back({{"delta", r.delta},
                      {"samples", r.samples},
                      {"in_neighborhood", r.in_neighborhood},
                      {"measure_estimate", r.measure_estimate},
                      {"ratio", r.ratio}});
    out.pass = spread <= o.spread;
    out.report = {{"cell", o.cell}, {"scatterer", o.scatterer}, {"rows", jr}, {"ratio_spread", num(spread)},
                  {"spread_tolerance", o.spread}};
    if (!out.pass) out.reason = "ratio spread " + std::to_string(spread) + " exceeds " + std::to_string(o.spread);
    return out;
}

json invariance_json(const InvarianceResult& r) {
    return {{"statistic", r.statistic}, {"threshold", r.threshold}, {"p_value", r.p_value},
            {"pass", r.pass},           {"samples", r.samples},     {"dropped", r.dropped}};
}

CheckOutcome check_measure(const QuenchedTube& tube, const CommonOptions& c, const CheckOptions& o) {
    InvarianceOptions opt;
    opt.seed = c.seed;
    opt.workers = c.workers;
    opt.permutations = o.permutations;
    opt.directions = o.directions;
    opt.alpha = o.alpha;
    const std::int64_t n = o.samples > 0 ? o.samples : 10'000;
    const InvarianceMap map = parse_invariance_map(o.map);
    const InvarianceResult main = measure_invariance_test(tube, map, n, opt);
    opt.biased_reference = true;
    const InvarianceResult control = measure_invariance_test(tube, InvarianceMap::Identity, n, opt);
    CheckOutcome out;
    out.pass = main.pass && !control.pass;
    out.report = {{"map", to_string(map)}, {"alpha", o.alpha}, {"test", invariance_json(main)},
                  {"biased_control", invariance_json(control)}};
    if (!main.pass) out.reason = "pushforward differs from the invariant measure (p = " + std::to_string(main.p_value) + ")";
    else if (control.pass) out.reason = "biased negative control was not rejected";
    return out;
}

CheckOutcome check_oracle(const QuenchedTube& tube, const CommonOptions& c, const CheckOptions& o) {
    Rng rng(c.seed);
    ProjectionReport total;
    std::int64_t restarts = 0;
    for (std::int64_t i = 0; i < o.orbits;) {
        const LineElement x0 = sample_free_element(tube, 0, rng);
        try {
            const ProjectionReport r = projection_check(tube, x0, o.collisions);
            total.collisions += r.collisions;
            total.max_point_deviation = std::max(total.max_point_deviation, r.max_point_deviation);
            total.max_identity_deviation = std::max(total.max_identity_deviation, r.max_identity_deviation);
            ++i;
        } catch (const SingularOrbit&) {
            ++restarts;
        }
    }
    CheckOutcome out;
    out.pass = total.max_point_deviation <= o.point_tolerance && total.max_identity_deviation <= o.identity_tolerance;
    out.report = {{"orbits", o.orbits},
                  {"collisions_per_orbit", o.collisions},
                  {"max_point_deviation", total.max_point_deviation},
                  {"max_identity_deviation", total.max_identity_deviation},
                  {"point_tolerance", o.point_tolerance},
                  {"identity_tolerance", o.identity_tolerance},
                  {"singular_restarts", restarts}};
    if (!out.pass) out.reason = "projection deviates from the diamond oracle";
    return out;
}

}  // namespace

int cmd_check(const CommonOptions& c, const CheckOptions& o) {
    const QuenchedTube tube(resolve_tube(c.tube));
    if (o.which.empty()) throw ConfigError("check needs at least one of A3, A4, A6, measure, oracle");
    const auto dir = out_dir(c);
    json j = header("check", c, tube);
    json results = json::object();
    bool all = true;
    std::vector<std::string> failed;
    for (const std::string& w : o.which) {
        CheckOutcome r;
        if (w == "A3") r = check_a3(tube, c, o);
        else if (w == "A4") r = check_a4(tube, c, o);
        else if (w == "A6") r = check_a6(tube, c, o);
        else if (w == "measure") r = check_measure(tube, c, o);
        else if (w == "oracle") r = check_oracle(tube, c, o);
        else throw ConfigError("unknown check '" + w + "' (expected A3, A4, A6, measure or oracle)");
        r.report["pass"] = r.pass;
        if (!r.pass) {
            r.report["reason"] = r.reason;
            failed.push_back(w);
            std::cerr << "check " << w << " failed: " << r.reason << '\n';
        }
        results[w] = r.report;
        all = all && r.pass;
    }
    j["checks"] = results;
    j["pass"] = all;
    write_json(dir / "check.json", j);
    std::cout << j.dump(2) << '\n';
    return all ? kExitOk : kExitCheck;
}

int cmd_constants(const CommonOptions& c) {
    const QuenchedTube tube(resolve_tube(c.tube));
    json j = header("constants", c, tube);
    const auto dir = out_dir(c);
    write_json(dir / "constants.json", j);
    std::cout << j.dump(2) << '\n';
    return kExitOk;
}

}  // namespace ltube::cli
