#include <exception>
#include <iostream>

#include "CLI11.hpp"

#include "commands.hpp"
#include "ltube/errors.hpp"

using namespace ltube::cli;

namespace {

// Options shared by every subcommand; environment variables LTUBE_* act as
// defaults that explicit flags override.
void add_common(CLI::App* app, CommonOptions& c) {
    app->add_option("--config", c.tube.config_path, "Tube configuration file (JSON)")->envname("LTUBE_CONFIG");
    app->add_option("--seed", c.seed, "Master seed")->envname("LTUBE_SEED");
    app->add_option("--workers", c.workers, "Worker threads (0 = all cores)")->envname("LTUBE_WORKERS");
    app->add_option("--out", c.out, "Output directory")->envname("LTUBE_OUT");
    app->add_option("--template", c.tube.preset, "Cell preset: appendix, cylindrical, empty, flat")
        ->envname("LTUBE_TEMPLATE");
    app->add_option("--h", c.tube.h, "Cell height");
    app->add_option("--g", c.tube.g, "Gate side");
    app->add_option("--rho", c.tube.rho, "Cigar end radius");
    app->add_option("--r-long", c.tube.r_long, "Longitudinal curvature radius of the cigars");
    app->add_option("--hole-side", c.tube.hole_side, "Bulkhead hole side");
    app->add_option("--hole-u", c.tube.hole_u, "Bulkhead hole offset along the first face axis");
    app->add_option("--hole-v", c.tube.hole_v, "Bulkhead hole offset along the second face axis");
    app->add_option("--perturbation", c.tube.perturbation, "Per-cell perturbation magnitude")
        ->envname("LTUBE_PERTURBATION");
    app->add_option("--tube-seed", c.tube.tube_seed, "Seed of the quenched cell sequence");
    app->add_flag("--no-validate", c.tube.no_validate, "Skip geometric validation (test fixtures only)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Quenched random Lorentz tube simulator"};
    app.set_help_flag("--help", "Print this help message and exit");
    app.require_subcommand(1);

    CommonOptions common;

    SimulateOptions sim;
    auto* simulate = app.add_subcommand("simulate", "Trace one trajectory; writes trajectory.csv and summary.json");
    add_common(simulate, common);
    simulate->add_option("--collisions", sim.collisions, "Reflections to trace");
    simulate->add_option("--time", sim.max_time, "Stop at this flow time");
    simulate->add_option("--q", sim.q, "Initial world position x y z")->expected(3);
    simulate->add_option("--v", sim.v, "Initial velocity x y z (normalized)")->expected(3);

    RecurrenceOptions rec;
    auto* recurrence = app.add_subcommand("recurrence", "Recurrence ensemble of the PVP cocycle");
    add_common(recurrence, common);
    recurrence->add_option("--orbits", rec.orbits, "Orbits per quenched tube");
    recurrence->add_option("--tubes", rec.tubes, "Quenched tubes (seeds tube-seed, tube-seed+1, ...)");
    recurrence->add_option("--n-max", rec.n_max, "Cocycle step budget");
    recurrence->add_option("--drift-horizon", rec.drift_horizon, "Horizon of the drift estimate");
    recurrence->add_option("--band-sigmas", rec.band_sigmas, "Width of the drift band in standard errors");

    LyapunovOptionsCli lyap;
    auto* lyapunov = app.add_subcommand("lyapunov", "Lyapunov exponents; writes lyapunov.json and convergence.csv");
    add_common(lyapunov, common);
    lyapunov->add_option("--events", lyap.events, "Flow events per orbit");
    lyapunov->add_option("--orbits", lyap.orbits, "Orbits");
    lyapunov->add_option("--method", lyap.method, "tangent, shadow or both");
    lyapunov->add_option("--confidence", lyap.confidence, "Bootstrap confidence level");
    lyapunov->add_option("--agreement", lyap.agreement, "Relative tangent/shadow tolerance");

    CheckOptions chk;
    auto* check = app.add_subcommand("check", "Assumption checkers and oracles; exit 4 on failure");
    add_common(check, common);
    check->add_option("which", chk.which, "A3, A4, A6, measure, oracle")->required();
    check->add_option("--samples", chk.samples, "Samples (A3, A6, measure)");
    check->add_option("--trajectories", chk.trajectories, "A4 trajectories");
    check->add_option("--windows", chk.windows, "A4 windows per trajectory");
    check->add_option("--stride", chk.stride, "A4 collisions between window anchors");
    check->add_option("--deltas", chk.deltas, "A6 neighbourhood sizes");
    check->add_option("--spread", chk.spread, "A6 tolerated ratio spread");
    check->add_option("--cell", chk.cell, "Cell index (A3, A6)");
    check->add_option("--scatterer", chk.scatterer, "Scatterer index (A6)");
    check->add_option("--map", chk.map, "identity, poincare-n or f-step (measure)");
    check->add_option("--permutations", chk.permutations, "Permutations of the energy test");
    check->add_option("--directions", chk.directions, "Projection directions of the energy test");
    check->add_option("--alpha", chk.alpha, "Significance level of the energy test");
    check->add_option("--orbits", chk.orbits, "Oracle orbits");
    check->add_option("--collisions", chk.collisions, "Oracle collisions per orbit");

    auto* constants = app.add_subcommand("constants", "Print the derived constants of the cell");
    add_common(constants, common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitParse;
    }

    try {
        if (*simulate) return cmd_simulate(common, sim);
        if (*recurrence) return cmd_recurrence(common, rec);
        if (*lyapunov) return cmd_lyapunov(common, lyap);
        if (*check) return cmd_check(common, chk);
        if (*constants) return cmd_constants(common);
    } catch (const ltube::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kExitParse;
    } catch (const ltube::InvalidGeometry& e) {
        std::cerr << "invalid geometry: " << e.what() << '\n';
        return kExitGeometry;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return kExitOk;
}
