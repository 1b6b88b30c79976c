#include "qttsp/bench.hpp"
#include "qttsp/rank_lab.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

using namespace qttsp;

namespace {

// exit codes
constexpr int kOk = 0, kInputError = 1, kNotConverged = 2;

std::pair<int, int> parse_range(const std::string& s, int* step = nullptr)
{
    int a = 0, b = 0, c = 1;
    const int n = std::sscanf(s.c_str(), "%d:%d:%d", &a, &b, &c);
    if (n == 1) b = a;
    if (n < 1 || (n == 3 && step == nullptr)) throw CLI::ValidationError("range", "expected A:B, got '" + s + "'");
    if (step) *step = c;
    return {a, b};
}

bool parse_on_off(const std::string& s)
{
    if (s == "on" || s == "true" || s == "1") return true;
    if (s == "off" || s == "false" || s == "0") return false;
    throw CLI::ValidationError("--precond", "expected on|off");
}

void add_solver_flags(CLI::App* app, SolverConfig& cfg)
{
    app->add_option("--max-sweeps", cfg.max_sweeps, "DMRG sweep limit")->capture_default_str();
    app->add_option("--rank-cap", cfg.rank_cap, "abort when a bond needs more than this rank")->capture_default_str();
    app->add_option("--seed", cfg.seed, "seed of the initial guess")->capture_default_str();
}

void print_slopes(const std::vector<SweepRecord>& recs, const std::vector<double>& deltas)
{
    for (double d : deltas) {
        const RegimeSlopes s = regime_slopes(recs, d);
        std::fprintf(stderr, "delta %-8s coarse slope %s  fine slope %s\n", format_double(d).c_str(),
                     s.coarse ? format_double(s.coarse->slope).c_str() : "n/a",
                     s.fine ? format_double(s.fine->slope).c_str() : "n/a");
    }
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"QTT solver for singularly perturbed reaction-diffusion problems"};
    app.require_subcommand(1);
    int code = kOk;

    // solve
    auto* solve = app.add_subcommand("solve", "solve the model problem on one level");
    double s_delta = 1e-3, s_tol = 1e-10;
    int s_level = 10;
    std::string s_pre = "on", s_csv;
    bool s_partial = false;
    SolverConfig s_cfg;
    solve->add_option("--delta", s_delta, "perturbation parameter in (0,1)")->capture_default_str();
    solve->add_option("--level", s_level, "L, the grid has 2^L interior nodes")->capture_default_str();
    solve->add_option("--tol", s_tol, "eps_tol for termination and rounding")->capture_default_str();
    solve->add_option("--precond", s_pre, "on|off")->capture_default_str();
    solve->add_option("--csv", s_csv, "write the record as CSV");
    solve->add_flag("--allow-partial", s_partial, "exit 0 even without convergence");
    add_solver_flags(solve, s_cfg);
    solve->callback([&] {
        const SweepRecord r = run_cell(s_delta, s_level, s_tol, parse_on_off(s_pre), s_cfg);
        std::printf("delta %s  L %d  eps_tol %s\n", format_double(r.delta).c_str(), r.L, format_double(r.eps_tol).c_str());
        std::printf("converged %s  sweeps %d  max_rank %d  n_dof %lld\n", r.converged ? "yes" : "no", r.sweeps,
                    r.max_rank, r.n_dof);
        std::printf("energy_error %s  wall_time_ms %.1f\n", format_double(r.energy_error).c_str(), r.wall_time_ms);
        if (!r.diagnostic.empty()) std::printf("diagnostic: %s\n", r.diagnostic.c_str());
        if (!s_csv.empty()) emit_csv({r}, s_csv);
        if (!r.converged && !s_partial) code = kNotConverged;
    });

    // sweep
    auto* sweep = app.add_subcommand("sweep", "convergence sweep over deltas and levels");
    std::vector<double> w_deltas{1e-1, 1e-3, 1e-6};
    std::string w_levels = "4:20", w_tol = "1e-10", w_pre = "on", w_csv, w_plot;
    bool w_partial = false;
    SweepConfig w_cfg;
    sweep->add_option("--deltas", w_deltas, "comma separated list")->delimiter(',')->capture_default_str();
    sweep->add_option("--levels", w_levels, "A:B or A:B:step")->capture_default_str();
    sweep->add_option("--tol", w_tol, "eps_tol or 'adaptive'")->capture_default_str();
    sweep->add_option("--precond", w_pre, "on|off")->capture_default_str();
    sweep->add_option("--csv", w_csv, "output CSV path (default stdout)");
    sweep->add_option("--plot", w_plot, "also write a gnuplot script here");
    sweep->add_option("--threads", w_cfg.threads, "worker threads, 0 = all cores")->capture_default_str();
    sweep->add_option("--repetitions", w_cfg.repetitions, "timing repeats per cell")->capture_default_str();
    sweep->add_flag("--allow-partial", w_partial, "exit 0 even if some cells did not converge");
    add_solver_flags(sweep, w_cfg.solver);
    sweep->callback([&] {
        w_cfg.deltas = w_deltas;
        std::tie(w_cfg.L_lo, w_cfg.L_hi) = parse_range(w_levels, &w_cfg.L_step);
        w_cfg.adaptive = w_tol == "adaptive";
        if (!w_cfg.adaptive) w_cfg.eps_tol = std::stod(w_tol);
        w_cfg.precondition = parse_on_off(w_pre);
        const auto recs = run_sweep(w_cfg);
        if (w_csv.empty())
            emit_csv(recs, std::cout);
        else
            emit_csv(recs, w_csv);
        if (!w_plot.empty()) emit_plot_script(recs, w_plot, w_csv.empty() ? "sweep.csv" : w_csv);
        print_slopes(recs, w_cfg.deltas);
        const auto bad = std::count_if(recs.begin(), recs.end(), [](const SweepRecord& r) { return !r.converged; });
        if (bad) std::fprintf(stderr, "%ld of %zu cells did not converge\n", long(bad), recs.size());
        if (bad && !w_partial) code = kNotConverged;
    });

    // rankstudy
    auto* rs = app.add_subcommand("rankstudy", "ranks of the projected hp solution against the degree");
    std::string r_p = "2:16", r_csv;
    double r_delta = 1e-4, r_eps = 1e-10, r_lambda = 1.0;
    int r_level = 14;
    rs->add_option("--p", r_p, "degree range A:B")->capture_default_str();
    rs->add_option("--delta", r_delta)->capture_default_str();
    rs->add_option("--level", r_level)->capture_default_str();
    rs->add_option("--eps", r_eps, "rounding accuracy for the rank measurement")->capture_default_str();
    rs->add_option("--lambda", r_lambda, "hp mesh parameter")->capture_default_str();
    rs->add_option("--csv", r_csv, "output CSV path (default stdout)");
    rs->callback([&] {
        const auto [lo, hi] = parse_range(r_p);
        const auto rows = rank_study(lo, hi, r_delta, r_level, r_eps, r_lambda);
        if (r_csv.empty())
            write_rank_csv(rows, std::cout);
        else {
            std::ofstream f(r_csv);
            if (!f) throw std::ios_base::failure("cannot open " + r_csv);
            write_rank_csv(rows, f);
        }
        bool within = true;
        for (const auto& r : rows) within = within && r.max_rank <= 5 * (r.p + 9);
        if (rows.size() >= 2) {
            const LinearFit f = rank_growth_fit(rows);
            std::fprintf(stderr, "rank vs p: slope %.4g  R^2 %.4g  bound 5(p+9) %s\n", f.slope, f.r2,
                         within ? "holds" : "violated");
        }
    });

    // kappa
    auto* kp = app.add_subcommand("kappa", "fit the convergence exponent from a sweep CSV");
    std::string k_in;
    double k_plateau = 3.0;
    kp->add_option("--input", k_in, "sweep CSV")->required();
    kp->add_option("--plateau", k_plateau, "discard records with error below this multiple of eps_tol")->capture_default_str();
    kp->callback([&] {
        const auto recs = parse_csv(k_in);
        const KappaFit f = estimate_kappa(recs, k_plateau);
        std::printf("kappa %s\nb %s\nr2 %s\nrecords %zu\n", format_double(f.kappa).c_str(), format_double(f.b).c_str(),
                    format_double(f.r2).c_str(), f.used);
    });

    try {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kInputError;
    }
    catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kInputError;
    }
    return code;
}
