#pragma once

#include "qttsp/fit.hpp"
#include "qttsp/solve_engine.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <fstream>
#include <istream>
#include <limits>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

namespace qttsp {

struct SweepConfig {
    std::vector<double> deltas{1e-1, 1e-3, 1e-6};
    int L_lo = 4, L_hi = 20, L_step = 1;
    double eps_tol = 1e-10;
    bool adaptive = false; // eps per cell from adaptive_tol
    bool precondition = true;
    int repetitions = 1;   // timing repeats, min wall time is kept
    unsigned threads = 1;  // worker pool size, 0 = hardware concurrency
    SolverConfig solver;   // eps_tol of this member is overridden per cell

    void validate() const
    {
        if (deltas.empty()) throw std::invalid_argument("SweepConfig: no deltas");
        for (double d : deltas)
            if (!(d > 0 && d < 1)) throw std::invalid_argument("SweepConfig: deltas must lie in (0,1)");
        if (L_lo < 1 || L_hi < L_lo || L_hi > 60) throw std::invalid_argument("SweepConfig: level range must satisfy 1 <= lo <= hi <= 60");
        if (L_step < 1) throw std::invalid_argument("SweepConfig: level step must be positive");
        if (repetitions < 1) throw std::invalid_argument("SweepConfig: repetitions must be positive");
        if (!adaptive) {
            SolverConfig s = solver;
            s.eps_tol = eps_tol;
            s.validate();
        }
    }
};

struct SweepRecord {
    double delta = 0;
    int L = 0;
    double eps_tol = 0;
    long long n_dof = 0;
    int max_rank = 0;
    double energy_error = std::numeric_limits<double>::quiet_NaN();
    int sweeps = 0;
    bool converged = false;
    double wall_time_ms = 0;
    std::string diagnostic; // not part of the CSV

    bool operator==(const SweepRecord& o) const
    {
        auto same = [](double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); };
        return delta == o.delta && L == o.L && eps_tol == o.eps_tol && n_dof == o.n_dof && max_rank == o.max_rank &&
               same(energy_error, o.energy_error) && sweeps == o.sweeps && converged == o.converged &&
               same(wall_time_ms, o.wall_time_ms);
    }
};

// one model-problem solve (-d^2 u'' + u = 0, u(0) = 0, u(1) = 1)
inline SweepRecord run_cell(double delta, int L, double eps, bool precondition, SolverConfig solver, int repetitions = 1)
{
    solver.eps_tol = eps;
    SweepRecord r;
    r.delta = delta;
    r.L = L;
    r.eps_tol = eps;
    const ProblemSpec p = model_problem(delta, L);
    double best = std::numeric_limits<double>::infinity();
    for (int k = 0; k < std::max(1, repetitions); ++k) {
        const auto t0 = std::chrono::steady_clock::now();
        try {
            PerturbedSolution s = solve_perturbed(p, solver, precondition);
            best = std::min(best, std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
            if (k > 0) continue;
            r.n_dof = s.u.n_parameters();
            r.max_rank = s.u.max_rank();
            r.sweeps = s.report.sweeps;
            r.converged = s.report.converged;
            r.diagnostic = s.report.diagnostic;
            r.energy_error = discrete_error(s.u, p);
        }
        catch (const std::exception& e) {
            // rank cap or singular update: reported, not dropped
            r.converged = false;
            r.diagnostic = e.what();
            best = std::min(best, std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
            break;
        }
    }
    r.wall_time_ms = best;
    return r;
}

inline const std::vector<double>& tolerance_ladder()
{
    static const std::vector<double> ladder{1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8, 1e-9, 1e-10, 1e-11, 1e-12};
    return ladder;
}

struct AdaptiveChoice {
    double eps_tol = 1e-12;
    SweepRecord record;    // the cell solved at eps_tol
    SweepRecord reference; // the cell solved at 1e-12
    int solves = 0;
};

// largest ladder tolerance whose error is at most 1.1 times the error at 1e-12
inline AdaptiveChoice adaptive_tol(double delta, int L, bool precondition = true, SolverConfig solver = {})
{
    AdaptiveChoice c;
    c.reference = run_cell(delta, L, 1e-12, precondition, solver);
    c.solves = 1;
    if (!c.reference.converged || !std::isfinite(c.reference.energy_error))
        throw std::runtime_error("adaptive_tol: reference solve at 1e-12 did not converge (delta " + std::to_string(delta) +
                                 ", L " + std::to_string(L) + "): " + c.reference.diagnostic);
    const double limit = 1.1 * c.reference.energy_error;
    const auto& ladder = tolerance_ladder();
    for (std::size_t k = 0; k + 1 < ladder.size(); ++k) {
        SweepRecord r = run_cell(delta, L, ladder[k], precondition, solver);
        ++c.solves;
        if (r.converged && r.energy_error <= limit) {
            c.eps_tol = ladder[k];
            c.record = r;
            return c;
        }
    }
    c.eps_tol = 1e-12;
    c.record = c.reference;
    return c;
}

inline std::vector<SweepRecord> run_sweep(const SweepConfig& cfg)
{
    cfg.validate();
    std::vector<std::pair<double, int>> cells;
    for (double d : cfg.deltas)
        for (int L = cfg.L_lo; L <= cfg.L_hi; L += cfg.L_step) cells.emplace_back(d, L);
    std::vector<SweepRecord> out(cells.size());
    std::atomic<std::size_t> next{0};
    std::mutex err_mtx;
    std::exception_ptr err;
    auto worker = [&] {
        for (std::size_t i; (i = next++) < cells.size();) {
            try {
                const auto [d, L] = cells[i];
                if (cfg.adaptive) {
                    AdaptiveChoice c = adaptive_tol(d, L, cfg.precondition, cfg.solver);
                    out[i] = c.record;
                }
                else
                    out[i] = run_cell(d, L, cfg.eps_tol, cfg.precondition, cfg.solver, cfg.repetitions);
            }
            catch (const std::exception& e) {
                if (cfg.adaptive) {
                    // failed reference: record the cell as non-converged
                    out[i].delta = cells[i].first;
                    out[i].L = cells[i].second;
                    out[i].eps_tol = 1e-12;
                    out[i].diagnostic = e.what();
                    continue;
                }
                std::lock_guard<std::mutex> lock(err_mtx);
                if (!err) err = std::current_exception();
            }
        }
    };
    unsigned nt = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
    nt = std::min<unsigned>(nt, unsigned(cells.size()));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < nt; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
    std::sort(out.begin(), out.end(), [](const SweepRecord& a, const SweepRecord& b) {
        return a.delta != b.delta ? a.delta > b.delta : a.L < b.L;
    });
    return out;
}

// -------- regression on sweep records

inline bool in_plateau(const SweepRecord& r, double factor = 3.0) { return r.energy_error <= factor * r.eps_tol; }

inline bool usable(const SweepRecord& r, double plateau_factor)
{
    return r.converged && std::isfinite(r.energy_error) && r.energy_error > 0 && !in_plateau(r, plateau_factor);
}

// Usable records of one delta sorted by L, with the stagnating tail removed:
// trailing levels that gain less than a factor `min_gain` over their
// predecessor sit on the truncation floor, which the energy norm amplifies
// like 1/h and so can lie well above eps_tol.
inline std::vector<SweepRecord> asymptotic_records(const std::vector<SweepRecord>& records, double delta,
                                                   double plateau_factor = 3.0, double min_gain = 1.2)
{
    std::vector<SweepRecord> v;
    for (const auto& r : records)
        if (r.delta == delta && usable(r, plateau_factor)) v.push_back(r);
    std::sort(v.begin(), v.end(), [](const SweepRecord& a, const SweepRecord& b) { return a.L < b.L; });
    while (v.size() >= 2 && v[v.size() - 2].energy_error < min_gain * v.back().energy_error) v.pop_back();
    return v;
}

struct KappaFit {
    double kappa = 0, b = 0, r2 = 0;
    std::size_t used = 0;
};

// least squares of log10|log2 e| against log10 N_dof over all deltas, plateau records discarded
inline KappaFit estimate_kappa(const std::vector<SweepRecord>& records, double plateau_factor = 3.0)
{
    std::vector<double> x, y, deltas;
    double lo = std::numeric_limits<double>::infinity(), hi = 0;
    for (const auto& r : records)
        if (std::find(deltas.begin(), deltas.end(), r.delta) == deltas.end()) deltas.push_back(r.delta);
    std::vector<SweepRecord> kept;
    for (double d : deltas)
        for (const auto& r : asymptotic_records(records, d, plateau_factor)) kept.push_back(r);
    for (const auto& r : kept) {
        if (!(r.energy_error < 1) || r.n_dof <= 0) continue;
        x.push_back(std::log10(double(r.n_dof)));
        y.push_back(std::log10(std::abs(std::log2(r.energy_error))));
        lo = std::min(lo, double(r.n_dof));
        hi = std::max(hi, double(r.n_dof));
    }
    if (x.size() < 5) throw std::invalid_argument("estimate_kappa: fewer than 5 usable records");
    if (hi < 10 * lo) throw std::invalid_argument("estimate_kappa: records span less than one decade of N_dof");
    const LinearFit f = linear_fit(x, y);
    return {f.slope, std::pow(10.0, f.intercept), f.r2, x.size()};
}

struct RegimeSlopes {
    std::optional<LinearFit> coarse; // h > delta window, L < log2(1/delta) - 2
    std::optional<LinearFit> fine;   // h < delta window, L > log2(1/delta) + 2
};

// slopes of log2 error against L for the records of one delta
inline RegimeSlopes regime_slopes(const std::vector<SweepRecord>& records, double delta, double plateau_factor = 3.0)
{
    const double kink = std::log2(1 / delta);
    std::vector<double> xc, yc, xf, yf;
    for (const auto& r : asymptotic_records(records, delta, plateau_factor)) {
        if (r.L < kink - 2) xc.push_back(r.L), yc.push_back(std::log2(r.energy_error));
        if (r.L > kink + 2) xf.push_back(r.L), yf.push_back(std::log2(r.energy_error));
    }
    RegimeSlopes s;
    if (xc.size() >= 2) s.coarse = linear_fit(xc, yc);
    if (xf.size() >= 2) s.fine = linear_fit(xf, yf);
    return s;
}

// -------- CSV

inline constexpr const char* kCsvHeader = "delta,L,eps_tol,n_dof,max_rank,energy_error,sweeps,converged,wall_time_ms";

inline std::string format_double(double v)
{
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline void emit_csv(const std::vector<SweepRecord>& records, std::ostream& os)
{
    os << kCsvHeader << '\n';
    for (const auto& r : records)
        os << format_double(r.delta) << ',' << r.L << ',' << format_double(r.eps_tol) << ',' << r.n_dof << ','
           << r.max_rank << ',' << format_double(r.energy_error) << ',' << r.sweeps << ',' << (r.converged ? 1 : 0)
           << ',' << format_double(r.wall_time_ms) << '\n';
}

inline void emit_csv(const std::vector<SweepRecord>& records, const std::string& path)
{
    std::ofstream f(path);
    if (!f) throw std::ios_base::failure("emit_csv: cannot open " + path);
    emit_csv(records, f);
    if (!f) throw std::ios_base::failure("emit_csv: write failed for " + path);
}

namespace detail {

template <class T>
T parse_field(const std::string& s, int line)
{
    T v{};
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        // from_chars rejects "nan" spellings with sign, handle the emitted forms
        if constexpr (std::is_floating_point_v<T>)
            if (s == "nan" || s == "-nan") return std::numeric_limits<T>::quiet_NaN();
        throw std::invalid_argument("parse_csv: bad field '" + s + "' on line " + std::to_string(line));
    }
    return v;
}

} // namespace detail

inline std::vector<SweepRecord> parse_csv(std::istream& is)
{
    std::string line;
    if (!std::getline(is, line) || line != kCsvHeader) throw std::invalid_argument("parse_csv: missing or unexpected header");
    std::vector<SweepRecord> out;
    int ln = 1;
    while (std::getline(is, line)) {
        ++ln;
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        for (std::string tok; std::getline(ss, tok, ',');) f.push_back(tok);
        if (f.size() != 9) throw std::invalid_argument("parse_csv: expected 9 fields on line " + std::to_string(ln));
        SweepRecord r;
        r.delta = detail::parse_field<double>(f[0], ln);
        r.L = detail::parse_field<int>(f[1], ln);
        r.eps_tol = detail::parse_field<double>(f[2], ln);
        r.n_dof = detail::parse_field<long long>(f[3], ln);
        r.max_rank = detail::parse_field<int>(f[4], ln);
        r.energy_error = detail::parse_field<double>(f[5], ln);
        r.sweeps = detail::parse_field<int>(f[6], ln);
        r.converged = detail::parse_field<int>(f[7], ln) != 0;
        r.wall_time_ms = detail::parse_field<double>(f[8], ln);
        out.push_back(r);
    }
    return out;
}

inline std::vector<SweepRecord> parse_csv(const std::string& path)
{
    std::ifstream f(path);
    if (!f) throw std::ios_base::failure("parse_csv: cannot open " + path);
    return parse_csv(f);
}

// gnuplot script: error vs L, and error vs N_dof^(1/2) and N_dof^(1/3)
inline void emit_plot_script(const std::vector<SweepRecord>& records, std::ostream& os, const std::string& csv_path)
{
    std::vector<double> deltas;
    for (const auto& r : records)
        if (std::find(deltas.begin(), deltas.end(), r.delta) == deltas.end()) deltas.push_back(r.delta);
    auto plot = [&](const std::string& xexpr) {
        os << "plot ";
        for (std::size_t k = 0; k < deltas.size(); ++k) {
            const std::string d = format_double(deltas[k]);
            os << (k ? ", \\\n     " : "") << "'" << csv_path << "' using (abs($1-" << d << ")<=1e-15*" << d << " && $8==1 ? "
               << xexpr << " : 1/0):6 with linespoints title 'delta = " << d << "'";
        }
        os << "\n\n";
    };
    os << "set datafile separator ','\n"
       << "set key autotitle columnhead\n"
       << "set logscale y\n"
       << "set format y '10^{%L}'\n"
       << "set ylabel 'energy error'\n\n";
    os << "set xlabel 'L = log2(number of grid points)'\n";
    plot("$2");
    os << "set xlabel 'N_dof^{1/2}'\n";
    plot("sqrt($4)");
    os << "set xlabel 'N_dof^{1/3}'\n";
    plot("($4)**(1.0/3)");
}

inline void emit_plot_script(const std::vector<SweepRecord>& records, const std::string& path, const std::string& csv_path)
{
    std::ofstream f(path);
    if (!f) throw std::ios_base::failure("emit_plot_script: cannot open " + path);
    emit_plot_script(records, f, csv_path);
}

} // namespace qttsp
