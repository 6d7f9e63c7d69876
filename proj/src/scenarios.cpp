#include "geophase/scenarios.hpp"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <mutex>
#include <thread>

#include "json.hpp"

#include "geophase/connection.hpp"
#include "geophase/dynamics.hpp"
#include "geophase/errors.hpp"
#include "geophase/holonomy.hpp"
#include "geophase/potential.hpp"
#include "geophase/spectrum.hpp"

namespace geophase {

namespace {

using ojson = nlohmann::ordered_json;

constexpr double kPi = 3.14159265358979323846;
constexpr double kNoWarn = std::numeric_limits<double>::infinity();

// Ordered resolved-parameter echo, written into every artifact.
using Echo = std::vector<std::pair<std::string, std::string>>;

void echo_num(Echo& e, const std::string& k, double v) { e.emplace_back(k, format_number(v)); }
void echo_int(Echo& e, const std::string& k, long long v) { e.emplace_back(k, format_number(v)); }
void echo_str(Echo& e, const std::string& k, const std::string& v) { e.emplace_back(k, v); }
void echo_bool(Echo& e, const std::string& k, bool v) { e.emplace_back(k, v ? "true" : "false"); }
void echo_list(Echo& e, const std::string& k, const std::vector<double>& v) {
    std::string s;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) s += ", ";
        s += format_number(v[i]);
    }
    e.emplace_back(k, s);
}

std::vector<double> linspace(double lo, double hi, long long count, const std::string& what) {
    if (count < 1) throw config_error("config: " + what + " count must be at least 1");
    if (count > 100000) throw config_error("config: " + what + " count is unreasonably large");
    if (hi < lo) throw config_error("config: " + what + " range is reversed");
    std::vector<double> v(static_cast<size_t>(count));
    if (count == 1) {
        v[0] = lo;
        return v;
    }
    for (long long i = 0; i < count; ++i)
        v[static_cast<size_t>(i)] = lo + (hi - lo) * static_cast<double>(i) / (count - 1);
    return v;
}

void run_pool(long long jobs, int threads, const std::function<void(long long)>& fn) {
    threads = std::max(1, std::min(threads, 256));
    if (threads == 1 || jobs <= 1) {
        for (long long i = 0; i < jobs; ++i) fn(i);
        return;
    }
    std::atomic<long long> next{0};
    std::exception_ptr err;
    std::mutex err_mutex;
    auto worker = [&] {
        for (;;) {
            const long long i = next.fetch_add(1);
            if (i >= jobs) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!err) err = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    const int n = static_cast<int>(std::min<long long>(threads, jobs));
    pool.reserve(static_cast<size_t>(n));
    for (int t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

std::string csv_header(const std::string& scenario, const std::string& schema, const Echo& echo) {
    std::string out = "# geophase " + scenario + "\n# schema: " + schema + "\n";
    for (const auto& [k, v] : echo) out += "# " + k + " = " + v + "\n";
    return out;
}

void write_text_file(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path p(path);
    if (p.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(p.parent_path(), ec);
        if (ec)
            throw config_error("output: cannot create directory \"" + p.parent_path().string() +
                               "\": " + ec.message());
    }
    std::ofstream f(p, std::ios::binary);
    if (!f) throw config_error("output: cannot open \"" + path + "\" for writing");
    f << content;
    f.close();
    if (!f) throw config_error("output: failed writing \"" + path + "\"");
}

ojson echo_json(const Echo& echo) {
    ojson j = ojson::object();
    for (const auto& [k, v] : echo) j[k] = v;
    return j;
}

void check_sections(const ConfigDoc& doc, const std::string& scenario,
                    const std::vector<std::string>& allowed) {
    for (const ConfigSection& s : doc.sections) {
        bool ok = false;
        for (const std::string& a : allowed) ok = ok || a == s.name;
        if (!ok)
            throw config_error("config: section [" + s.name + "] is not used by scenario " +
                               scenario + " (" + s.loc.str() + ")");
    }
}

PotentialModel read_potential(ConfigReader& r, Echo& echo) {
    const std::string family = r.get_string("potential", "family", "structured-well");
    if (family != "structured-well")
        throw config_error(
            "config: [potential] family: the registered scenarios run on the structured well "
            "(got \"" +
            family + "\"); other families are library-level");
    const double a = r.get_double("potential", "a", 1.0);
    if (!(a > 0.0)) throw config_error("config: [potential] a must be positive");
    PotentialModel model = make_structured_well(a);
    const double v0 = r.get_double("potential", "v0", model.sw.V0);
    if (!(v0 > 0.0)) throw config_error("config: [potential] v0 must be positive");
    model.sw.V0 = v0;
    echo_str(echo, "family", family);
    echo_num(echo, "a", a);
    echo_num(echo, "v0", v0);
    return model;
}

long long read_n(ConfigReader& r, Echo& echo) {
    const long long n = r.get_int("solver", "n", 2000);
    if (n < 16 || n > 2000000)
        throw config_error("config: [solver] n must be between 16 and 2000000");
    echo_int(echo, "n", n);
    return n;
}

// The thread count shapes scheduling only, never the data, and is kept out
// of the artifact echo so identical configs give identical bytes at any
// --threads.
int read_threads(ConfigReader& r, const RunOptions& opts) {
    long long t = r.get_int("solver", "threads", 1);
    if (opts.threads > 0) t = opts.threads;
    if (t < 1 || t > 256) throw config_error("config: [solver] threads must be in [1, 256]");
    return static_cast<int>(t);
}

ConnectionMethod read_method(ConfigReader& r, Echo& echo, FdParams& fd,
                             const std::string& fallback) {
    const std::string m = r.get_string("solver", "method", fallback);
    ConnectionMethod method;
    if (m == "hellmann-feynman")
        method = ConnectionMethod::hellmann_feynman;
    else if (m == "finite-difference")
        method = ConnectionMethod::finite_difference;
    else if (m == "analytic-structured-well")
        method = ConnectionMethod::analytic_structured_well;
    else
        throw config_error("config: [solver] method: unknown connection method \"" + m +
                           "\" (hellmann-feynman, finite-difference, analytic-structured-well)");
    fd.delta = r.get_double("solver", "fd_delta", fd.delta);
    fd.richardson = r.get_bool("solver", "fd_richardson", fd.richardson);
    if (!(fd.delta > 0.0) || fd.delta > 0.1)
        throw config_error("config: [solver] fd_delta must be in (0, 0.1]");
    echo_str(echo, "method", m);
    if (method == ConnectionMethod::finite_difference) {
        echo_num(echo, "fd_delta", fd.delta);
        echo_bool(echo, "fd_richardson", fd.richardson);
    }
    return method;
}

std::string read_out_dir(ConfigReader& r, const RunOptions& opts) {
    const std::string dir = r.get_string("output", "dir", "out");
    return opts.out_dir.empty() ? dir : opts.out_dir;
}

void echo_seed(const RunOptions& opts, Echo& echo) {
    // Recorded for provenance only; every algorithm in the pipeline is
    // deterministic and nothing consumes it.
    if (opts.seed_set) echo_int(echo, "seed", static_cast<long long>(opts.seed));
}

ConnectionSample sample_connection(const PotentialModel& model, const SpectralSolution& sol,
                                   ConnectionMethod method, const FdParams& fd) {
    switch (method) {
        case ConnectionMethod::hellmann_feynman: return connection_hf(model, sol);
        case ConnectionMethod::finite_difference: return connection_fd(model, sol, fd);
        case ConnectionMethod::analytic_structured_well: return connection_analytic(model, sol);
    }
    throw numerical_error("unreachable connection method");
}

std::string join_path(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

// ---------------------------------------------------------------- fig2b ----

struct Fig2bPlan {
    PotentialModel model;
    std::vector<double> L, w;
    int levels = 3;
    long long n = 2000;
    int threads = 1;
    std::string dir;
    Echo echo;
};

Fig2bPlan resolve_fig2b(const ConfigDoc& doc, const RunOptions& opts) {
    check_sections(doc, "fig2b-energies", {"scenario", "potential", "solver", "output"});
    ConfigReader r(doc);
    r.require_string("scenario", "name");
    Fig2bPlan p;
    echo_str(p.echo, "scenario", "fig2b-energies");
    p.model = read_potential(r, p.echo);
    const double l_min = r.get_double("scenario", "l_min", 0.1);
    const double l_max = r.get_double("scenario", "l_max", 0.6);
    const long long l_count = r.get_int("scenario", "l_count", 40);
    const double w_min = r.get_double("scenario", "w_min", 0.0);
    const double w_max = r.get_double("scenario", "w_max", 0.05);
    const long long w_count = r.get_int("scenario", "w_count", 20);
    if (l_min < 0.0 || w_min < 0.0)
        throw config_error("config: [scenario] grid ranges must be nonnegative");
    p.L = linspace(l_min, l_max, l_count, "[scenario] l");
    p.w = linspace(w_min, w_max, w_count, "[scenario] w");
    const long long levels = r.get_int("scenario", "levels", 3);
    if (levels < 1 || levels > 16)
        throw config_error("config: [scenario] levels must be in [1, 16]");
    p.levels = static_cast<int>(levels);
    echo_num(p.echo, "l_min", l_min);
    echo_num(p.echo, "l_max", l_max);
    echo_int(p.echo, "l_count", l_count);
    echo_num(p.echo, "w_min", w_min);
    echo_num(p.echo, "w_max", w_max);
    echo_int(p.echo, "w_count", w_count);
    echo_int(p.echo, "levels", levels);
    p.n = read_n(r, p.echo);
    p.threads = read_threads(r, opts);
    p.dir = read_out_dir(r, opts);
    echo_seed(opts, p.echo);
    r.finish();
    return p;
}

RunOutcome execute_fig2b(const Fig2bPlan& p) {
    const long long nw = static_cast<long long>(p.w.size());
    const long long jobs = static_cast<long long>(p.L.size()) * nw;
    std::vector<std::string> rows(static_cast<size_t>(jobs));
    run_pool(jobs, p.threads, [&](long long idx) {
        const double L = p.L[static_cast<size_t>(idx / nw)];
        const double w = p.w[static_cast<size_t>(idx % nw)];
        const SpectralSolution sol =
            eigensolve(p.model, {L, w}, p.levels - 1, static_cast<int>(p.n));
        std::string row = format_number(L) + "," + format_number(w);
        for (int l = 0; l < p.levels; ++l) row += "," + format_number(sol.eigenvalues[l]);
        rows[static_cast<size_t>(idx)] = std::move(row);
    });
    std::string schema = "L,w";
    for (int l = 0; l < p.levels; ++l) schema += ",eps" + std::to_string(l);
    std::string body = csv_header("fig2b-energies", schema, p.echo);
    for (const std::string& row : rows) body += row + "\n";
    const std::string path = join_path(p.dir, "energies.csv");
    write_text_file(path, body);
    RunOutcome out;
    out.scenario = "fig2b-energies";
    out.files.push_back(path);
    out.notes.push_back("wrote " + path + " (" + format_number(jobs) + " rows)");
    return out;
}

// ----------------------------------------------------------------- fig3 ----

struct Fig3Plan {
    PotentialModel model;
    std::vector<double> L, w;
    int lmax = 2;
    long long n = 2000;
    ConnectionMethod method = ConnectionMethod::analytic_structured_well;
    FdParams fd;
    int threads = 1;
    bool inset = true;
    double inset_l_in = 0.35, inset_w_in = 0.0, inset_l_fin = 0.5, inset_w_fin = 0.02;
    long long inset_samples = 200;
    std::string dir;
    Echo echo;
};

Fig3Plan resolve_fig3(const ConfigDoc& doc, const RunOptions& opts) {
    check_sections(doc, "fig3-couplings", {"scenario", "potential", "solver", "output"});
    ConfigReader r(doc);
    r.require_string("scenario", "name");
    Fig3Plan p;
    echo_str(p.echo, "scenario", "fig3-couplings");
    p.model = read_potential(r, p.echo);
    const double l_min = r.get_double("scenario", "l_min", 0.35);
    const double l_max = r.get_double("scenario", "l_max", 0.5);
    const long long l_count = r.get_int("scenario", "l_count", 40);
    const double w_min = r.get_double("scenario", "w_min", 0.0);
    const double w_max = r.get_double("scenario", "w_max", 0.01);
    const long long w_count = r.get_int("scenario", "w_count", 20);
    if (l_min < 0.0 || w_min < 0.0)
        throw config_error("config: [scenario] grid ranges must be nonnegative");
    p.L = linspace(l_min, l_max, l_count, "[scenario] l");
    p.w = linspace(w_min, w_max, w_count, "[scenario] w");
    p.inset = r.get_bool("scenario", "inset", true);
    p.inset_l_in = r.get_double("scenario", "inset_l_in", 0.35);
    p.inset_w_in = r.get_double("scenario", "inset_w_in", 0.0);
    p.inset_l_fin = r.get_double("scenario", "inset_l_fin", 0.5);
    p.inset_w_fin = r.get_double("scenario", "inset_w_fin", 0.02);
    p.inset_samples = r.get_int("scenario", "inset_samples", 200);
    if (p.inset_samples < 2 || p.inset_samples > 100000)
        throw config_error("config: [scenario] inset_samples must be in [2, 100000]");
    if (p.inset_l_in < 0 || p.inset_w_in < 0 || p.inset_l_fin < 0 || p.inset_w_fin < 0)
        throw config_error("config: [scenario] inset endpoints must be nonnegative");
    echo_num(p.echo, "l_min", l_min);
    echo_num(p.echo, "l_max", l_max);
    echo_int(p.echo, "l_count", l_count);
    echo_num(p.echo, "w_min", w_min);
    echo_num(p.echo, "w_max", w_max);
    echo_int(p.echo, "w_count", w_count);
    const long long lmax = r.get_int("solver", "lmax", 2);
    if (lmax < 1 || lmax > 15) throw config_error("config: [solver] lmax must be in [1, 15]");
    p.lmax = static_cast<int>(lmax);
    echo_int(p.echo, "lmax", lmax);
    p.method = read_method(r, p.echo, p.fd, "analytic-structured-well");
    p.n = read_n(r, p.echo);
    p.threads = read_threads(r, opts);
    echo_bool(p.echo, "inset", p.inset);
    if (p.inset) {
        echo_num(p.echo, "inset_l_in", p.inset_l_in);
        echo_num(p.echo, "inset_w_in", p.inset_w_in);
        echo_num(p.echo, "inset_l_fin", p.inset_l_fin);
        echo_num(p.echo, "inset_w_fin", p.inset_w_fin);
        echo_int(p.echo, "inset_samples", p.inset_samples);
    }
    p.dir = read_out_dir(r, opts);
    echo_seed(opts, p.echo);
    r.finish();
    return p;
}

std::string lambda_row_tail(const LambdaSample& s) {
    return format_number(s.lambda[0]) + "," + format_number(s.lambda[1]) + "," +
           format_number(s.dominance_ratio);
}

RunOutcome execute_fig3(const Fig3Plan& p) {
    RunOutcome out;
    out.scenario = "fig3-couplings";

    const long long nw = static_cast<long long>(p.w.size());
    const long long jobs = static_cast<long long>(p.L.size()) * nw;
    std::vector<std::string> rows(static_cast<size_t>(jobs));
    run_pool(jobs, p.threads, [&](long long idx) {
        const double L = p.L[static_cast<size_t>(idx / nw)];
        const double w = p.w[static_cast<size_t>(idx % nw)];
        const SpectralSolution sol = eigensolve(p.model, {L, w}, p.lmax, static_cast<int>(p.n));
        ConnectionField field;
        field.method = p.method;
        field.samples.push_back(sample_connection(p.model, sol, p.method, p.fd));
        const LambdaField lam = two_level_lambda(field, kNoWarn);
        rows[static_cast<size_t>(idx)] = format_number(L) + "," + format_number(w) + "," +
                                         lambda_row_tail(lam.samples.front());
    });
    std::string body = csv_header("fig3-couplings", "L,w,lambda_l,lambda_w,dominance", p.echo);
    for (const std::string& row : rows) body += row + "\n";
    const std::string surface_path = join_path(p.dir, "couplings.csv");
    write_text_file(surface_path, body);
    out.files.push_back(surface_path);
    out.notes.push_back("wrote " + surface_path + " (" + format_number(jobs) + " rows)");

    if (p.inset) {
        const double dl = p.inset_l_fin - p.inset_l_in;
        const double dw = p.inset_w_fin - p.inset_w_in;
        const double arc = std::sqrt(dl * dl + dw * dw);
        std::vector<PathSample> samples(static_cast<size_t>(p.inset_samples));
        for (long long i = 0; i < p.inset_samples; ++i) {
            const double t = static_cast<double>(i) / (p.inset_samples - 1);
            samples[static_cast<size_t>(i)] =
                PathSample{arc * t, {p.inset_l_in + t * dl, p.inset_w_in + t * dw}};
        }
        const ControlPath path = build_path(samples, false);
        const auto chain = solve_chain(p.model, path, p.lmax, static_cast<int>(p.n));
        const ConnectionField field = build_connection_field(p.model, path, chain, p.method, p.fd);
        const LambdaField lam = two_level_lambda(field, kNoWarn);
        std::string inset =
            csv_header("fig3-couplings", "s,L,w,lambda_l,lambda_w,dominance", p.echo);
        for (size_t i = 0; i < lam.samples.size(); ++i) {
            const LambdaSample& s = lam.samples[i];
            inset += format_number(path.samples[i].y) + "," + format_number(s.R[0]) + "," +
                     format_number(s.R[1]) + "," + lambda_row_tail(s) + "\n";
        }
        const std::string inset_path = join_path(p.dir, "inset.csv");
        write_text_file(inset_path, inset);
        out.files.push_back(inset_path);
        out.notes.push_back("wrote " + inset_path + " (" + format_number(p.inset_samples) +
                            " rows)");
    }
    return out;
}

// ----------------------------------------------------------------- fig4 ----

struct Fig4Plan {
    PotentialModel model;
    double l_in = 0.3, w_in = 0.0;
    std::vector<double> L_fin, w_fin;
    long long samples_per_edge = 64;
    int lmax = 1;
    long long n = 2000;
    ConnectionMethod method = ConnectionMethod::analytic_structured_well;
    FdParams fd;
    int threads = 1;
    std::string dir;
    Echo echo;
};

Fig4Plan resolve_fig4(const ConfigDoc& doc, const RunOptions& opts) {
    check_sections(doc, "fig4-alpha", {"scenario", "potential", "solver", "output"});
    ConfigReader r(doc);
    r.require_string("scenario", "name");
    Fig4Plan p;
    echo_str(p.echo, "scenario", "fig4-alpha");
    p.model = read_potential(r, p.echo);
    p.l_in = r.get_double("scenario", "l_in", 0.3);
    p.w_in = r.get_double("scenario", "w_in", 0.0);
    const double lfin_min = r.get_double("scenario", "lfin_min", 0.3);
    const double lfin_max = r.get_double("scenario", "lfin_max", 0.6);
    const long long lfin_count = r.get_int("scenario", "lfin_count", 30);
    const double wfin_min = r.get_double("scenario", "wfin_min", 0.0);
    const double wfin_max = r.get_double("scenario", "wfin_max", 0.05);
    const long long wfin_count = r.get_int("scenario", "wfin_count", 20);
    if (p.l_in < 0.0 || p.w_in < 0.0 || lfin_min < 0.0 || wfin_min < 0.0)
        throw config_error("config: [scenario] corner coordinates must be nonnegative");
    p.L_fin = linspace(lfin_min, lfin_max, lfin_count, "[scenario] lfin");
    p.w_fin = linspace(wfin_min, wfin_max, wfin_count, "[scenario] wfin");
    p.samples_per_edge = r.get_int("scenario", "samples_per_edge", 64);
    if (p.samples_per_edge < 1 || p.samples_per_edge > 100000)
        throw config_error("config: [scenario] samples_per_edge must be in [1, 100000]");
    echo_num(p.echo, "l_in", p.l_in);
    echo_num(p.echo, "w_in", p.w_in);
    echo_num(p.echo, "lfin_min", lfin_min);
    echo_num(p.echo, "lfin_max", lfin_max);
    echo_int(p.echo, "lfin_count", lfin_count);
    echo_num(p.echo, "wfin_min", wfin_min);
    echo_num(p.echo, "wfin_max", wfin_max);
    echo_int(p.echo, "wfin_count", wfin_count);
    echo_int(p.echo, "samples_per_edge", p.samples_per_edge);
    const long long lmax = r.get_int("solver", "lmax", 1);
    if (lmax < 1 || lmax > 15) throw config_error("config: [solver] lmax must be in [1, 15]");
    p.lmax = static_cast<int>(lmax);
    echo_int(p.echo, "lmax", lmax);
    p.method = read_method(r, p.echo, p.fd, "analytic-structured-well");
    p.n = read_n(r, p.echo);
    p.threads = read_threads(r, opts);
    p.dir = read_out_dir(r, opts);
    echo_seed(opts, p.echo);
    r.finish();
    return p;
}

RunOutcome execute_fig4(const Fig4Plan& p) {
    const long long nw = static_cast<long long>(p.w_fin.size());
    const long long jobs = static_cast<long long>(p.L_fin.size()) * nw;
    std::vector<std::string> rows(static_cast<size_t>(jobs));
    run_pool(jobs, p.threads, [&](long long idx) {
        const double lf = p.L_fin[static_cast<size_t>(idx / nw)];
        const double wf = p.w_fin[static_cast<size_t>(idx % nw)];
        RectangleSpec rect;
        rect.L_in = p.l_in;
        rect.w_in = p.w_in;
        rect.L_fin = lf;
        rect.w_fin = wf;
        rect.samples_per_edge = static_cast<int>(p.samples_per_edge);
        rect.y_start = 0.0;
        rect.y_length = 1.0;  // the line integral is parameterization-free
        const ControlPath path = build_path(rect);
        const auto chain = solve_chain(p.model, path, p.lmax, static_cast<int>(p.n));
        const ConnectionField field = build_connection_field(p.model, path, chain, p.method, p.fd);
        const LambdaField lam = two_level_lambda(field, kNoWarn);
        const Holonomy h = abelian_phase_line(lam, true);
        rows[static_cast<size_t>(idx)] = format_number(lf) + "," + format_number(wf) + "," +
                                         format_number(h.alpha ? *h.alpha : 0.0);
    });
    std::string body = csv_header("fig4-alpha", "L_fin,w_fin,alpha", p.echo);
    for (const std::string& row : rows) body += row + "\n";
    const std::string path = join_path(p.dir, "alpha.csv");
    write_text_file(path, body);
    RunOutcome out;
    out.scenario = "fig4-alpha";
    out.files.push_back(path);
    out.notes.push_back("wrote " + path + " (" + format_number(jobs) + " rows)");
    return out;
}

// ----------------------------------------------------------------- gate ----

struct GatePlan {
    PotentialModel model;
    bool rectangle = true;
    RectangleSpec rect;
    std::vector<PathSample> samples;
    bool closed = true;
    int lmax = 3;
    long long n = 2000;
    ConnectionMethod method = ConnectionMethod::analytic_structured_well;
    FdParams fd;
    int threads = 1;
    std::vector<double> epsilon;
    std::vector<cplx> C0;
    IntegrateOptions iopts;
    int l0 = 1, l_off = 2;
    ValidityThresholds thr;
    std::string dir;
    Echo echo;
};

GatePlan resolve_gate(const ConfigDoc& doc, const RunOptions& opts) {
    check_sections(doc, "gate-validation",
                   {"scenario", "potential", "path", "solver", "dynamics", "output"});
    ConfigReader r(doc);
    r.require_string("scenario", "name");
    GatePlan p;
    echo_str(p.echo, "scenario", "gate-validation");
    p.model = read_potential(r, p.echo);

    const std::string type = r.get_string("path", "type", "rectangle");
    echo_str(p.echo, "path_type", type);
    if (type == "rectangle") {
        p.rectangle = true;
        p.rect.L_in = r.get_double("path", "l_in", 0.3);
        p.rect.w_in = r.get_double("path", "w_in", 0.0);
        p.rect.L_fin = r.get_double("path", "l_fin", 0.5);
        p.rect.w_fin = r.get_double("path", "w_fin", 0.02);
        const long long spe = r.get_int("path", "samples_per_edge", 64);
        if (spe < 1 || spe > 100000)
            throw config_error("config: [path] samples_per_edge must be in [1, 100000]");
        p.rect.samples_per_edge = static_cast<int>(spe);
        p.rect.y_start = r.get_double("path", "y_start", 0.0);
        p.rect.y_length = r.get_double("path", "y_length", 100.0);
        if (p.rect.L_in < 0 || p.rect.w_in < 0 || p.rect.L_fin < 0 || p.rect.w_fin < 0)
            throw config_error("config: [path] rectangle corners must be nonnegative");
        if (!(p.rect.y_length > 0.0))
            throw config_error("config: [path] y_length must be positive");
        p.closed = true;
        echo_num(p.echo, "l_in", p.rect.L_in);
        echo_num(p.echo, "w_in", p.rect.w_in);
        echo_num(p.echo, "l_fin", p.rect.L_fin);
        echo_num(p.echo, "w_fin", p.rect.w_fin);
        echo_int(p.echo, "samples_per_edge", spe);
        echo_num(p.echo, "y_start", p.rect.y_start);
        echo_num(p.echo, "y_length", p.rect.y_length);
    } else if (type == "samples") {
        p.rectangle = false;
        const std::vector<double> y = r.get_double_list("path", "y", {});
        const std::vector<double> l = r.get_double_list("path", "l", {});
        const std::vector<double> w = r.get_double_list("path", "w", {});
        if (y.size() < 2 || y.size() != l.size() || y.size() != w.size())
            throw config_error(
                "config: [path] y, l, w must be equal-length lists with at least 2 entries");
        p.closed = r.get_bool("path", "closed", true);
        p.samples.resize(y.size());
        for (size_t i = 0; i < y.size(); ++i) {
            if (l[i] < 0 || w[i] < 0)
                throw config_error("config: [path] l and w entries must be nonnegative");
            p.samples[i] = PathSample{y[i], {l[i], w[i]}};
        }
        echo_list(p.echo, "y", y);
        echo_list(p.echo, "l", l);
        echo_list(p.echo, "w", w);
        echo_bool(p.echo, "closed", p.closed);
    } else {
        throw config_error("config: [path] type must be rectangle or samples, got \"" + type +
                           "\"");
    }

    const long long lmax = r.get_int("solver", "lmax", 3);
    if (lmax < 1 || lmax > 15) throw config_error("config: [solver] lmax must be in [1, 15]");
    p.lmax = static_cast<int>(lmax);
    echo_int(p.echo, "lmax", lmax);
    p.method = read_method(r, p.echo, p.fd, "analytic-structured-well");
    p.n = read_n(r, p.echo);
    p.threads = read_threads(r, opts);

    p.epsilon = r.get_double_list("dynamics", "epsilon", {1e3, 1e4, 1e5});
    for (double e : p.epsilon)
        if (!(e > 0.0)) throw config_error("config: [dynamics] epsilon entries must be positive");
    const std::vector<double> c0r = r.get_double_list("dynamics", "c0_real", {1.0, 0.0});
    const std::vector<double> c0i = r.get_double_list("dynamics", "c0_imag", {0.0, 0.0});
    if (c0r.size() != c0i.size() || c0r.size() < 2)
        throw config_error(
            "config: [dynamics] c0_real and c0_imag must be equal-length lists with at least 2 "
            "entries");
    if (static_cast<long long>(c0r.size()) > lmax + 1)
        throw config_error("config: [dynamics] c0 has more levels than the solver retains");
    p.C0.resize(c0r.size());
    for (size_t i = 0; i < c0r.size(); ++i) p.C0[i] = cplx(c0r[i], c0i[i]);
    p.iopts.step_factor = r.get_double("dynamics", "step_factor", 0.05);
    p.iopts.holonomy_step_bound = r.get_double("dynamics", "holonomy_step_bound", 0.5);
    p.iopts.record_trace = r.get_bool("dynamics", "record_trace", false);
    const long long stride = r.get_int("dynamics", "trace_stride", 16);
    if (stride < 1 || stride > 1000000)
        throw config_error("config: [dynamics] trace_stride must be in [1, 1000000]");
    p.iopts.trace_stride = static_cast<int>(stride);
    const long long l0 = r.get_int("dynamics", "l0", 1);
    const long long l_off = r.get_int("dynamics", "l_off", 2);
    if (l0 < 0 || l0 > l_off)
        throw config_error("config: [dynamics] need 0 <= l0 <= l_off");
    if (l_off + 2 > lmax + 1)
        throw config_error(
            "config: [dynamics] validity needs lmax >= l_off + 1 (one level past the cutoff)");
    p.l0 = static_cast<int>(l0);
    p.l_off = static_cast<int>(l_off);
    p.thr.adiabatic = r.get_double("dynamics", "thr_adiabatic", 0.1);
    p.thr.quasi_degeneracy = r.get_double("dynamics", "thr_quasi_degeneracy", 0.1);
    p.thr.wkb = r.get_double("dynamics", "thr_wkb", 0.01);
    if (!(p.thr.adiabatic > 0.0) || !(p.thr.quasi_degeneracy > 0.0) || !(p.thr.wkb > 0.0))
        throw config_error("config: [dynamics] thresholds must be positive");
    echo_list(p.echo, "epsilon", p.epsilon);
    echo_list(p.echo, "c0_real", c0r);
    echo_list(p.echo, "c0_imag", c0i);
    echo_num(p.echo, "step_factor", p.iopts.step_factor);
    echo_num(p.echo, "holonomy_step_bound", p.iopts.holonomy_step_bound);
    echo_int(p.echo, "l0", l0);
    echo_int(p.echo, "l_off", l_off);
    echo_num(p.echo, "thr_adiabatic", p.thr.adiabatic);
    echo_num(p.echo, "thr_quasi_degeneracy", p.thr.quasi_degeneracy);
    echo_num(p.echo, "thr_wkb", p.thr.wkb);
    echo_bool(p.echo, "record_trace", p.iopts.record_trace);
    if (p.iopts.record_trace) echo_int(p.echo, "trace_stride", stride);
    p.dir = read_out_dir(r, opts);
    echo_seed(opts, p.echo);
    r.finish();
    return p;
}

ojson validity_json(const ValidityReport& rep) {
    ojson v = ojson::object();
    ojson pairs = ojson::array();
    ojson integrals = ojson::array();
    for (size_t i = 0; i < rep.adiabatic_pairs.size(); ++i) {
        pairs.push_back({rep.adiabatic_pairs[i].first, rep.adiabatic_pairs[i].second});
        integrals.push_back(rep.adiabatic_integrals[i]);
    }
    v["adiabatic_pairs"] = pairs;
    v["adiabatic_integrals"] = integrals;
    v["quasi_degeneracy_ratio"] = rep.quasi_degeneracy_ratio;
    v["wkb_ratio"] = rep.wkb_ratio;
    v["max_step_knorm"] = rep.max_step_knorm;
    v["thresholds"] = {{"adiabatic", rep.thr_adiabatic},
                       {"quasi_degeneracy", rep.thr_quasi_degeneracy},
                       {"wkb", rep.thr_wkb}};
    v["adiabatic_ok"] = rep.adiabatic_ok;
    v["quasi_degeneracy_ok"] = rep.quasi_degeneracy_ok;
    v["wkb_ok"] = rep.wkb_ok;
    v["all_ok"] = rep.all_ok();
    return v;
}

RunOutcome execute_gate(const GatePlan& p) {
    const ControlPath path = p.rectangle ? build_path(p.rect) : build_path(p.samples, p.closed);
    const auto chain = solve_chain(p.model, path, p.lmax, static_cast<int>(p.n));
    const ConnectionField field = build_connection_field(p.model, path, chain, p.method, p.fd);
    const auto omegas = assemble_omega(chain);
    const int dim = static_cast<int>(p.C0.size());
    const ConnectionField field_dyn = truncate_field(field, dim);
    const auto omegas_dyn = truncate_omega(omegas, dim);

    const LambdaField lam = two_level_lambda(field);
    const Holonomy line = abelian_phase_line(lam, path.closed);

    ojson j = ojson::object();
    j["scenario"] = "gate-validation";
    j["resolved"] = echo_json(p.echo);
    j["alpha_line"] = line.alpha ? ojson(*line.alpha) : ojson(nullptr);
    j["lambda_warnings"] = lam.warnings.size();

    RunOutcome out;
    out.scenario = "gate-validation";

    ojson runs = ojson::array();
    std::vector<std::pair<std::string, std::string>> traces;
    for (size_t i = 0; i < p.epsilon.size(); ++i) {
        const double eps = p.epsilon[i];
        const PropagationResult res =
            integrate_coupled(path, field_dyn, omegas_dyn, eps, p.C0, p.iopts);
        const ValidityReport rep =
            validity_report(path, field, omegas, eps, p.l0, p.l_off, p.thr);
        double n0 = 0.0, nf = 0.0;
        for (const cplx& z : p.C0) n0 += std::norm(z);
        for (const cplx& z : res.final_state.C) nf += std::norm(z);
        ojson run = ojson::object();
        run["epsilon"] = eps;
        run["alpha"] = res.alpha ? ojson(*res.alpha) : ojson(nullptr);
        run["fidelity"] = res.fidelity;
        run["leakage"] = res.leakage;
        run["dynamical_phase"] = res.dynamical_phase;
        run["norm_drift"] = std::abs(nf - n0);
        run["validity"] = validity_json(rep);
        runs.push_back(run);
        if (!rep.all_ok()) out.validity_red = true;
        out.notes.push_back(
            "epsilon " + format_number(eps) + ": fidelity " + format_number(res.fidelity) +
            ", leakage " + format_number(res.leakage) + ", validity " +
            (rep.all_ok() ? "green" : "red"));
        if (p.iopts.record_trace) {
            Echo techo = p.echo;
            echo_num(techo, "trace_epsilon", eps);
            std::string schema = "y";
            for (int l = 0; l < dim; ++l) schema += ",p" + std::to_string(l);
            std::string body = csv_header("gate-validation", schema, techo);
            for (size_t k = 0; k < res.trace_y.size(); ++k) {
                body += format_number(res.trace_y[k]);
                for (int l = 0; l < dim; ++l)
                    body += "," + format_number(res.trace_pop[k][static_cast<size_t>(l)]);
                body += "\n";
            }
            traces.emplace_back("trace-" + std::to_string(i) + ".csv", std::move(body));
        }
    }
    j["runs"] = runs;
    j["validity_red"] = out.validity_red;

    const std::string report_path = join_path(p.dir, "gate.json");
    write_text_file(report_path, j.dump(2) + "\n");
    out.files.push_back(report_path);
    out.notes.insert(out.notes.begin(),
                     "wrote " + report_path + " (alpha_line " +
                         (line.alpha ? format_number(*line.alpha) : std::string("none")) + ")");
    for (const auto& [name, body] : traces) {
        const std::string tp = join_path(p.dir, name);
        write_text_file(tp, body);
        out.files.push_back(tp);
        out.notes.push_back("wrote " + tp);
    }
    return out;
}

// ------------------------------------------------------------------ su3 ----

struct Su3Plan {
    double alpha1 = kPi / 4, alpha2 = kPi / 4;
    int l1 = 0, lp1 = 1, l2 = 0, lp2 = 2, dim = 3;
    std::string dir;
    Echo echo;
};

Su3Plan resolve_su3(const ConfigDoc& doc, const RunOptions& opts) {
    check_sections(doc, "su3-concat", {"scenario", "output"});
    ConfigReader r(doc);
    r.require_string("scenario", "name");
    Su3Plan p;
    echo_str(p.echo, "scenario", "su3-concat");
    p.alpha1 = r.get_double("scenario", "alpha1", kPi / 4);
    p.alpha2 = r.get_double("scenario", "alpha2", kPi / 4);
    const long long dim = r.get_int("scenario", "dim", 3);
    if (dim < 2 || dim > 16) throw config_error("config: [scenario] dim must be in [2, 16]");
    p.dim = static_cast<int>(dim);
    auto read_pair = [&](const char* kl, const char* klp, int dl, int dlp, int& a, int& b) {
        const long long l = r.get_int("scenario", kl, dl);
        const long long lp = r.get_int("scenario", klp, dlp);
        if (l < 0 || lp <= l || lp >= dim)
            throw config_error(std::string("config: [scenario] need 0 <= ") + kl + " < " + klp +
                               " < dim");
        a = static_cast<int>(l);
        b = static_cast<int>(lp);
    };
    read_pair("l1", "lp1", 0, 1, p.l1, p.lp1);
    read_pair("l2", "lp2", 0, 2, p.l2, p.lp2);
    echo_num(p.echo, "alpha1", p.alpha1);
    echo_int(p.echo, "l1", p.l1);
    echo_int(p.echo, "lp1", p.lp1);
    echo_num(p.echo, "alpha2", p.alpha2);
    echo_int(p.echo, "l2", p.l2);
    echo_int(p.echo, "lp2", p.lp2);
    echo_int(p.echo, "dim", dim);
    p.dir = read_out_dir(r, opts);
    echo_seed(opts, p.echo);
    r.finish();
    return p;
}

ojson cmat_json(const CMat& m) {
    ojson re = ojson::array(), im = ojson::array();
    for (int i = 0; i < m.rows; ++i) {
        ojson rrow = ojson::array(), irow = ojson::array();
        for (int k = 0; k < m.cols; ++k) {
            rrow.push_back(m(i, k).real());
            irow.push_back(m(i, k).imag());
        }
        re.push_back(rrow);
        im.push_back(irow);
    }
    return ojson{{"re", re}, {"im", im}};
}

RunOutcome execute_su3(const Su3Plan& p) {
    const Holonomy h1 = embed_two_level(p.alpha1, p.l1, p.lp1, p.dim);
    const Holonomy h2 = embed_two_level(p.alpha2, p.l2, p.lp2, p.dim);
    // compose(a, b).U = a.U b.U applies b first; "forward" runs rotation 1
    // then rotation 2.
    const Holonomy forward = compose(h2, h1);
    const Holonomy reversed = compose(h1, h2);
    const double diff = frobenius_norm(forward.U - reversed.U);

    ojson j = ojson::object();
    j["scenario"] = "su3-concat";
    j["resolved"] = echo_json(p.echo);
    j["u_forward"] = cmat_json(forward.U);
    j["u_reversed"] = cmat_json(reversed.U);
    j["commutator_frobenius"] = diff;
    j["unitarity_defect_forward"] = unitarity_defect(forward.U);
    j["unitarity_defect_reversed"] = unitarity_defect(reversed.U);
    j["alpha_forward"] = forward.alpha ? ojson(*forward.alpha) : ojson(nullptr);
    j["alpha_reversed"] = reversed.alpha ? ojson(*reversed.alpha) : ojson(nullptr);

    const std::string path = join_path(p.dir, "su3.json");
    write_text_file(path, j.dump(2) + "\n");
    RunOutcome out;
    out.scenario = "su3-concat";
    out.files.push_back(path);
    out.notes.push_back("wrote " + path + " (commutator Frobenius " + format_number(diff) + ")");
    return out;
}

std::string scenario_name_of(const ConfigDoc& doc) {
    const ConfigEntry* e = doc.find("scenario", "name");
    if (!e) throw config_error("config: missing required key \"name\" in [scenario]");
    for (const std::string& n : scenario_names())
        if (n == e->value) return n;
    std::string known;
    for (const std::string& n : scenario_names()) {
        if (!known.empty()) known += ", ";
        known += n;
    }
    throw config_error("config: unknown scenario \"" + e->value + "\" (" + e->loc.str() +
                       "); known scenarios: " + known);
}

}  // namespace

std::vector<std::string> scenario_names() {
    return {"fig2b-energies", "fig3-couplings", "fig4-alpha", "gate-validation", "su3-concat"};
}

std::string scenario_summary(const std::string& name) {
    if (name == "fig2b-energies")
        return "transverse levels eps0..eps_k over an (L, w) control grid (CSV)";
    if (name == "fig3-couplings")
        return "two-level connection lambda and multiplet dominance over the working window, "
               "plus a straight-path trace (CSV)";
    if (name == "fig4-alpha")
        return "holonomy angle alpha over rectangle corners (L_fin, w_fin) anchored at "
               "(l_in, w_in) (CSV)";
    if (name == "gate-validation")
        return "closed-loop gate: direct coupled-mode integration versus the holonomy "
               "prediction, with validity flags (JSON)";
    if (name == "su3-concat")
        return "two embedded two-level rotations composed in both orders, with their "
               "commutator (JSON)";
    throw config_error("unknown scenario \"" + name + "\"");
}

void validate_scenario_config(const ConfigDoc& doc) {
    const std::string name = scenario_name_of(doc);
    const RunOptions opts;
    if (name == "fig2b-energies")
        resolve_fig2b(doc, opts);
    else if (name == "fig3-couplings")
        resolve_fig3(doc, opts);
    else if (name == "fig4-alpha")
        resolve_fig4(doc, opts);
    else if (name == "gate-validation")
        resolve_gate(doc, opts);
    else
        resolve_su3(doc, opts);
}

RunOutcome run_scenario(const ConfigDoc& doc, const RunOptions& opts) {
    const std::string name = scenario_name_of(doc);
    if (name == "fig2b-energies") return execute_fig2b(resolve_fig2b(doc, opts));
    if (name == "fig3-couplings") return execute_fig3(resolve_fig3(doc, opts));
    if (name == "fig4-alpha") return execute_fig4(resolve_fig4(doc, opts));
    if (name == "gate-validation") return execute_gate(resolve_gate(doc, opts));
    return execute_su3(resolve_su3(doc, opts));
}

}  // namespace geophase
