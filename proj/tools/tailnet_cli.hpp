#pragma once

// Command-line front end. run_cli() is the whole program minus main(), so
// tests can drive it with in-memory streams.
//
// Exit codes: 0 ok, 2 configuration or argument error, 3 infeasible method,
// 4 simulation warning under --strict.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tailnet/tailnet.hpp"

namespace tailnet::cli {

enum ExitCode : int { kOk = 0, kConfig = 2, kInfeasible = 3, kWarning = 4 };

struct Common {
    std::string config;
    std::uint64_t seed = 0;
    std::string out;
    std::string format = "csv";
};

inline void add_common(CLI::App* sub, Common& c) {
    sub->add_option("config", c.config, "market configuration (JSON)")->required();
    sub->add_option("--seed", c.seed, "seed for every Monte Carlo stream");
    sub->add_option("--out", c.out, "write CSV here instead of standard output");
    sub->add_option("--format", c.format, "output format")->check(CLI::IsMember({"csv"}));
}

inline EvalMethod make_method(const std::string& name, const MarketSpec& spec, Regime regime, std::uint64_t seed,
                              std::uint64_t reps) {
    if (name == "auto") return auto_method(spec, regime, seed, reps);
    if (name == "exact") return Exact{};
    if (name == "enumeration") return Enumeration{};
    return MonteCarlo{reps, seed};
}

inline std::size_t agent_index(long long one_based, const MarketSpec& spec, const char* what) {
    if (one_based < 1 || static_cast<std::size_t>(one_based) > spec.q)
        throw ConfigError(std::string(what) + " must lie in 1.." + std::to_string(spec.q));
    return static_cast<std::size_t>(one_based - 1);
}

inline std::vector<double> make_grid(const std::string& kind, double start, double stop, int steps) {
    if (!(start < stop)) throw ConfigError("grid needs start < stop");
    if (steps < 2) throw ConfigError("grid needs at least 2 steps");
    if (kind == "log" && !(start > 0.0)) throw ConfigError("log grid needs a positive start");
    std::vector<double> g(static_cast<std::size_t>(steps));
    for (int s = 0; s < steps; ++s) {
        const double f = static_cast<double>(s) / (steps - 1);
        g[static_cast<std::size_t>(s)] =
            kind == "log" ? std::exp(std::log(start) + f * (std::log(stop) - std::log(start))) : start + f * (stop - start);
    }
    g.back() = stop;
    return g;
}

// ---- constants ------------------------------------------------------------

struct ConstantsArgs {
    Common common;
    std::string norm = "1";
    std::string method = "auto";
    std::string dep_method;
    std::uint64_t reps = 200000;
    long long agent = 0;
};

inline void run_constants(const ConstantsArgs& a, std::ostream& os) {
    const auto spec = load_market(a.common.config);
    const auto norm = parse_norm(a.norm);
    const auto ind = make_method(a.method, spec, Regime::AsymptoticallyIndependent, a.common.seed, a.reps);
    std::string dep_name = a.dep_method;
    if (dep_name.empty()) dep_name = a.method == "exact" ? "auto" : a.method;
    const auto dep = make_method(dep_name, spec, Regime::AsymptoticallyFullyDependent, a.common.seed, a.reps);
    std::optional<std::size_t> only;
    if (a.agent != 0) only = agent_index(a.agent, spec, "--agent");

    const auto rc = risk_constants(spec, norm, ind, dep);
    CsvWriter w(os);
    w.row({"quantity", "agent", "norm", "value", "stderr", "method"});
    for (std::size_t i = 0; i < spec.q; ++i)
        if (!only || *only == i)
            w.row({"c_ind_agent", std::to_string(i + 1), "", format_double(rc.c_ind_agent[i].value),
                   format_double(rc.c_ind_agent[i].std_error), method_name(ind)});
    w.row({"c_ind_sys", "", norm.label(), format_double(rc.c_ind_sys.value), format_double(rc.c_ind_sys.std_error),
           method_name(ind)});
    for (std::size_t i = 0; i < spec.q; ++i)
        if (!only || *only == i)
            w.row({"c_dep_agent", std::to_string(i + 1), "", format_double(rc.c_dep_agent[i].value),
                   format_double(rc.c_dep_agent[i].std_error), method_name(dep)});
    w.row({"c_dep_sys", "", norm.label(), format_double(rc.c_dep_sys.value), format_double(rc.c_dep_sys.std_error),
           method_name(dep)});
}

// ---- curves ---------------------------------------------------------------

struct CurvesArgs {
    Common common;
    std::string sweep = "p";
    std::string measure = "taildep-ags";
    std::string grid;
    double start = std::nan("");
    double stop = std::nan("");
    int steps = 0;
    std::vector<std::string> norms{"1"};
    std::vector<double> kappas{1.0};
    long long agent = 1;
    long long other = 2;
    std::string method = "auto";
    std::uint64_t reps = 200000;
};

inline void run_curves(const CurvesArgs& a, std::ostream& os) {
    const auto base = load_market(a.common.config);
    const bool by_p = a.sweep == "p";
    const std::string grid_kind = !a.grid.empty() ? a.grid : by_p ? "lin" : "log";
    const double start = !std::isnan(a.start) ? a.start : by_p ? 0.01 : 1e-4;
    const double stop = !std::isnan(a.stop) ? a.stop : by_p ? 1.0 : 100.0;
    const int steps = a.steps != 0 ? a.steps : by_p ? 100 : 61;
    const auto grid = make_grid(grid_kind, start, stop, steps);
    if (by_p && (grid.front() <= 0.0 || grid.back() > 1.0)) throw ConfigError("edge_prob grid must lie in (0,1]");
    for (double k : a.kappas)
        if (!(k > 0.0)) throw ConfigError("kappa values must be positive");

    const std::size_t i = agent_index(a.agent, base, "--agent");
    const bool mutual = a.measure == "taildep-aga";
    const std::size_t k = mutual ? agent_index(a.other, base, "--other") : 0;
    if (mutual && k == i) throw ConfigError("--agent and --other must differ");
    const bool is_cote = a.measure == "cas" || a.measure == "csa";

    std::vector<NormSpec> norms;
    for (const auto& r : a.norms) norms.push_back(parse_norm(r));
    if (mutual) norms.erase(norms.begin() + 1, norms.end());  // the mutual measure does not aggregate

    struct Series {
        std::string label;
        std::optional<NormSpec> norm;
        double kappa;
    };
    std::vector<Series> series;
    for (const auto& n : norms) {
        const std::string rl = mutual ? "" : "r=" + n.label();
        if (is_cote || !by_p) {
            series.push_back({rl.empty() ? "aga" : rl, n, 1.0});
        } else {
            for (double kap : a.kappas) {
                std::string lbl = rl.empty() ? "" : rl + ";";
                series.push_back({lbl + "kappa=" + format_double(kap), n, kap});
            }
        }
    }

    auto target_for = [&](const NormSpec& n) -> CondTarget {
        if (a.measure == "taildep-ags") return {Projection{i}, NormAggregation{n}};
        if (a.measure == "taildep-sga") return {NormAggregation{n}, Projection{i}};
        return {Projection{i}, Projection{k}};
    };

    CsvWriter w(os);
    w.row({"sweep_value", "series_label", "value"});
    if (by_p) {
        for (double p : grid) {
            MarketSpec spec = base;
            spec.edge_probs = Matrix(spec.q, spec.d, p);
            const auto method = make_method(a.method, spec, spec.regime, a.common.seed, a.reps);
            for (const auto& s : series) {
                double v = 0.0;
                if (a.measure == "cas")
                    v = detail::cote_constant(spec, Projection{i}, NormAggregation{*s.norm}, method).value;
                else if (a.measure == "csa")
                    v = detail::cote_constant(spec, NormAggregation{*s.norm}, Projection{i}, method).value;
                else
                    v = tail_dep(spec, target_for(*s.norm), s.kappa, method).value;
                w.row({format_double(p), s.label, format_double(v)});
            }
        }
        return;
    }
    if (is_cote) throw ConfigError("measures cas and csa do not depend on kappa; use --sweep p");
    const auto method = make_method(a.method, base, base.regime, a.common.seed, a.reps);
    std::vector<std::vector<Estimate>> values;
    for (const auto& s : series) values.push_back(tail_dep_curve(base, target_for(*s.norm), grid, method));
    for (std::size_t g = 0; g < grid.size(); ++g)
        for (std::size_t s = 0; s < series.size(); ++s)
            w.row({format_double(grid[g]), series[s].label, format_double(values[s][g].value)});
}

// ---- approx ---------------------------------------------------------------

struct ApproxArgs {
    Common common;
    std::string norm = "1";
    long long agent = 1;
    long long other = 0;
    double kappa = 1.0;
    bool poisson_constants = false;
};

inline void run_approx(const ApproxArgs& a, std::ostream& os) {
    const auto spec = load_market(a.common.config);
    const auto norm = parse_norm(a.norm);
    const std::size_t i = agent_index(a.agent, spec, "--agent");
    std::optional<std::size_t> k;
    if (a.other != 0) k = agent_index(a.other, spec, "--other");

    CsvWriter w(os);
    w.row({"quantity", "object", "approx", "bound", "exact", "within_bound"});
    auto emit = [&](const std::string& name, const ApproxTable& t) {
        for (std::size_t j = 0; j < t.per_object.size(); ++j) {
            const auto& e = t.per_object[j];
            w.row({name, std::to_string(j + 1), format_double(e.approx), format_double(e.bound),
                   format_double(e.exact), e.exact ? (e.satisfied(t.slack_scale) ? "true" : "false") : ""});
        }
        const auto& e = t.total;
        w.row({name, "all", format_double(e.approx), format_double(e.bound), format_double(e.exact),
               e.exact ? (t.all_satisfied() ? "true" : "false") : ""});
    };
    emit("c_ind_agent", approx_c_ind_agent(spec, i));
    emit("c_ind_sys", approx_c_ind_sys(spec, norm));
    const auto mt = approx_min_terms(spec, norm, i, k, a.kappa,
                                     a.poisson_constants ? ConstantSource::Poisson : ConstantSource::Exact);
    emit("min_agent_given_sys", mt.ags);
    emit("min_sys_given_agent", mt.sga);
    if (mt.aga) emit("min_agent_given_agent", *mt.aga);
    if (spec.alpha > 1.0) {
        const auto ct = approx_cote_terms(spec, norm, i, k);
        emit("cote_agent_sys", ct.as);
        emit("cote_sys_agent", ct.sa);
        if (ct.mm) emit("cote_agent_agent", *ct.mm);
    }
}

// ---- uncovered ------------------------------------------------------------

struct UncoveredArgs {
    Common common;
    std::vector<double> ts;
    std::uint64_t reps = 0;
    unsigned threads = 0;
};

inline void run_uncovered(const UncoveredArgs& a, std::ostream& os) {
    const auto spec = load_market(a.common.config);
    const auto res = uncovered(spec);
    CsvWriter w(os);
    w.row({"quantity", "object", "t", "value", "stderr"});
    for (std::size_t j = 0; j < spec.d; ++j)
        w.row({"p_zero", std::to_string(j + 1), "", format_double(res.p_zero[j]), ""});
    w.row({"constant", "", "", format_double(res.constant), ""});
    w.row({"expected_count", "", "", format_double(res.expected_count), ""});
    for (double t : a.ts) w.row({"tail", "", format_double(t), format_double(uncovered_tail(spec, t)), ""});
    if (a.reps > 0 && !a.ts.empty()) {
        const unsigned workers = a.threads ? a.threads : default_worker_count();
        for (const auto& r : simulate_uncovered(spec, a.ts, a.reps, a.common.seed, workers))
            w.row({"empirical_scaled_tail", "", format_double(r.t), format_double(r.scaled),
                   format_double(r.std_error)});
    }
}

// ---- simulate -------------------------------------------------------------

struct SimulateArgs {
    Common common;
    std::uint64_t reps = 100000;
    std::vector<double> gammas{0.1, 0.01, 0.001};
    std::vector<std::string> targets{"var-agent", "var-sys", "cote-agent", "cote-sys", "taildep-ags"};
    std::string norm = "1";
    long long agent = 1;
    long long other = 2;
    double kappa = 1.0;
    bool fixed_graph = false;
    unsigned threads = 0;
    bool strict = false;
    std::string method = "auto";
    std::uint64_t method_reps = 200000;
};

// Returns true when any record carries a flag.
inline bool run_simulate(const SimulateArgs& a, std::ostream& os) {
    const auto spec = load_market(a.common.config);
    const auto norm = parse_norm(a.norm);
    const std::size_t i = agent_index(a.agent, spec, "--agent");
    const Aggregation agent = Projection{i}, sys = NormAggregation{norm};

    std::vector<RiskTarget> targets;
    for (const auto& t : a.targets) {
        if (t == "var-agent") targets.push_back(RiskTarget::var(agent));
        else if (t == "var-sys") targets.push_back(RiskTarget::var(sys));
        else if (t == "cote-agent") targets.push_back(RiskTarget::cote(agent));
        else if (t == "cote-sys") targets.push_back(RiskTarget::cote(sys));
        else if (t == "taildep-ags") targets.push_back(RiskTarget::tail_dep(agent, sys, a.kappa));
        else if (t == "taildep-sga") targets.push_back(RiskTarget::tail_dep(sys, agent, a.kappa));
        else if (t == "taildep-aga") {
            const std::size_t k = agent_index(a.other, spec, "--other");
            if (k == i) throw ConfigError("--agent and --other must differ");
            targets.push_back(RiskTarget::tail_dep(agent, Projection{k}, a.kappa));
        } else {
            throw ConfigError("unknown target '" + t + "'");
        }
    }

    SimConfig cfg;
    cfg.reps = a.reps;
    cfg.seed = a.common.seed;
    cfg.gammas = a.gammas;
    cfg.norm = norm;
    cfg.resample_graph = !a.fixed_graph;
    cfg.workers = a.threads ? a.threads : default_worker_count();
    const MarketSpec& method_spec = a.fixed_graph ? fix_graph(spec, a.common.seed) : spec;
    cfg.asymptotic_method = make_method(a.method, method_spec, spec.regime, a.common.seed, a.method_reps);

    const auto report = simulate(spec, cfg, targets);
    CsvWriter w(os);
    w.row({"gamma", "target", "empirical", "stderr", "asymptotic", "abs_gap", "rel_gap", "flag"});
    for (const auto& r : report.records) {
        std::string flag;
        for (const auto& f : r.flags) flag += (flag.empty() ? "" : ";") + f;
        w.row({format_double(r.gamma), r.target, format_double(r.empirical), format_double(r.std_error),
               format_double(r.asymptotic), format_double(r.abs_gap()), format_double(r.rel_gap()), flag});
    }
    return report.any_flag();
}

// ---- entry ----------------------------------------------------------------

inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Asymptotic systemic risk in random bipartite markets", "tailnet"};
    app.require_subcommand(1);

    const std::vector<std::string> methods{"auto", "exact", "enumeration", "montecarlo"};

    ConstantsArgs ca;
    auto* c = app.add_subcommand("constants", "tail constants of both dependence regimes");
    add_common(c, ca.common);
    c->add_option("--norm", ca.norm, "r of the system norm (a number or 'inf')");
    c->add_option("--method", ca.method, "method for independent-regime constants")->check(CLI::IsMember(methods));
    c->add_option("--dep-method", ca.dep_method, "method for fully dependent constants")
        ->check(CLI::IsMember({"auto", "enumeration", "montecarlo"}));
    c->add_option("--reps", ca.reps, "Monte Carlo replications")->check(CLI::PositiveNumber);
    c->add_option("--agent", ca.agent, "restrict agent rows to this agent (1-based)");

    CurvesArgs cu;
    auto* v = app.add_subcommand("curves", "sweeps of risk constants and tail dependence limits");
    add_common(v, cu.common);
    v->add_option("--sweep", cu.sweep, "swept variable")->check(CLI::IsMember({"p", "kappa"}));
    v->add_option("--measure", cu.measure, "curve to compute")
        ->check(CLI::IsMember({"cas", "csa", "taildep-ags", "taildep-sga", "taildep-aga"}));
    v->add_option("--grid", cu.grid, "grid spacing")->check(CLI::IsMember({"lin", "log"}));
    v->add_option("--start", cu.start, "first grid value");
    v->add_option("--stop", cu.stop, "last grid value");
    v->add_option("--steps", cu.steps, "number of grid points");
    v->add_option("--norms", cu.norms, "series of norm exponents")->delimiter(',');
    v->add_option("--kappas", cu.kappas, "series of kappa values (p sweeps)")->delimiter(',');
    v->add_option("--agent", cu.agent, "agent i (1-based)");
    v->add_option("--other", cu.other, "agent k for taildep-aga (1-based)");
    v->add_option("--method", cu.method, "evaluation method")->check(CLI::IsMember(methods));
    v->add_option("--reps", cu.reps, "Monte Carlo replications")->check(CLI::PositiveNumber);

    ApproxArgs ap;
    auto* p = app.add_subcommand("approx", "Poisson approximations with error bounds");
    add_common(p, ap.common);
    p->add_option("--norm", ap.norm, "r of the system norm, at least 1");
    p->add_option("--agent", ap.agent, "agent i (1-based)");
    p->add_option("--other", ap.other, "agent k for the mutual terms (1-based)");
    p->add_option("--kappa", ap.kappa, "level ratio kappa")->check(CLI::PositiveNumber);
    p->add_flag("--poisson-constants", ap.poisson_constants, "Poisson-approximate the normalizing constants too");

    UncoveredArgs un;
    auto* u = app.add_subcommand("uncovered", "tail of the claims no agent covers");
    add_common(u, un.common);
    u->add_option("--t", un.ts, "thresholds for the tail")->delimiter(',');
    u->add_option("--reps", un.reps, "also estimate the scaled tail by simulation");
    u->add_option("--threads", un.threads, "worker threads");

    SimulateArgs si;
    auto* s = app.add_subcommand("simulate", "finite-gamma Monte Carlo against the asymptotics");
    add_common(s, si.common);
    s->add_option("--reps", si.reps, "replications")->check(CLI::PositiveNumber);
    s->add_option("--gammas", si.gammas, "confidence levels gamma")->delimiter(',');
    s->add_option("--target", si.targets, "var-agent, var-sys, cote-agent, cote-sys, taildep-ags|sga|aga")
        ->delimiter(',');
    s->add_option("--norm", si.norm, "r of the system norm");
    s->add_option("--agent", si.agent, "agent i (1-based)");
    s->add_option("--other", si.other, "agent k for taildep-aga (1-based)");
    s->add_option("--kappa", si.kappa, "level ratio for tail dependence targets")->check(CLI::PositiveNumber);
    s->add_flag("--fixed-graph", si.fixed_graph, "simulate claims on one realized graph");
    s->add_option("--threads", si.threads, "worker threads");
    s->add_flag("--strict", si.strict, "exit 4 when any record is flagged");
    s->add_option("--method", si.method, "method for the asymptotic predictions")->check(CLI::IsMember(methods));
    s->add_option("--method-reps", si.method_reps, "Monte Carlo replications for the predictions");

    std::vector<const char*> argv{"tailnet"};
    for (const auto& x : args) argv.push_back(x.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::Success&) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "tailnet: " << e.what() << "\n";
        return kConfig;
    }

    std::ostringstream buf;
    bool flagged = false;
    const Common* common = nullptr;
    try {
        if (c->parsed()) {
            common = &ca.common;
            run_constants(ca, buf);
        } else if (v->parsed()) {
            common = &cu.common;
            run_curves(cu, buf);
        } else if (p->parsed()) {
            common = &ap.common;
            run_approx(ap, buf);
        } else if (u->parsed()) {
            common = &un.common;
            run_uncovered(un, buf);
        } else {
            common = &si.common;
            flagged = run_simulate(si, buf);
        }
    } catch (const InfeasibleError& e) {
        err << "tailnet: " << e.what() << "\n";
        return kInfeasible;
    } catch (const std::exception& e) {
        err << "tailnet: " << e.what() << "\n";
        return kConfig;
    }

    if (common->out.empty()) {
        out << buf.str();
    } else {
        std::ofstream f(common->out, std::ios::binary);
        if (!(f << buf.str())) {
            err << "tailnet: cannot write '" << common->out << "'\n";
            return kConfig;
        }
    }
    if (flagged) {
        err << "tailnet: some records are flagged (see the flag column)\n";
        if (si.strict) return kWarning;
    }
    return kOk;
}

}  // namespace tailnet::cli
