// Acceptance runner: `tailnet_acceptance N` checks criterion N (or `all`) and prints one
// PASS/FAIL line per sub-check. Exit status is nonzero when any line fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracle.hpp"
#include "tailnet/tailnet.hpp"
#include "tailnet_cli.hpp"

using namespace tailnet;

namespace {

int failures = 0;

void report(int criterion, const std::string& name, bool ok, const std::string& detail) {
    std::printf("%s %d %s: %s\n", ok ? "PASS" : "FAIL", criterion, name.c_str(), detail.c_str());
    std::fflush(stdout);
    failures += !ok;
}

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

std::string fmt2(const char* f, double a, double b) {
    char buf[160];
    std::snprintf(buf, sizeof buf, f, a, b);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Relative to the magnitude of the oracle when it exceeds 1.
double err(double got, double want) { return std::abs(got - want) / std::max(1.0, std::abs(want)); }

NormSpec random_norm(std::mt19937_64& rng, bool at_least_one) {
    if (at_least_one) return std::array{NormSpec(1.0), NormSpec(2.0), NormSpec::max_norm()}[rng() % 3];
    return std::array{NormSpec(0.5), NormSpec(1.0), NormSpec(2.0), NormSpec::max_norm()}[rng() % 4];
}

double oracle_r(const NormSpec& n) { return n.is_max() ? INFINITY : n.r(); }

// ---- 1 -------------------------------------------------------------------

void criterion1() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(101);
    const int markets = 240;
    double worst = 0.0;
    int compared = 0;
    for (int m = 0; m < markets; ++m) {
        const std::size_t q = 2 + rng() % 9, d = 1 + rng() % 4;
        const double alpha = std::array{0.5, 2.0, 5.0}[rng() % 3];
        auto s = oracle::random_insurance(rng, q, d, alpha);
        const NormSpec norm = random_norm(rng, false);
        const double r = oracle_r(norm);
        const std::size_t i = rng() % q, k = (i + 1 + rng() % (q - 1)) % q;
        const double kappa = std::pow(10.0, -2.0 + 4.0 * (rng() % 1000) / 1000.0);
        auto pa = [&](double x) { return oracle::powz(x, alpha); };

        const double ci = oracle::column_sum(s, [&](const auto& c) { return pa(c[i]); });
        const double ck = oracle::column_sum(s, [&](const auto& c) { return pa(c[k]); });
        const double cs = oracle::column_sum(s, [&](const auto& c) { return pa(oracle::rnorm(c, r)); });
        auto check = [&](double got, double want) {
            worst = std::max(worst, err(got, want));
            ++compared;
        };
        check(c_ind_agent(s, i, Exact{}).value, ci);
        check(c_ind_sys(s, norm, Exact{}).value, cs);
        check(tail_dep_agent_given_sys(s, norm, i, kappa, Exact{}).value,
              oracle::column_sum(s, [&](const auto& c) {
                  return std::min(pa(oracle::rnorm(c, r)) / cs, kappa * pa(c[i]) / ci);
              }));
        check(tail_dep_sys_given_agent(s, norm, i, kappa, Exact{}).value,
              oracle::column_sum(s, [&](const auto& c) {
                  return std::min(kappa * pa(oracle::rnorm(c, r)) / cs, pa(c[i]) / ci);
              }));
        check(tail_dep_agent_given_agent(s, i, k, kappa, Exact{}).value,
              oracle::column_sum(s, [&](const auto& c) { return std::min(kappa * pa(c[i]) / ci, pa(c[k]) / ck); }));
        const auto th = thresholds(s, norm, i, k);
        check(th.tau_i, std::min(1.0, oracle::column_sum(s, [&](const auto& c) {
                                          return c[i] > 0 ? pa(oracle::rnorm(c, r)) : 0.0;
                                      }) / cs));
        check(*th.tau_ik, std::min(1.0, oracle::column_sum(s, [&](const auto& c) {
                                            return c[k] > 0 ? pa(c[i]) : 0.0;
                                        }) / ci));
        if (alpha > 1.0) {
            const auto cc = cote_constants(s, norm, i, k, Exact{});
            const double f = alpha / (alpha - 1.0);
            check(cc.as.value, f * std::pow(cs, 1.0 / alpha - 1.0) *
                                   oracle::column_sum(s, [&](const auto& c) {
                                       return c[i] * oracle::powz(oracle::rnorm(c, r), alpha - 1.0);
                                   }));
            check(cc.sa.value, f * std::pow(ci, 1.0 / alpha - 1.0) *
                                   oracle::column_sum(s, [&](const auto& c) {
                                       return oracle::rnorm(c, r) * oracle::powz(c[i], alpha - 1.0);
                                   }));
            check(cc.mm->value, f * std::pow(ck, 1.0 / alpha - 1.0) *
                                    oracle::column_sum(s, [&](const auto& c) {
                                        return c[i] * oracle::powz(c[k], alpha - 1.0);
                                    }));
        }
    }
    const double secs = seconds_since(t0);
    report(1, "exact path vs per-column enumeration",
           worst <= 1e-10, std::to_string(markets) + " markets, " + std::to_string(compared) + " values, " +
                               fmt("max error %.3g (tolerance 1e-10)", worst));
    report(1, "runtime", secs < 60.0, fmt("%.1f s (limit 60 s)", secs));
}

// ---- 2 -------------------------------------------------------------------

void criterion2() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(202);
    double worst = 0.0;
    int compared = 0, markets = 0;
    for (std::size_t q = 1; q <= 8; ++q)
        for (std::size_t d = 1; q * d <= 16; ++d) {
            if (q * d < 4 && (q + d) % 2) continue;
            ++markets;
            const double alpha = std::array{0.5, 2.0, 5.0}[rng() % 3];
            auto s = oracle::random_insurance(rng, q, d, alpha);
            if (rng() % 2) {
                std::vector<double> caps(q);
                for (auto& c : caps) c = 0.5 + (rng() % 100) / 50.0;
                s.weight_rule = InvestmentEqualSplit{caps};
            }
            s.regime = Regime::AsymptoticallyFullyDependent;
            const NormSpec norm = random_norm(rng, false);
            const double r = oracle_r(norm);
            const std::size_t i = rng() % q;
            auto pa = [&](double x) { return oracle::powz(x, alpha); };
            auto check = [&](double got, double want) {
                worst = std::max(worst, err(got, want));
                ++compared;
            };
            auto over = [&](const std::function<double(const std::vector<double>&)>& f) {
                return oracle::over_graphs(s, [&](const auto& a) { return f(oracle::direction(s, a)); });
            };
            const double ci = over([&](const auto& x) { return pa(x[i]); });
            const double cs = over([&](const auto& x) { return pa(oracle::rnorm(x, r)); });
            const auto dep = c_dep_constants(s, norm, Enumeration{});
            check(dep.agent[i].value, ci);
            check(dep.system.value, cs);
            if (cs > 0.0) {
                const double u = 0.3 + (rng() % 100) / 25.0;
                check(cond_prob_limit(s, {Projection{i}, NormAggregation{norm}}, u, Enumeration{}).value,
                      over([&](const auto& x) { return std::min(pa(oracle::rnorm(x, r)), pa(u) * pa(x[i])); }) / cs);
                if (alpha > 1.0)
                    check(cond_expect_limit(s, {Projection{i}, NormAggregation{norm}}, 1.0, Enumeration{}).value,
                          alpha / (alpha - 1.0) *
                              over([&](const auto& x) {
                                  return x[i] * oracle::powz(oracle::rnorm(x, r), alpha - 1.0);
                              }) / cs);
            }
            if (ci > 0.0 && alpha > 1.0)
                check(cond_expect_limit(s, {NormAggregation{norm}, Projection{i}}, 2.0, Enumeration{}).value,
                      2.0 * alpha / (alpha - 1.0) *
                          over([&](const auto& x) { return oracle::rnorm(x, r) * oracle::powz(x[i], alpha - 1.0); }) /
                          ci);
        }
    const double secs = seconds_since(t0);
    report(2, "dependent regime vs full graph enumeration", worst <= 1e-10,
           std::to_string(markets) + " markets with q*d <= 16, " + std::to_string(compared) + " values, " +
               fmt("max error %.3g (tolerance 1e-10)", worst));
    report(2, "runtime", secs < 120.0, fmt("%.1f s (limit 120 s)", secs));
}

// ---- 3 -------------------------------------------------------------------

void criterion3() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(303);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int markets = 10000;
    long checks = 0, violations = 0;
    for (int m = 0; m < markets; ++m) {
        const std::size_t q = 2 + static_cast<std::size_t>(std::pow(199.0, u(rng)));
        const std::size_t d = 1 + rng() % 3;
        // edge probabilities from dense down to about 1/q
        const double scale = std::pow(10.0, -std::log10(double(q)) * u(rng));
        auto s = homogeneous_market(std::min<std::size_t>(q, 200), d, 0.0,
                                    std::array{1.5, 2.0, 3.0, 5.0}[rng() % 4]);
        for (std::size_t r = 0; r < s.q; ++r)
            for (auto& p : s.edge_probs.row(r)) p = scale * u(rng);
        for (auto& k : s.k_coeffs) k = 0.25 + 2.0 * u(rng);
        const std::size_t i = rng() % s.q, k = (i + 1 + rng() % (s.q - 1)) % s.q;
        s.edge_probs(i, 0) = std::max(s.edge_probs(i, 0), 1e-3);
        s.edge_probs(k, 0) = std::max(s.edge_probs(k, 0), 1e-3);
        const NormSpec norm = random_norm(rng, true);
        const double kappa = std::pow(10.0, -3.0 + 6.0 * u(rng));
        auto tally = [&](const ApproxTable& t) {
            checks += 1 + static_cast<long>(t.per_object.size());
            violations += !t.total.satisfied(t.slack_scale);
            for (const auto& a : t.per_object) violations += !a.satisfied(t.slack_scale);
        };
        tally(approx_c_ind_agent(s, i));
        tally(approx_c_ind_sys(s, norm));
        const auto mt = approx_min_terms(s, norm, i, k, kappa);
        tally(mt.ags);
        tally(mt.sga);
        tally(*mt.aga);
        const auto ct = approx_cote_terms(s, norm, i, k);
        tally(ct.as);
        tally(ct.sa);
        tally(*ct.mm);
    }
    const double secs = seconds_since(t0);
    report(3, "Poisson bounds hold", violations == 0,
           std::to_string(markets) + " markets (q <= 200), " + std::to_string(checks) + " comparisons, " +
               std::to_string(violations) + " violations");
    report(3, "runtime", secs < 300.0, fmt("%.1f s (limit 300 s)", secs));
}

// ---- 4 -------------------------------------------------------------------

void criterion4() {
    std::mt19937_64 rng(404);
    double worst0 = 0.0, worst1 = 0.0, worst2 = 0.0;
    const int markets = 100;
    for (int m = 0; m < markets; ++m) {
        const std::size_t q = 2 + rng() % 9, d = 1 + rng() % 4;
        const auto s = oracle::random_insurance(rng, q, d, std::array{0.5, 2.0, 5.0}[rng() % 3]);
        const NormSpec norm = random_norm(rng, false);
        const std::size_t i = rng() % q, k = (i + 1 + rng() % (q - 1)) % q;
        const auto th = thresholds(s, norm, i, k);
        for (int n = 1; n <= 20; ++n) {
            const double f = n / 20.0;
            worst0 = std::max(worst0, std::abs(tail_dep_agent_given_sys(s, norm, i, f * th.kappa0, Exact{}).value -
                                               f * th.kappa0));
            worst1 = std::max(worst1, std::abs(tail_dep_sys_given_agent(s, norm, i, f * th.kappa1, Exact{}).value -
                                               f * th.kappa1 * th.tau_i));
            worst2 = std::max(worst2, std::abs(tail_dep_agent_given_agent(s, i, k, f * *th.kappa2, Exact{}).value -
                                               f * *th.kappa2 * *th.tau_ik));
        }
    }
    const std::string n = std::to_string(markets) + " markets x 20 kappas, ";
    report(4, "agent given system equals kappa below kappa0", worst0 <= 1e-10, n + fmt("max error %.3g", worst0));
    report(4, "system given agent equals kappa*tau(i) below kappa1", worst1 <= 1e-10,
           n + fmt("max error %.3g", worst1));
    report(4, "agent given agent equals kappa*tau(i,k) below kappa2", worst2 <= 1e-10,
           n + fmt("max error %.3g", worst2));

    // homogeneous model: tau(i) against p
    double worst_tau = 0.0;
    std::string detail;
    for (double p : {0.05, 0.3, 0.7, 1.0})
        for (const NormSpec& norm : {NormSpec(1.0), NormSpec(2.0)}) {
            const auto th = thresholds(homogeneous_market(5, 10, p, 2.0), norm, 0, std::nullopt);
            worst_tau = std::max(worst_tau, std::abs(th.tau_i - p));
            if (norm.r() == 1.0) detail += fmt2(" p=%g:%.6g", p, th.tau_i);
        }
    report(4, "homogeneous tau(i) equals p", worst_tau <= 1e-12,
           fmt("q=5, max |tau(i)-p| = %.3g; r=1 values", worst_tau) + detail);
}

// ---- 5 -------------------------------------------------------------------

void criterion5() {
    const std::size_t q = 5, d = 10;
    double worst = 0.0;
    for (double alpha : {0.5, 2.0, 5.0}) {
        auto s = homogeneous_market(q, d, 1.0, alpha);
        s.k_coeffs = {1.0, 2.0, 0.5, 1.0, 3.0, 1.0, 1.0, 0.25, 1.0, 1.5};
        const double ksum = 12.25;
        worst = std::max(worst, std::abs(c_ind_agent(s, 0, Exact{}).value / (ksum * std::pow(q, -alpha)) - 1.0));
        const auto h = homogeneous_market(q, d, 1.0, alpha);
        for (double r : {0.5, 1.0, 2.0, 3.0})
            worst = std::max(worst, std::abs(c_ind_sys(h, NormSpec(r), Exact{}).value /
                                                 (d * std::pow(q, alpha * (1.0 / r - 1.0))) -
                                             1.0));
    }
    report(5, "complete graph constants", worst <= 1e-14, fmt("max relative error %.3g", worst));

    const double td = tail_dep_agent_given_sys(homogeneous_market(q, d, 1.0, 2.0), NormSpec(1.0), 0, 1.0, Exact{}).value;
    report(5, "complete graph tail dependence at r=1", std::abs(td - 1.0) <= 1e-14, fmt("value %.17g", td));

    // alpha = 5, sum norm, several kappa
    double worst_gap = 0.0;
    std::string detail;
    const auto small_p = homogeneous_market(q, d, 1e-4, 5.0);
    for (double kappa : {0.5, 1.0, 2.0, 5.0}) {
        const double v = tail_dep_agent_given_sys(small_p, NormSpec(1.0), 0, kappa, Exact{}).value;
        worst_gap = std::max(worst_gap, std::abs(v - 1.0 / q));
        detail += fmt2(" kappa=%g:%.7g", kappa, v);
    }
    report(5, "p=1e-4 tail dependence near 1/q", worst_gap <= 1e-3,
           fmt("q=5, alpha=5, r=1, max |value-0.2| = %.3g;", worst_gap) + detail);
}

// ---- 6 -------------------------------------------------------------------

void criterion6() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto s = homogeneous_market(5, 10, 0.3, 5.0);
    const NormSpec r1(1.0);
    SimConfig cfg;
    cfg.reps = 10000000;
    cfg.seed = 6;
    cfg.gammas = {0.1, 0.01, 0.001};
    cfg.norm = r1;
    cfg.asymptotic_method = Exact{};
    const std::vector<RiskTarget> targets{RiskTarget::var(Projection{0}), RiskTarget::cote(Projection{0}),
                                          RiskTarget::tail_dep(Projection{0}, NormAggregation{r1})};
    const auto rep = simulate(s, cfg, targets);
    const double ci = c_ind_agent(s, 0, Exact{}).value;
    auto rec = [&](double g, RiskTarget::Kind kind) -> const TailRecord& {
        for (const auto& r : rep.records)
            if (r.gamma == g && r.target.rfind(kind == RiskTarget::Kind::VaR    ? "VaR("
                                               : kind == RiskTarget::Kind::CoTE ? "CoTE("
                                                                                : "TailDep(",
                                               0) == 0)
                return r;
        std::abort();
    };
    for (double g : cfg.gammas) {
        const auto& v = rec(g, RiskTarget::Kind::VaR);
        const auto& c = rec(g, RiskTarget::Kind::CoTE);
        const auto& t = rec(g, RiskTarget::Kind::TailDep);
        std::printf("INFO 6 gamma=%g: VaR*gamma^(1/a)/C^(1/a)=%.4f CoTE/VaR=%.4f taildep=%.4f+-%.4f (limit %.4f)\n", g,
                    *v.empirical * std::pow(g, 1.0 / 5.0) / std::pow(ci, 1.0 / 5.0), *c.empirical / *v.empirical,
                    *t.empirical, t.std_error, *t.asymptotic);
    }
    const auto& v = rec(0.001, RiskTarget::Kind::VaR);
    const double ratio = *v.empirical * std::pow(0.001, 0.2) / std::pow(ci, 0.2);
    report(6, "scaled VaR at gamma=1e-3 within 5% of 1", std::abs(ratio - 1.0) <= 0.05, fmt("ratio %.4f", ratio));
    const double cr = *rec(0.001, RiskTarget::Kind::CoTE).empirical / *v.empirical;
    report(6, "CoTE/VaR at gamma=1e-3 within 5% of 1.25", std::abs(cr / 1.25 - 1.0) <= 0.05, fmt("ratio %.4f", cr));
    const auto& t = rec(0.001, RiskTarget::Kind::TailDep);
    report(6, "tail dependence at gamma=1e-3 within 4 SE", std::abs(*t.abs_gap()) <= 4 * t.std_error,
           fmt2("empirical %.5f, limit %.5f", *t.empirical, *t.asymptotic) + fmt(", SE %.5f", t.std_error));
    const double secs = seconds_since(t0);
    report(6, "runtime", secs < 600.0, fmt("%.1f s (limit 600 s)", secs));
}

// ---- 7 -------------------------------------------------------------------

void criterion7() {
    const auto s = homogeneous_market(3, 2, 0.5, 2.0);
    const double c = uncovered(s).constant;
    report(7, "uncovered constant", c == 0.25, fmt("%.17g", c));
    const std::vector<double> ts{10.0, 30.0, 100.0};
    const auto recs = simulate_uncovered(s, ts, 10000000, 7);
    for (const auto& r : recs)
        report(7, "scaled tail at t=" + fmt("%g", r.t), std::abs(r.scaled - 0.25) <= 4 * r.std_error,
               fmt2("t^a P = %.5f, SE %.5f", r.scaled, r.std_error) +
                   fmt(", %.2f SE from 0.25", (r.scaled - 0.25) / r.std_error));
}

// ---- 8 -------------------------------------------------------------------

void criterion8() {
    const std::size_t q = 5, d = 10;
    std::vector<double> ps;
    for (int k = 0; k < 100; ++k) ps.push_back(0.01 + 0.99 * k / 99.0);
    auto cas = [&](double r, double p) {
        const NormSpec norm = std::isinf(r) ? NormSpec::max_norm() : NormSpec(r);
        return cote_constants(homogeneous_market(q, d, p, 5.0), norm, 0, std::nullopt, Exact{}).as.value;
    };
    {
        double rise = 0.0, fall = 0.0;
        double prev = cas(2.0, ps[0]);
        for (std::size_t k = 1; k < ps.size(); ++k) {
            const double cur = cas(2.0, ps[k]);
            rise = std::max(rise, cur - prev);
            fall = std::max(fall, prev - cur);
            prev = cur;
        }
        report(8, "C^AS non-monotone in p for r=2", rise > 1e-9 && fall > 1e-9,
               fmt2("largest increment %.3g, largest decrement %.3g", rise, fall));
    }
    {
        double min_step = INFINITY;
        double prev = cas(0.5, ps[0]);
        for (std::size_t k = 1; k < ps.size(); ++k) {
            const double cur = cas(0.5, ps[k]);
            min_step = std::min(min_step, cur - prev);
            prev = cur;
        }
        report(8, "C^AS increasing in p for r=0.5", min_step > 0.0, fmt("smallest increment %.3g", min_step));
    }

    std::vector<double> kappas;
    for (int k = 0; k <= 70; ++k) kappas.push_back(std::pow(10.0, -4.0 + k / 10.0));
    bool plateau = true, monotone = true, slope = true;
    double worst_plateau = 0.0, worst_slope = 0.0;
    for (double p : {0.1, 0.3, 0.6, 1.0})
        for (const NormSpec& norm : {NormSpec(0.5), NormSpec(1.0), NormSpec(2.0), NormSpec::max_norm()}) {
            const auto s = homogeneous_market(q, d, p, 2.0);
            const auto sga = tail_dep_curve(s, {NormAggregation{norm}, Projection{0}}, kappas, Exact{});
            worst_plateau = std::max(worst_plateau, std::abs(sga.back().value - 1.0));
            plateau = plateau && std::abs(sga.back().value - 1.0) <= 1e-12;
            for (std::size_t k = 1; k < sga.size(); ++k) monotone = monotone && sga[k].value >= sga[k - 1].value - 1e-15;
            const auto ags = tail_dep_curve(s, {Projection{0}, NormAggregation{norm}}, kappas, Exact{});
            const double sl = (ags[1].value - ags[0].value) / (kappas[1] - kappas[0]);
            worst_slope = std::max(worst_slope, std::abs(sl - 1.0));
            slope = slope && std::abs(sl - 1.0) <= 1e-8;
        }
    report(8, "system given agent plateaus at 1", plateau && monotone,
           fmt("kappa up to 1e3, 16 curves, max |1-value| %.3g", worst_plateau) +
               (monotone ? ", nondecreasing" : ", NOT monotone"));
    report(8, "agent given system has unit slope for small kappa", slope,
           fmt("kappa in [1e-4, 1.26e-4], 16 curves, max |slope-1| %.3g", worst_slope));
}

// ---- 9 -------------------------------------------------------------------

void criterion9() {
    const char* dir = std::getenv("TAILNET_CONFIG_DIR");
    const std::string cfg = std::string(dir ? dir : "examples_cfg") + "/homogeneous_p03.json";
    std::vector<std::string> outs;
    int bad_codes = 0;
    for (const char* th : {"1", "2", "8"}) {
        std::ostringstream out, err;
        const int code = cli::run_cli({"simulate", cfg, "--reps", "200000", "--gammas", "0.1,0.01,0.001", "--target",
                                       "var-agent,var-sys,cote-agent,cote-sys,taildep-ags,taildep-sga,taildep-aga",
                                       "--seed", "2024", "--threads", th},
                                      out, err);
        bad_codes += code != 0;
        outs.push_back(out.str());
    }
    const bool same = outs[0] == outs[1] && outs[0] == outs[2] && !outs[0].empty();
    report(9, "simulate CSV identical for 1, 2 and 8 threads", same && bad_codes == 0,
           std::to_string(outs[0].size()) + " bytes" + (bad_codes ? ", nonzero exit" : ""));
}

}  // namespace

int main(int argc, char** argv) {
    const std::function<void()> runs[] = {criterion1, criterion2, criterion3, criterion4, criterion5,
                                          criterion6, criterion7, criterion8, criterion9};
    const std::string arg = argc == 2 ? argv[1] : "";
    std::vector<int> which;
    if (arg == "all") {
        for (int n = 1; n <= 9; ++n) which.push_back(n);
    } else if (const int n = std::atoi(arg.c_str()); n >= 1 && n <= 9) {
        which.push_back(n);
    } else {
        std::fprintf(stderr, "usage: tailnet_acceptance N|all (N in 1..9)\n");
        return 2;
    }
    for (int n : which) {
        try {
            runs[n - 1]();
        } catch (const std::exception& e) {
            report(n, "completed", false, std::string("exception: ") + e.what());
        }
    }
    return failures ? 1 : 0;
}
