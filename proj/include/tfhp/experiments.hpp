#pragma once

#include "tfhp/analytics.hpp"
#include "tfhp/config.hpp"
#include "tfhp/errors.hpp"
#include "tfhp/montecarlo.hpp"
#include "tfhp/special_functions.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace tfhp {

enum class Command { MlEval, Hp, Tfhp, Gfhp, LemmaCheck };

inline constexpr int kExitPass = 0;
inline constexpr int kExitGateFail = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumeric = 3;

inline constexpr std::size_t kPilotPaths = 2000;
inline constexpr std::size_t kPilotStepsPerUnit = 500;  // pilot step = last time / 500
inline constexpr std::uint64_t kPilotSeedMix = 0x9e3779b97f4a7c15ULL;
inline constexpr std::uint64_t kFallbackSeedMix = 0xd1b54a32d192ed03ULL;

inline const char* command_name(Command c) {
    switch (c) {
        case Command::MlEval:
            return "ml-eval";
        case Command::Hp:
            return "hp";
        case Command::Tfhp:
            return "tfhp";
        case Command::Gfhp:
            return "gfhp";
        case Command::LemmaCheck:
            return "lemma-check";
    }
    return "?";
}

struct RunOptions {
    unsigned threads = 1;
    std::optional<std::uint64_t> seed;  // overrides the config seed
};

struct RunResult {
    bool pass = true;
    std::string csv;               // file contents
    nlohmann::ordered_json summary;
    MomentReport report;           // empty for ml-eval
    std::string csv_name;
    std::string json_name;
};

namespace detail {

inline std::string num(double x) {
    if (std::isnan(x)) {
        return "";
    }
    // shortest string that reads back to the same double
    char buf[40];
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

// NaN becomes null
inline nlohmann::ordered_json jnum(double x) {
    if (!std::isfinite(x)) {
        return nullptr;
    }
    return x;
}

inline std::string report_csv(const MomentReport& rep) {
    std::string out = "quantity,s,t,analytic,estimate,se,z,source\n";
    for (const auto& r : rep.rows) {
        out += r.quantity + "," + num(r.s) + "," + num(r.t) + "," + num(r.analytic) + "," + num(r.estimate) + "," +
               num(r.se) + "," + num(r.z) + "," + r.source + "\n";
    }
    return out;
}

inline nlohmann::ordered_json report_json(const MomentReport& rep, const Verdict& v) {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& r : rep.rows) {
        nlohmann::ordered_json j;
        j["quantity"] = r.quantity;
        j["s"] = jnum(r.s);
        j["t"] = r.t;
        j["analytic"] = jnum(r.analytic);
        j["estimate"] = r.estimate;
        j["se"] = r.se;
        j["z"] = jnum(r.z);
        j["source"] = r.source;
        j["gated"] = r.gated;
        j["pass"] = !r.gated || std::abs(r.z) < kZGate;
        rows.push_back(std::move(j));
    }
    nlohmann::ordered_json out;
    out["n_paths"] = rep.n_paths;
    out["seed"] = rep.seed;
    out["bias_bound"] = rep.bias_bound;
    out["bias_gamma"] = rep.bias_gamma;
    out["eligible"] = rep.eligible;
    out["advisory"] = !rep.eligible;
    out["z_gate"] = kZGate;
    out["max_abs_z"] = v.max_abs_z;
    out["rows_pass"] = v.pass;
    out["rows"] = std::move(rows);
    return out;
}

inline McSettings settings(const ExperimentConfig& c, const RunOptions& o) {
    McSettings mc;
    mc.n_paths = c.n_paths;
    mc.seed = o.seed.value_or(c.seed);
    mc.threads = o.threads;
    mc.max_steps = c.max_steps;
    mc.max_events = c.max_events;
    return mc;
}

struct StepChoice {
    double step = 0.0;
    bool automatic = false;
    std::size_t pilot_paths = 0;
    double pilot_step = 0.0;
};

// Fixed delta from the config, or a pilot run projected to n_paths through the bias rule.
inline StepChoice choose_step(const ExperimentConfig& c, const McSettings& mc, double gamma, double last_time,
                              const std::function<MomentReport(const McSettings&)>& estimate) {
    if (c.delta) {
        return {*c.delta, false, 0, 0.0};
    }
    McSettings pilot = mc;
    pilot.n_paths = kPilotPaths;
    pilot.seed = mc.seed ^ kPilotSeedMix;
    pilot.step = last_time / static_cast<double>(kPilotStepsPerUnit);
    const auto rep = estimate(pilot);
    return {step_from_pilot(rep, mc.n_paths, gamma), true, kPilotPaths, pilot.step};
}

inline void finish_mc(RunResult& res, MomentReport rep, const std::vector<double>& analytic, const StepChoice* step,
                      double bias_gamma) {
    const auto v = compare(analytic, rep);
    if (step != nullptr) {
        rep.bias_gamma = bias_gamma;
        rep.eligible = bias_eligible(rep, bias_gamma);
    }
    res.pass = v.pass;
    res.csv = report_csv(rep);
    res.summary["report"] = report_json(rep, v);
    if (step != nullptr) {
        nlohmann::ordered_json d;
        d["delta"] = step->step;
        d["rule"] = step->automatic ? "auto" : "fixed";
        if (step->automatic) {
            d["pilot_paths"] = step->pilot_paths;
            d["pilot_step"] = step->pilot_step;
        }
        res.summary["step"] = std::move(d);
    }
    res.report = std::move(rep);
}

inline const HawkesParams& need_hawkes(const ExperimentConfig& c, Command cmd) {
    if (!c.hawkes) {
        throw ConfigError(c.source, 1, std::string(command_name(cmd)) + " needs a 'hawkes' block");
    }
    return *c.hawkes;
}

inline const BernsteinSpec& need_sub(const ExperimentConfig& c, Command cmd) {
    if (!c.sub) {
        throw ConfigError(c.source, 1, std::string(command_name(cmd)) + " needs a 'subordinator' block");
    }
    return *c.sub;
}

inline void need_times(const ExperimentConfig& c, Command cmd) {
    if (c.times.empty()) {
        throw ConfigError(c.source, 1, std::string(command_name(cmd)) + " needs a non-empty 'times' array");
    }
}

inline double last_time(const ExperimentConfig& c) {
    double t = c.times.empty() ? 0.0 : c.times.back();
    for (const auto& [a, b] : c.pairs) {
        t = std::max(t, b);
    }
    return t;
}

// ---- commands ----------------------------------------------------------------------------

inline void run_ml_eval(const ExperimentConfig& c, RunResult& res) {
    if (c.ml3_points.empty() && c.phi_points.empty()) {
        throw ConfigError(c.source, 1, "ml-eval needs 'ml3' and/or 'phi' entries");
    }
    std::string csv = "function,p1,p2,p3,p4,value,error_estimate,source\n";
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& [a, b, cc, z] : c.ml3_points) {
        const auto r = ml3_eval(a, b, cc, z);
        csv += "ml3," + num(a) + "," + num(b) + "," + num(cc) + "," + num(z) + "," + num(r.value) + "," +
               num(r.error_estimate) + ",series\n";
        rows.push_back({{"function", "ml3"},
                        {"a", a},
                        {"b", b},
                        {"c", cc},
                        {"z", z},
                        {"value", r.value},
                        {"error_estimate", r.error_estimate},
                        {"terms", r.terms}});
    }
    for (const auto& [beta, nu, gamma, t] : c.phi_points) {
        const auto r = phi_eval(beta, nu, gamma, t);
        const char* src = r.source == PhiSource::Series ? "series" : "inversion";
        csv += "phi," + num(beta) + "," + num(nu) + "," + num(gamma) + "," + num(t) + "," + num(r.value) + ",," + src +
               "\n";
        rows.push_back({{"function", "phi"},
                        {"beta", beta},
                        {"nu", nu},
                        {"gamma", gamma},
                        {"t", t},
                        {"value", r.value},
                        {"source", src}});
    }
    res.csv = std::move(csv);
    res.summary["rows"] = std::move(rows);
}

inline void run_hp(const ExperimentConfig& c, const RunOptions& o, RunResult& res) {
    const auto& hp = need_hawkes(c, Command::Hp);
    need_times(c, Command::Hp);
    const auto mc = settings(c, o);
    auto rep = estimate_hp_moments(hp, c.times, c.pairs, mc);
    std::vector<double> analytic;
    for (const auto& r : rep.rows) {
        if (r.quantity == "mean") {
            analytic.push_back(hp_mean(hp, r.t));
        } else if (r.quantity == "variance") {
            analytic.push_back(hp_variance(hp, r.t));
        } else if (r.quantity == "covariance") {
            analytic.push_back(hp_covariance(hp, r.s, r.t));
        } else {
            analytic.push_back(hp_count_mean(hp, r.t));
        }
    }
    finish_mc(res, std::move(rep), analytic, nullptr, 0.0);
}

inline void run_tfhp(const ExperimentConfig& c, const RunOptions& o, RunResult& res) {
    const auto& hp = need_hawkes(c, Command::Tfhp);
    const auto& sub = need_sub(c, Command::Tfhp);
    need_times(c, Command::Tfhp);
    if (sub.get_if<TemperedStable>() == nullptr) {
        throw ConfigError(c.source, 1, "tfhp needs a tempered_stable or stable subordinator (use gfhp otherwise)");
    }
    const Model m{hp, sub};
    const AnalyticOptions opt{c.lemma41_variant, c.convolution_tol, c.inversion_order};
    const double gamma = derive(hp).gamma;

    // analytic side first: a stationarity failure should not cost a simulation
    std::vector<double> means, vars, covs;
    nlohmann::ordered_json diag = nlohmann::ordered_json::array();
    for (double t : c.times) {
        means.push_back(tfhp_mean(m, t));
        vars.push_back(tfhp_variance(m, t));
        nlohmann::ordered_json d;
        d["t"] = t;
        d["mean"] = means.back();
        d["variance"] = vars.back();
        d["mean_series"] = tfhp_mean_series(m, t);
        d["variance_series"] = tfhp_variance_series(m, t, false);
        d["variance_series_printed_sign"] = tfhp_variance_series(m, t, true);
        d["covariance_tt"] = tfhp_covariance(m, t, t, opt);
        diag.push_back(std::move(d));
    }
    for (const auto& [s, t] : c.pairs) {
        covs.push_back(tfhp_covariance(m, s, t, opt));
    }

    auto mc = settings(c, o);
    auto estimate = [&](const McSettings& s) { return estimate_tfhp_moments(hp, sub, c.times, c.pairs, s); };
    const auto step = choose_step(c, mc, gamma, last_time(c), estimate);
    mc.step = step.step;
    auto rep = estimate(mc);
    rep.variant = variant_name(c.lemma41_variant);
    std::vector<double> analytic = means;
    analytic.insert(analytic.end(), vars.begin(), vars.end());
    analytic.insert(analytic.end(), covs.begin(), covs.end());
    res.summary["lemma41_variant"] = rep.variant;
    res.summary["analytic_checks"] = std::move(diag);
    finish_mc(res, std::move(rep), analytic, &step, gamma);
}

inline void run_gfhp(const ExperimentConfig& c, const RunOptions& o, RunResult& res) {
    const auto& hp = need_hawkes(c, Command::Gfhp);
    const auto& sub = need_sub(c, Command::Gfhp);
    need_times(c, Command::Gfhp);
    const Model m{hp, sub};
    const AnalyticOptions opt{Lemma41Variant::Proof, c.convolution_tol, c.inversion_order};
    const double gamma = derive(hp).gamma;

    std::vector<double> means, vars;
    for (double t : c.times) {
        means.push_back(gfhp_mean(m, t, opt));
        vars.push_back(gfhp_variance(m, t, opt));
    }
    auto mc = settings(c, o);
    std::vector<BivariateTerms> terms;
    for (const auto& [s, t] : c.pairs) {
        terms.push_back(gfhp_bivariate_terms(m, s, t, opt));
    }

    auto estimate = [&](const McSettings& s) { return estimate_tfhp_moments(hp, sub, c.times, c.pairs, s); };
    const auto step = choose_step(c, mc, gamma, last_time(c), estimate);
    mc.step = step.step;
    auto rep = estimate(mc);

    std::vector<double> analytic = means;
    analytic.insert(analytic.end(), vars.begin(), vars.end());
    nlohmann::ordered_json fallbacks = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < c.pairs.size(); ++i) {
        const auto [s, t] = c.pairs[i];
        auto bt = terms[i];
        auto& row = rep.rows[2 * c.times.size() + i];
        if (bt.ill_conditioned) {
            // bivariate transforms from separate inverse paths, then the same covariance algebra
            McSettings fb = mc;
            fb.seed = mc.seed ^ kFallbackSeedMix;
            const auto lts = estimate_inverse_lts(sub, gamma, s, t, fb);
            bt.lt_sum = lts.rows[0].estimate;
            bt.lt_diff = lts.rows[1].estimate;
            row.source = "monte_carlo_fallback";
            fallbacks.push_back({{"s", s},
                                 {"t", t},
                                 {"lt_sum", bt.lt_sum},
                                 {"lt_sum_se", lts.rows[0].se},
                                 {"lt_diff", bt.lt_diff},
                                 {"lt_diff_se", lts.rows[1].se}});
        }
        analytic.push_back(gfhp_covariance_from(m, s, t, bt, opt));
    }
    res.summary["subordinator"] = sub.family();
    res.summary["inversion_order"] = c.inversion_order;
    res.summary["fallbacks"] = std::move(fallbacks);
    finish_mc(res, std::move(rep), analytic, &step, gamma);
}

inline void run_lemma_check(const ExperimentConfig& c, const RunOptions& o, RunResult& res) {
    const auto& sub = need_sub(c, Command::LemmaCheck);
    if (sub.get_if<TemperedStable>() == nullptr) {
        throw ConfigError(c.source, 1, "lemma-check needs a tempered_stable or stable subordinator");
    }
    if (c.pairs.empty()) {
        throw ConfigError(c.source, 1, "lemma-check needs a non-empty 'pairs' array");
    }
    double gamma = 0.0;
    if (c.gamma) {
        gamma = *c.gamma;
    } else if (c.hawkes) {
        gamma = derive(*c.hawkes).gamma;
    } else {
        throw ConfigError(c.source, 1, "lemma-check needs 'gamma' or a 'hawkes' block");
    }
    if (!(gamma > 0.0)) {
        throw StationarityError("lemma-check: gamma must be positive");
    }
    const auto shipped = c.lemma41_variant;
    const auto other = shipped == Lemma41Variant::Proof ? Lemma41Variant::Statement : Lemma41Variant::Proof;
    const AnalyticOptions opt_shipped{shipped, c.convolution_tol, c.inversion_order};
    const AnalyticOptions opt_other{other, c.convolution_tol, c.inversion_order};

    auto mc = settings(c, o);
    double t_max = 0.0;
    for (const auto& p : c.pairs) {
        t_max = std::max(t_max, p.second);
    }
    // rule applied to the first pair; all pairs share the step
    auto estimate_first = [&](const McSettings& s) {
        return estimate_inverse_lts(sub, gamma, c.pairs[0].first, c.pairs[0].second, s);
    };
    const auto step = choose_step(c, mc, gamma, t_max, estimate_first);
    mc.step = step.step;

    MomentReport all;
    std::vector<double> analytic;
    nlohmann::ordered_json arb = nlohmann::ordered_json::array();
    bool arbiter_ok = true;
    for (const auto& [s, t] : c.pairs) {
        const auto rep = estimate_inverse_lts(sub, gamma, s, t, mc);
        const SeriesClock clock(sub);
        for (const auto& r : rep.rows) {
            if (r.quantity == "lt_sum") {
                auto a = r;
                a.quantity = std::string("lt_sum_") + variant_name(shipped);
                all.rows.push_back(a);
                analytic.push_back(lt_sum(sub, gamma, s, t, opt_shipped));
                auto b = r;
                b.quantity = std::string("lt_sum_") + variant_name(other);
                b.gated = false;
                all.rows.push_back(b);
                analytic.push_back(lt_sum(sub, gamma, s, t, opt_other));
            } else if (r.quantity == "lt_diff") {
                all.rows.push_back(r);
                analytic.push_back(lt_diff(sub, gamma, s, t, opt_shipped));
            } else {
                all.rows.push_back(r);
                analytic.push_back(clock.phi(gamma, r.t));
            }
        }
        all.n_paths = rep.n_paths;
        all.seed = rep.seed;
        all.bias_bound = rep.bias_bound;
    }
    const std::size_t per_pair = all.rows.size() / c.pairs.size();
    finish_mc(res, std::move(all), analytic, &step, gamma);
    for (std::size_t i = 0; i < c.pairs.size(); ++i) {
        const auto& a = res.report.rows[i * per_pair];
        const auto& b = res.report.rows[i * per_pair + 1];
        const bool pa = std::abs(a.z) < kZGate;
        const bool pb = std::abs(b.z) < kZGate;
        arbiter_ok = arbiter_ok && (pa != pb) && pa;
        arb.push_back({{"s", c.pairs[i].first},
                       {"t", c.pairs[i].second},
                       {variant_name(shipped), {{"z", jnum(a.z)}, {"pass", pa}}},
                       {variant_name(other), {{"z", jnum(b.z)}, {"pass", pb}}},
                       {"exactly_one_passes", pa != pb}});
    }
    res.summary["lemma41_variant"] = variant_name(shipped);
    res.summary["gamma"] = gamma;
    res.summary["arbiter"] = std::move(arb);
    res.summary["arbiter_pass"] = arbiter_ok;
    res.pass = res.pass && arbiter_ok;
}

}  // namespace detail

/// Runs one subcommand without touching the filesystem. Throws ConfigError, ValidationError
/// or NumericError subclasses.
inline RunResult run_experiment(Command cmd, const ExperimentConfig& c, const RunOptions& o = {}) {
    RunResult res;
    res.summary["command"] = command_name(cmd);
    switch (cmd) {
        case Command::MlEval:
            detail::run_ml_eval(c, res);
            break;
        case Command::Hp:
            detail::run_hp(c, o, res);
            break;
        case Command::Tfhp:
            detail::run_tfhp(c, o, res);
            break;
        case Command::Gfhp:
            detail::run_gfhp(c, o, res);
            break;
        case Command::LemmaCheck:
            detail::run_lemma_check(c, o, res);
            break;
    }
    res.summary["pass"] = res.pass;
    const std::string stem = command_name(cmd);
    res.csv_name = c.output ? c.output->csv : stem + ".csv";
    res.json_name = c.output ? c.output->json : stem + "_summary.json";
    return res;
}

/// Writes <csv_name> and <json_name> under dir (created if needed).
inline void write_outputs(const RunResult& res, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto put = [&](const std::string& name, const std::string& text) {
        std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
        if (!(out << text)) {
            throw ResourceError("cannot write " + (dir / name).string());
        }
    };
    put(res.csv_name, res.csv);
    put(res.json_name, res.summary.dump(2) + "\n");
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace tfhp
