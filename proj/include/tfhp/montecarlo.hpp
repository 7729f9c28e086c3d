#pragma once

#include "tfhp/bernstein.hpp"
#include "tfhp/errors.hpp"
#include "tfhp/hawkes.hpp"
#include "tfhp/rng.hpp"
#include "tfhp/subordinators.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace tfhp {

inline constexpr std::size_t kJackknifeBlocks = 100;
inline constexpr std::size_t kMinPaths = 100;
inline constexpr double kZGate = 4.0;
inline constexpr double kBiasFraction = 0.25;

struct McSettings {
    std::size_t n_paths = 100000;
    std::uint64_t seed = 1;
    double step = 1e-3;  // internal grid of the inverse subordinator
    unsigned threads = 1;
    std::uint64_t max_steps = kDefaultMaxSteps;
    std::size_t max_events = kMaxEvents;
};

struct MomentRow {
    std::string quantity;
    double s = std::numeric_limits<double>::quiet_NaN();  // NaN for single-time rows
    double t = 0.0;
    double analytic = std::numeric_limits<double>::quiet_NaN();
    double estimate = 0.0;
    double se = 0.0;
    double z = std::numeric_limits<double>::quiet_NaN();
    std::string source = "analytic";
    bool gated = true;  // diagnostic rows carry a z-score but never fail a run
};

struct MomentReport {
    std::vector<MomentRow> rows;
    std::size_t n_paths = 0;
    std::uint64_t seed = 0;
    double bias_bound = 0.0;  // internal step of the inverse sampler, 0 without a time change
    double bias_gamma = 0.0;  // rate multiplying bias_bound in the eligibility rule
    bool eligible = true;
    std::string variant;
};

// ---- block accumulation ------------------------------------------------------------------

namespace detail {

struct Block {
    std::size_t n = 0;
    std::vector<long double> sum;    // k
    std::vector<long double> cross;  // k * k
};

struct Totals {
    long double n = 0;
    std::vector<long double> sum;
    std::vector<long double> cross;
};

inline Totals totals_without(const std::vector<Block>& blocks, std::size_t k, std::optional<std::size_t> skip) {
    Totals t{0, std::vector<long double>(k, 0.0L), std::vector<long double>(k * k, 0.0L)};
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        if (skip && *skip == b) {
            continue;
        }
        t.n += static_cast<long double>(blocks[b].n);
        for (std::size_t i = 0; i < k; ++i) {
            t.sum[i] += blocks[b].sum[i];
        }
        for (std::size_t i = 0; i < k * k; ++i) {
            t.cross[i] += blocks[b].cross[i];
        }
    }
    return t;
}

}  // namespace detail

/// Per-path observation vectors reduced into contiguous path blocks. Block results do not
/// depend on which thread produced them, and the reduction runs in block order.
class BlockStats {
public:
    BlockStats(std::size_t k, std::vector<detail::Block> blocks) : k_(k), blocks_(std::move(blocks)) {}

    std::size_t dimension() const { return k_; }

    std::size_t paths() const {
        std::size_t n = 0;
        for (const auto& b : blocks_) {
            n += b.n;
        }
        return n;
    }

    struct Estimate {
        double value;
        double se;
    };

    Estimate mean(std::size_t i) const {
        return jackknife([i](const detail::Totals& t) { return static_cast<double>(t.sum[i] / t.n); });
    }

    /// Unbiased sample covariance of components i and j (variance when i == j).
    Estimate covariance(std::size_t i, std::size_t j) const {
        const std::size_t k = k_;
        return jackknife([i, j, k](const detail::Totals& t) {
            const long double c = (t.cross[i * k + j] - t.sum[i] * t.sum[j] / t.n) / (t.n - 1.0L);
            return static_cast<double>(c);
        });
    }

private:
    template <class Stat>
    Estimate jackknife(Stat stat) const {
        const double full = stat(detail::totals_without(blocks_, k_, std::nullopt));
        const std::size_t nb = blocks_.size();
        std::vector<double> loo(nb);
        double avg = 0.0;
        for (std::size_t b = 0; b < nb; ++b) {
            loo[b] = stat(detail::totals_without(blocks_, k_, b));
            avg += loo[b];
        }
        avg /= static_cast<double>(nb);
        double ss = 0.0;
        for (double v : loo) {
            ss += (v - avg) * (v - avg);
        }
        return {full, std::sqrt(ss * static_cast<double>(nb - 1) / static_cast<double>(nb))};
    }

    std::size_t k_;
    std::vector<detail::Block> blocks_;
};

/// Runs fn(path_index, out) for every path, out holding k observations, over kJackknifeBlocks
/// contiguous blocks distributed across threads.
template <class Fn>
BlockStats run_paths(std::size_t n_paths, std::size_t k, unsigned threads, Fn fn, std::uint64_t first_path = 0) {
    if (n_paths < kMinPaths) {
        throw DomainError("Monte Carlo needs at least " + std::to_string(kMinPaths) + " paths");
    }
    const std::size_t nb = kJackknifeBlocks;
    std::vector<detail::Block> blocks(nb);
    std::vector<std::exception_ptr> errors(nb);
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        std::vector<double> obs(k);
        for (std::size_t b = next++; b < nb; b = next++) {
            auto& blk = blocks[b];
            blk.sum.assign(k, 0.0L);
            blk.cross.assign(k * k, 0.0L);
            const std::size_t lo = b * n_paths / nb;
            const std::size_t hi = (b + 1) * n_paths / nb;
            try {
                for (std::size_t p = lo; p < hi; ++p) {
                    fn(first_path + p, obs.data());
                    for (std::size_t i = 0; i < k; ++i) {
                        blk.sum[i] += obs[i];
                        for (std::size_t j = 0; j < k; ++j) {
                            blk.cross[i * k + j] += static_cast<long double>(obs[i]) * obs[j];
                        }
                    }
                    ++blk.n;
                }
            } catch (...) {
                errors[b] = std::current_exception();
            }
        }
    };
    const unsigned nt = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(nb)));
    if (nt == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned i = 0; i < nt; ++i) {
            pool.emplace_back(worker);
        }
        for (auto& th : pool) {
            th.join();
        }
    }
    for (const auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
    return BlockStats(k, std::move(blocks));
}

// ---- time grids --------------------------------------------------------------------------

struct TimeGrid {
    std::vector<double> times;                          // sorted union of all needed times
    std::vector<std::size_t> time_index;                // position of each requested time
    std::vector<std::pair<std::size_t, std::size_t>> pair_index;
};

inline TimeGrid make_grid(const std::vector<double>& times, const std::vector<std::pair<double, double>>& pairs) {
    TimeGrid g;
    g.times = times;
    for (const auto& [s, t] : pairs) {
        if (!(s > 0.0) || !(s <= t)) {
            throw DomainError("time pairs need 0 < s <= t");
        }
        g.times.push_back(s);
        g.times.push_back(t);
    }
    std::sort(g.times.begin(), g.times.end());
    g.times.erase(std::unique(g.times.begin(), g.times.end()), g.times.end());
    if (g.times.empty()) {
        throw DomainError("empty time grid");
    }
    if (!(g.times.front() > 0.0)) {
        throw DomainError("times must be positive");
    }
    auto pos = [&](double x) {
        return static_cast<std::size_t>(std::lower_bound(g.times.begin(), g.times.end(), x) - g.times.begin());
    };
    for (double t : times) {
        g.time_index.push_back(pos(t));
    }
    for (const auto& [s, t] : pairs) {
        g.pair_index.emplace_back(pos(s), pos(t));
    }
    return g;
}

// ---- estimators --------------------------------------------------------------------------

namespace detail {

inline MomentRow row(std::string quantity, double s, double t, BlockStats::Estimate e) {
    MomentRow r;
    r.quantity = std::move(quantity);
    r.s = s;
    r.t = t;
    r.estimate = e.value;
    r.se = e.se;
    return r;
}

// mean and variance per requested time, covariance per pair; observations are indexed by grid
inline void moment_rows(MomentReport& rep, const BlockStats& st, const TimeGrid& g, const std::vector<double>& times,
                        const std::vector<std::pair<double, double>>& pairs) {
    const double none = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t j = 0; j < times.size(); ++j) {
        rep.rows.push_back(row("mean", none, times[j], st.mean(g.time_index[j])));
    }
    for (std::size_t j = 0; j < times.size(); ++j) {
        rep.rows.push_back(row("variance", none, times[j], st.covariance(g.time_index[j], g.time_index[j])));
    }
    for (std::size_t j = 0; j < pairs.size(); ++j) {
        const auto [a, b] = g.pair_index[j];
        rep.rows.push_back(row("covariance", pairs[j].first, pairs[j].second, st.covariance(a, b)));
    }
}

}  // namespace detail

/// lambda(E(t)) over composed paths: an inverse-subordinator sample on the grid, then an
/// independent Hawkes path up to the largest sampled internal time.
inline MomentReport estimate_tfhp_moments(const HawkesParams& hp, const BernsteinSpec& sub,
                                          const std::vector<double>& times,
                                          const std::vector<std::pair<double, double>>& pairs,
                                          const McSettings& mc) {
    hp.validate();
    const auto g = make_grid(times, pairs);
    const std::size_t k = g.times.size();
    auto fn = [&](std::uint64_t path, double* out) {
        Stream clock_rng(mc.seed, path, kSubordinatorStream);
        Stream hawkes_rng(mc.seed, path, kHawkesStream);
        const auto inv = sample_inverse_on_grid(sub, g.times, mc.step, clock_rng, mc.max_steps);
        const auto hk = simulate_hawkes(hp, inv.values.back(), hawkes_rng, mc.max_events);
        for (std::size_t j = 0; j < k; ++j) {
            out[j] = intensity_at_recursive(hk, hp, inv.values[j]);
        }
    };
    const auto st = run_paths(mc.n_paths, k, mc.threads, fn);
    MomentReport rep;
    rep.n_paths = mc.n_paths;
    rep.seed = mc.seed;
    rep.bias_bound = mc.step;
    detail::moment_rows(rep, st, g, times, pairs);
    return rep;
}

/// Classical Hawkes moments (no time change); adds the mean event count on [0, max time].
inline MomentReport estimate_hp_moments(const HawkesParams& hp, const std::vector<double>& times,
                                        const std::vector<std::pair<double, double>>& pairs, const McSettings& mc) {
    hp.validate();
    const auto g = make_grid(times, pairs);
    const std::size_t k = g.times.size();
    auto fn = [&](std::uint64_t path, double* out) {
        Stream hawkes_rng(mc.seed, path, kHawkesStream);
        const auto hk = simulate_hawkes(hp, g.times.back(), hawkes_rng, mc.max_events);
        for (std::size_t j = 0; j < k; ++j) {
            out[j] = intensity_at_recursive(hk, hp, g.times[j]);
        }
        out[k] = static_cast<double>(hk.times.size());
    };
    const auto st = run_paths(mc.n_paths, k + 1, mc.threads, fn);
    MomentReport rep;
    rep.n_paths = mc.n_paths;
    rep.seed = mc.seed;
    detail::moment_rows(rep, st, g, times, pairs);
    rep.rows.push_back(detail::row("count_mean", std::numeric_limits<double>::quiet_NaN(), g.times.back(), st.mean(k)));
    return rep;
}

/// Means of exp(-gamma (E_s + E_t)) and exp(-gamma (E_t - E_s)) from single inverse paths,
/// plus exp(-gamma E_s), exp(-gamma E_t).
inline MomentReport estimate_inverse_lts(const BernsteinSpec& sub, double gamma, double s, double t,
                                         const McSettings& mc) {
    if (!(s > 0.0) || !(s <= t) || !(gamma > 0.0)) {
        throw DomainError("estimate_inverse_lts: needs 0 < s <= t and gamma > 0");
    }
    const std::vector<double> grid = s == t ? std::vector<double>{t} : std::vector<double>{s, t};
    auto fn = [&](std::uint64_t path, double* out) {
        Stream clock_rng(mc.seed, path, kSubordinatorStream);
        const auto inv = sample_inverse_on_grid(sub, grid, mc.step, clock_rng, mc.max_steps);
        const double es = inv.values.front();
        const double et = inv.values.back();
        out[0] = std::exp(-gamma * (es + et));
        out[1] = std::exp(-gamma * (et - es));
        out[2] = std::exp(-gamma * es);
        out[3] = std::exp(-gamma * et);
    };
    const auto st = run_paths(mc.n_paths, 4, mc.threads, fn);
    MomentReport rep;
    rep.n_paths = mc.n_paths;
    rep.seed = mc.seed;
    rep.bias_bound = mc.step;
    const double none = std::numeric_limits<double>::quiet_NaN();
    rep.rows.push_back(detail::row("lt_sum", s, t, st.mean(0)));
    rep.rows.push_back(detail::row("lt_diff", s, t, st.mean(1)));
    rep.rows.push_back(detail::row("phi", none, s, st.mean(2)));
    if (s != t) {
        rep.rows.push_back(detail::row("phi", none, t, st.mean(3)));
    }
    return rep;
}

/// E[E(t)] and E[exp(-gamma E(t))] per time.
inline MomentReport estimate_inverse_moments(const BernsteinSpec& sub, double gamma, const std::vector<double>& times,
                                             const McSettings& mc) {
    const auto g = make_grid(times, {});
    const std::size_t k = g.times.size();
    auto fn = [&](std::uint64_t path, double* out) {
        Stream clock_rng(mc.seed, path, kSubordinatorStream);
        const auto inv = sample_inverse_on_grid(sub, g.times, mc.step, clock_rng, mc.max_steps);
        for (std::size_t j = 0; j < k; ++j) {
            out[j] = inv.values[j];
            out[k + j] = std::exp(-gamma * inv.values[j]);
        }
    };
    const auto st = run_paths(mc.n_paths, 2 * k, mc.threads, fn);
    MomentReport rep;
    rep.n_paths = mc.n_paths;
    rep.seed = mc.seed;
    rep.bias_bound = mc.step;
    const double none = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t j = 0; j < times.size(); ++j) {
        rep.rows.push_back(detail::row("inverse_mean", none, times[j], st.mean(g.time_index[j])));
    }
    for (std::size_t j = 0; j < times.size(); ++j) {
        rep.rows.push_back(detail::row("phi", none, times[j], st.mean(k + g.time_index[j])));
    }
    return rep;
}

// ---- comparison --------------------------------------------------------------------------

struct Verdict {
    bool pass = true;
    std::vector<std::size_t> failing;  // row indices with |z| >= kZGate
    double max_abs_z = 0.0;
};

/// Attaches analytic values and z-scores to the report rows (same order) and gates |z| < 4
/// on the rows marked gated.
inline Verdict compare(const std::vector<double>& analytic, MomentReport& report) {
    if (report.rows.empty()) {
        throw DomainError("compare: empty report");
    }
    if (analytic.size() != report.rows.size()) {
        throw DomainError("compare: " + std::to_string(analytic.size()) + " analytic values for " +
                          std::to_string(report.rows.size()) + " rows");
    }
    Verdict v;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        auto& r = report.rows[i];
        r.analytic = analytic[i];
        const double diff = r.analytic - r.estimate;
        if (r.se > 0.0) {
            r.z = diff / r.se;
        } else {
            // degenerate sample (all paths equal): only rounding-level agreement counts
            r.z = std::abs(diff) <= 1e-12 * (1.0 + std::abs(r.analytic))
                      ? 0.0
                      : std::copysign(std::numeric_limits<double>::infinity(), diff);
        }
        if (!r.gated) {
            continue;
        }
        v.max_abs_z = std::max(v.max_abs_z, std::abs(r.z));
        if (!(std::abs(r.z) < kZGate)) {
            v.pass = false;
            v.failing.push_back(i);
        }
    }
    return v;
}

/// bias_bound * gamma < 0.25 * min(se) over the report rows.
inline bool bias_eligible(const MomentReport& report, double gamma) {
    double min_se = std::numeric_limits<double>::infinity();
    for (const auto& r : report.rows) {
        min_se = std::min(min_se, r.se);
    }
    return report.bias_bound * gamma < kBiasFraction * min_se;
}

/// Internal step from the bias rule: step = safety * 0.25 * se / gamma, with se the smallest
/// standard error projected to n_paths from a pilot report.
inline double step_from_pilot(const MomentReport& pilot, std::size_t n_paths, double gamma, double safety = 0.8) {
    double min_se = std::numeric_limits<double>::infinity();
    for (const auto& r : pilot.rows) {
        min_se = std::min(min_se, r.se);
    }
    if (!(min_se > 0.0) || !std::isfinite(min_se)) {
        throw ConsistencyError("pilot run produced no usable standard error");
    }
    const double projected = min_se * std::sqrt(static_cast<double>(pilot.n_paths) / static_cast<double>(n_paths));
    return safety * kBiasFraction * projected / gamma;
}

}  // namespace tfhp
