#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <metawave/config.hpp>
#include <metawave/errors.hpp>

namespace metawave {

struct TrackStats {
    double regret = 0.0;       // within-track total regret
    double meanSinrDb = 0.0;   // mean over the track's CPIs
    bool lost = false;         // the 5-consecutive-below-3-dB rule tripped
};

struct AgentSeries {
    std::vector<TrackStats> tracks;        // one per stage
    std::vector<double> rmseFinalTrack;    // per-CPI position error (m) on the final track
    std::vector<double> regretByCpi;       // instant regret per CPI, summed over stages
};

struct SeriesStat {
    std::vector<double> mean;
    std::vector<double> se;
};

/// Per-trial payload plus, after aggregate(), cross-trial statistics. A
/// single trial is its own aggregate with zero standard errors.
struct MetricsRecord {
    std::vector<AgentKind> agents;
    std::vector<AgentSeries> series;               // parallel to agents
    std::vector<double> klPerTrack;                // meta only: KL(plug-in Q_s ‖ P⋆) before stage s's update
    std::vector<std::uint64_t> stateSequenceHash;  // per stage; equal across agents by construction
    int trials = 1;

    // cross-trial aggregates, parallel to agents
    std::vector<SeriesStat> cumLost;
    std::vector<SeriesStat> cumRegret;
    std::vector<SeriesStat> meanSinr;
    std::vector<SeriesStat> rmse;                  // rms over trials per CPI; se of the error
    SeriesStat kl;                                 // mean/se across trials
    std::vector<double> klMedian;                  // median across trials
    std::map<std::string, double> summary;         // headline numbers

    int agentIndex(AgentKind a) const {
        for (size_t i = 0; i < agents.size(); ++i)
            if (agents[i] == a) return static_cast<int>(i);
        return -1;
    }
};

namespace stats {
    inline double mean(const std::vector<double> & v) {
        double s = 0.0;
        for (double x : v) s += x;
        return v.empty() ? 0.0 : s / static_cast<double>(v.size());
    }

    /// Standard error of the mean; zero for a single sample.
    inline double sem(const std::vector<double> & v) {
        const auto n = v.size();
        if (n < 2) return 0.0;
        const double m = mean(v);
        double ss = 0.0;
        for (double x : v) ss += (x - m) * (x - m);
        return std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n));
    }

    inline double median(std::vector<double> v) {
        if (v.empty()) return 0.0;
        std::sort(v.begin(), v.end());
        const auto n = v.size();
        return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    }

    /// Mean and standard error of the paired difference a − b; the paired
    /// form is what common random numbers buy.
    struct Gap { double mean = 0.0; double se = 0.0; };
    inline Gap pairedGap(const std::vector<double> & a, const std::vector<double> & b) {
        if (a.size() != b.size())
            throw ShapeMismatch("pairedGap: unequal sample counts");
        std::vector<double> d(a.size());
        for (size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
        return Gap{mean(d), sem(d)};
    }
}

namespace detail {
    // Per-trial scalars used by the aggregate summary.
    inline std::vector<double> perTrial(const std::vector<MetricsRecord> & trials, int agentIdx,
                                        auto && extract) {
        std::vector<double> v;
        v.reserve(trials.size());
        for (const auto & t : trials)
            v.push_back(extract(t.series[agentIdx]));
        return v;
    }

    inline double cumulativeRegretAt(const AgentSeries & s, size_t uptoTrack) {
        double c = 0.0;
        for (size_t i = 0; i < uptoTrack && i < s.tracks.size(); ++i)
            c += s.tracks[i].regret;
        return c;
    }

    inline double cumulativeLostAt(const AgentSeries & s, size_t uptoTrack) {
        double c = 0.0;
        for (size_t i = 0; i < uptoTrack && i < s.tracks.size(); ++i)
            c += s.tracks[i].lost ? 1.0 : 0.0;
        return c;
    }

    inline double meanOver(const std::vector<double> & v, size_t lo, size_t hi) {
        double s = 0.0;
        size_t n = 0;
        for (size_t i = lo; i < hi && i < v.size(); ++i, ++n) s += v[i];
        return n ? s / static_cast<double>(n) : 0.0;
    }

    inline double sinrLastTracks(const AgentSeries & s, size_t count) {
        double acc = 0.0;
        size_t n = 0;
        const size_t m = s.tracks.size();
        for (size_t i = m > count ? m - count : 0; i < m; ++i, ++n)
            acc += s.tracks[i].meanSinrDb;
        return n ? acc / static_cast<double>(n) : 0.0;
    }
}

/// Cross-trial reduction: elementwise means and standard errors for every
/// emitted series, plus the paired-gap summary statistics the figures and
/// the acceptance checks read. Shapes must agree across trials.
inline MetricsRecord aggregate(const std::vector<MetricsRecord> & trials) {
    if (trials.empty())
        throw ShapeMismatch("aggregate: no trials");
    const auto & first = trials[0];
    const size_t nAgents = first.agents.size();
    const size_t m = nAgents ? first.series[0].tracks.size() : 0;
    const size_t n = nAgents ? first.series[0].rmseFinalTrack.size() : 0;
    for (const auto & t : trials) {
        if (t.agents != first.agents)
            throw ShapeMismatch("aggregate: agent sets differ across trials");
        for (const auto & s : t.series)
            if (s.tracks.size() != m || s.rmseFinalTrack.size() != n || s.regretByCpi.size() != n)
                throw ShapeMismatch("aggregate: series lengths differ across trials");
        if (t.klPerTrack.size() != first.klPerTrack.size())
            throw ShapeMismatch("aggregate: KL series lengths differ across trials");
    }

    MetricsRecord agg;
    agg.agents = first.agents;
    agg.series = first.series;   // representative payload (trial 0)
    agg.klPerTrack = first.klPerTrack;
    agg.stateSequenceHash = first.stateSequenceHash;
    agg.trials = static_cast<int>(trials.size());

    const size_t t = trials.size();
    std::vector<double> buf(t);

    for (size_t a = 0; a < nAgents; ++a) {
        SeriesStat lost, regret, sinr, rmse;
        for (size_t s = 0; s < m; ++s) {
            for (size_t i = 0; i < t; ++i) buf[i] = detail::cumulativeLostAt(trials[i].series[a], s + 1);
            lost.mean.push_back(stats::mean(buf));
            lost.se.push_back(stats::sem(buf));
            for (size_t i = 0; i < t; ++i) buf[i] = detail::cumulativeRegretAt(trials[i].series[a], s + 1);
            regret.mean.push_back(stats::mean(buf));
            regret.se.push_back(stats::sem(buf));
            for (size_t i = 0; i < t; ++i) buf[i] = trials[i].series[a].tracks[s].meanSinrDb;
            sinr.mean.push_back(stats::mean(buf));
            sinr.se.push_back(stats::sem(buf));
        }
        for (size_t k = 0; k < n; ++k) {
            double sq = 0.0;
            for (size_t i = 0; i < t; ++i) {
                buf[i] = trials[i].series[a].rmseFinalTrack[k];
                sq += buf[i] * buf[i];
            }
            rmse.mean.push_back(std::sqrt(sq / static_cast<double>(t)));
            rmse.se.push_back(stats::sem(buf));
        }
        agg.cumLost.push_back(std::move(lost));
        agg.cumRegret.push_back(std::move(regret));
        agg.meanSinr.push_back(std::move(sinr));
        agg.rmse.push_back(std::move(rmse));
    }

    for (size_t s = 0; s < first.klPerTrack.size(); ++s) {
        for (size_t i = 0; i < t; ++i) buf[i] = trials[i].klPerTrack[s];
        agg.kl.mean.push_back(stats::mean(buf));
        agg.kl.se.push_back(stats::sem(buf));
        agg.klMedian.push_back(stats::median(buf));
    }

    auto & sum = agg.summary;
    sum["trials"] = static_cast<double>(t);
    sum["tracks"] = static_cast<double>(m);
    sum["horizon"] = static_cast<double>(n);

    auto finalRegret = [&](int idx) {
        return detail::perTrial(trials, idx, [m](const AgentSeries & s) { return detail::cumulativeRegretAt(s, m); });
    };
    auto finalLost = [&](int idx) {
        return detail::perTrial(trials, idx, [m](const AgentSeries & s) { return detail::cumulativeLostAt(s, m); });
    };
    auto lastSinr = [&](int idx) {
        return detail::perTrial(trials, idx, [](const AgentSeries & s) { return detail::sinrLastTracks(s, 10); });
    };
    auto earlyRmse = [&](int idx) {
        return detail::perTrial(trials, idx, [](const AgentSeries & s) { return detail::meanOver(s.rmseFinalTrack, 0, 20); });
    };
    auto lateRmse = [&](int idx) {
        return detail::perTrial(trials, idx, [n](const AgentSeries & s) { return detail::meanOver(s.rmseFinalTrack, n >= 50 ? n - 50 : 0, n); });
    };

    for (auto kind : kAllAgents) {
        const int idx = agg.agentIndex(kind);
        if (idx < 0) continue;
        const std::string name = agentName(kind);
        sum["cum_regret_final_" + name] = stats::mean(finalRegret(idx));
        sum["cum_lost_final_" + name] = stats::mean(finalLost(idx));
        sum["sinr_last10_" + name] = stats::mean(lastSinr(idx));
        sum["rmse_early_" + name] = stats::mean(earlyRmse(idx));
        sum["rmse_late_" + name] = stats::mean(lateRmse(idx));
    }

    auto addGap = [&](const std::string & key, const std::vector<double> & a, const std::vector<double> & b) {
        const auto g = stats::pairedGap(a, b);
        sum[key] = g.mean;
        sum[key + "_se"] = g.se;
    };
    const int iu = agg.agentIndex(AgentKind::Uninformative);
    const int im = agg.agentIndex(AgentKind::Meta);
    const int io = agg.agentIndex(AgentKind::Oracle);
    if (iu >= 0 && im >= 0) {
        addGap("lost_tracks_gap", finalLost(iu), finalLost(im));   // uninformative − meta at the final track
        addGap("regret_gap_uninf_meta", finalRegret(iu), finalRegret(im));
        addGap("sinr_gap_meta_uninf", lastSinr(im), lastSinr(iu));
        addGap("rmse_early_gap_uninf_meta", earlyRmse(iu), earlyRmse(im));
    }
    if (im >= 0 && io >= 0) {
        addGap("lost_gap_meta_oracle", finalLost(im), finalLost(io));
        addGap("regret_gap_meta_oracle", finalRegret(im), finalRegret(io));
        addGap("sinr_gap_oracle_meta", lastSinr(io), lastSinr(im));
        if (sum["cum_regret_final_oracle"] > 0.0)
            sum["meta_oracle_regret_ratio"] = sum["cum_regret_final_meta"] / sum["cum_regret_final_oracle"];
    }
    if (!agg.klMedian.empty()) {
        sum["kl_s1_median"] = agg.klMedian.front();
        if (agg.klMedian.size() >= 10)
            sum["kl_s10_median"] = agg.klMedian[9];
        if (agg.klMedian.front() > 0.0 && agg.klMedian.size() >= 10)
            sum["kl_ratio_s10"] = agg.klMedian[9] / agg.klMedian.front();
    }

    // Regret-growth trend for the uninformative agent: within-track
    // cumulative regret at the full horizon vs a quarter of it, averaged
    // over tracks and trials. Monitoring only, not a gate.
    if (iu >= 0 && n >= 4) {
        double c50 = 0.0, c200 = 0.0;
        const size_t quarter = n / 4;
        for (size_t i = 0; i < t; ++i) {
            const auto & r = trials[i].series[iu].regretByCpi;
            double c = 0.0;
            for (size_t k = 0; k < n; ++k) {
                c += r[k];
                if (k + 1 == quarter) c50 += c;
            }
            c200 += c;
        }
        if (c50 > 0.0) {
            sum["trend_regret_ratio_uninformative"] = c200 / c50;
            sum["trend_regret_bound"] = 4.0 * std::sqrt(static_cast<double>(n) / static_cast<double>(quarter));
        }
    }

    return agg;
}

}
