#pragma once

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>

#include <metawave/config.hpp>
#include <metawave/meta.hpp>
#include <metawave/metrics.hpp>
#include <metawave/scene.hpp>
#include <metawave/tracking.hpp>

namespace metawave {

namespace streams {
    // Stream labels under the master seed. Environment streams depend only
    // on (trial, stage), so every agent replays the same scene, states,
    // observations, loss noise and target; agents draw their own posterior
    // samples from per-kind streams. Adding an agent never perturbs the
    // environment draws.
    enum : std::uint64_t {
        PStar = 1,
        Scene = 2,
        State = 3,
        Observation = 4,
        LossNoise = 5,
        Target = 6,
        Measurement = 7,
        AgentBase = 16,
    };

    inline RngStream env(std::uint64_t master, std::uint64_t label, int trial, int stage) {
        return RngStream(deriveSeed(master, {label, static_cast<std::uint64_t>(trial), static_cast<std::uint64_t>(stage)}));
    }

    inline RngStream agent(std::uint64_t master, AgentKind kind, int trial, int stage) {
        return RngStream(deriveSeed(master, {AgentBase + static_cast<std::uint64_t>(kind),
                                             static_cast<std::uint64_t>(trial), static_cast<std::uint64_t>(stage)}));
    }
}

namespace detail {

    struct TrackOutcome {
        TrackStats stats;
        std::vector<double> regretByCpi;
        std::vector<double> rmseByCpi;   // filled only when requested
        Mat design;                      // chosen features, one row per CPI
        Vec losses;
        std::uint64_t stateHash = 0;
    };

    inline std::uint64_t fnv1a(std::uint64_t h, std::uint64_t x) {
        for (int b = 0; b < 8; ++b) {
            h ^= (x >> (8 * b)) & 0xff;
            h *= 0x100000001b3ull;
        }
        return h;
    }

    /// Plays one track. All environment randomness comes from the four env
    /// streams, which consume a fixed number of draws per CPI, so replaying
    /// with a different policy reproduces the same realization bit for bit.
    inline TrackOutcome runTrack(const ExperimentConfig & cfg, const Scene & scene, const Gaussian & prior,
                                 RngStream stateRng, RngStream obsRng, RngStream noiseRng,
                                 RngStream targetRng, RngStream measRng, RngStream & agentRng,
                                 bool wantRmse) {
        const int n = cfg.horizon;
        const auto & tc = cfg.target;

        TrackOutcome out;
        out.regretByCpi.assign(n, 0.0);
        if (wantRmse)
            out.rmseByCpi.assign(n, 0.0);
        out.design = Mat(n, cfg.featureDim);
        out.losses = Vec(n);
        out.stateHash = 1469598103934665603ull;

        // Initial target: uniform bearing and range, uniform speed.
        TargetState target;
        {
            const double bearing = targetRng.uniform(0.0, 2.0 * std::numbers::pi);
            const double range = targetRng.uniform(tc.rangeMinM, tc.rangeMaxM);
            target.position = range * Eigen::Vector2d(std::cos(bearing), std::sin(bearing));
            const double speed = targetRng.uniform(tc.speedMinMps, tc.speedMaxMps);
            const double heading = targetRng.uniform(0.0, 2.0 * std::numbers::pi);
            target.velocity = speed * Eigen::Vector2d(std::cos(heading), std::sin(heading));
        }

        TrackerState tracker;
        tracker.estimate.head<2>() = target.position + tc.initPosSigmaM * Eigen::Vector2d(targetRng.normal(), targetRng.normal());
        tracker.estimate.tail<2>().setZero();
        tracker.covariance = Eigen::Vector4d(tc.initPosSigmaM * tc.initPosSigmaM, tc.initPosSigmaM * tc.initPosSigmaM,
                                             tc.initVelSigmaMps * tc.initVelSigmaMps, tc.initVelSigmaMps * tc.initVelSigmaMps)
                                 .asDiagonal();
        const TrackerParams trackerParams{tc.processNoise, tc.measurementVarAt0Db};

        // Pre-track state context: r i.i.d. uniform states seed the
        // memoryful chain.
        std::vector<int> stateHistory;
        stateHistory.reserve(scene.memoryOrder + n);
        for (int i = 0; i < scene.memoryOrder; ++i)
            stateHistory.push_back(static_cast<int>(stateRng.uniformIndex(scene.stateCount)));

        AgentState agent = initAgent(prior, cfg.noise.sigma2);
        LostTrackDetector detector;
        double sinrSum = 0.0;

        for (int k = 0; k < n; ++k) {
            const int state = stepState(scene, stateHistory, stateRng);
            stateHistory.push_back(state);
            out.stateHash = fnv1a(out.stateHash, static_cast<std::uint64_t>(state));
            const int obs = observeState(scene, state, obsRng);

            const double trackRange = std::max(tracker.rangeEstimateM(), 1.0);
            const ContextSet ctx = contextFeatures(scene, obs, trackRange);
            const int w = selectWaveform(agent, ctx, agentRng);
            const Vec phi = ctx.feature(w);

            const double loss = realizeLoss(scene, phi, noiseRng);
            const double sinrDb = -loss;
            agent = updateAgent(agent, phi, loss);

            out.design.row(k) = phi.transpose();
            out.losses[k] = loss;
            out.regretByCpi[k] = instantRegret(scene.trueTheta, ctx, w);
            out.stats.regret += out.regretByCpi[k];
            sinrSum += sinrDb;
            detector = detectLostTrack(detector, sinrDb);

            target = stepTarget(target, tc.dtSeconds, tc.processNoise, targetRng, tc.maxSpeedMps);
            const double sinrLinear = std::pow(10.0, sinrDb / 10.0);
            const double measSigma = std::sqrt(tc.measurementVarAt0Db / sinrLinear);
            const Eigen::Vector2d z = target.position + measSigma * Eigen::Vector2d(measRng.normal(), measRng.normal());
            tracker = trackerUpdate(tracker, z, sinrDb, tc.dtSeconds, trackerParams);

            if (wantRmse)
                out.rmseByCpi[k] = (tracker.positionEstimate() - target.position).norm();
        }

        out.stats.meanSinrDb = sinrSum / n;
        out.stats.lost = detector.tripped;
        return out;
    }
}

/// One Monte Carlo replication of the §-level protocol: draw the task
/// distribution P⋆ once, then run every enabled agent over m tracks of n
/// CPIs on identical environment realizations. The meta agent carries its
/// meta-posterior across tracks; the others re-initialize each track.
inline MetricsRecord runTrial(const ExperimentConfig & cfg, int trial) {
    const int d = cfg.featureDim;
    const auto master = cfg.seed;

    RngStream pstarRng(deriveSeed(master, {streams::PStar, static_cast<std::uint64_t>(trial)}));
    const Vec muStar = std::sqrt(cfg.noise.sigmaQ2) * pstarRng.normalVector(d);
    const Gaussian pStar = Gaussian::isotropic(muStar, cfg.noise.sigma02);
    const Gaussian flatPrior = Gaussian::isotropic(Vec::Zero(d), cfg.uninformativePriorScale * cfg.noise.sigmaQ2);

    MetricsRecord rec;
    rec.agents = cfg.agents;
    std::sort(rec.agents.begin(), rec.agents.end());   // canonical order
    rec.agents.erase(std::unique(rec.agents.begin(), rec.agents.end()), rec.agents.end());
    rec.series.resize(rec.agents.size());
    for (auto & s : rec.series) {
        s.tracks.reserve(cfg.tracks);
        s.regretByCpi.assign(cfg.horizon, 0.0);
        s.rmseFinalTrack.assign(cfg.horizon, 0.0);
    }

    MetaPosterior metaQ = initMeta(d, cfg.noise.sigmaQ2, cfg.noise.sigma02, cfg.noise.sigma2);

    for (int stage = 0; stage < cfg.tracks; ++stage) {
        auto sceneRng = streams::env(master, streams::Scene, trial, stage);
        const Scene scene = sampleTask(pStar, cfg.scene, cfg.waveforms, cfg.noise.sigma2, sceneRng);
        const bool finalStage = stage == cfg.tracks - 1;

        std::uint64_t stageHash = 0;
        bool haveHash = false;

        for (size_t ai = 0; ai < rec.agents.size(); ++ai) {
            const AgentKind kind = rec.agents[ai];
            auto agentRng = streams::agent(master, kind, trial, stage);

            Gaussian prior = flatPrior;
            if (kind == AgentKind::Oracle)
                prior = pStar;
            else if (kind == AgentKind::Meta) {
                // Q_s as held while playing stage s, before its update.
                rec.klPerTrack.push_back(klGaussian(metaQ.plugInPrior(), pStar));
                prior = samplePrior(metaQ, agentRng);
            }

            auto outcome = detail::runTrack(cfg, scene, prior,
                                            streams::env(master, streams::State, trial, stage),
                                            streams::env(master, streams::Observation, trial, stage),
                                            streams::env(master, streams::LossNoise, trial, stage),
                                            streams::env(master, streams::Target, trial, stage),
                                            streams::env(master, streams::Measurement, trial, stage),
                                            agentRng, finalStage);

            if (!haveHash) {
                stageHash = outcome.stateHash;
                haveHash = true;
            } else if (stageHash != outcome.stateHash) {
                throw Error("common-random-number invariant broken: state sequences diverged across agents");
            }

            auto & series = rec.series[ai];
            series.tracks.push_back(outcome.stats);
            for (int k = 0; k < cfg.horizon; ++k)
                series.regretByCpi[k] += outcome.regretByCpi[k];
            if (finalStage)
                series.rmseFinalTrack = outcome.rmseByCpi;

            if (kind == AgentKind::Meta)
                metaQ = metaUpdate(metaQ, StageData{std::move(outcome.design), std::move(outcome.losses)});
        }
        rec.stateSequenceHash.push_back(stageHash);
    }
    return rec;
}

/// Runs all trials, optionally across worker threads. Each trial owns its
/// streams and writes into its own slot, so the result is identical for
/// any worker count.
inline std::vector<MetricsRecord> runTrials(const ExperimentConfig & cfg) {
    std::vector<MetricsRecord> out(cfg.trials);
    const int workers = std::max(1, std::min(cfg.workers, cfg.trials));
    if (workers == 1) {
        for (int i = 0; i < cfg.trials; ++i)
            out[i] = runTrial(cfg, i);
        return out;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    std::atomic<bool> failed{false};
    std::string firstError;
    std::mutex errMutex;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const int i = next.fetch_add(1);
                if (i >= cfg.trials || failed.load())
                    return;
                try {
                    out[i] = runTrial(cfg, i);
                } catch (const std::exception & e) {
                    std::lock_guard lock(errMutex);
                    if (!failed.exchange(true))
                        firstError = "trial " + std::to_string(i) + ": " + e.what();
                    return;
                }
            }
        });
    }
    for (auto & th : pool)
        th.join();
    if (failed.load())
        throw Error(firstError);
    return out;
}

// ---- result emission ------------------------------------------------------

namespace csv {
    inline std::string g6(double x) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.6g", x);
        return buf;
    }

    inline std::string lostTracks(const MetricsRecord & agg) {
        std::string s = "track,agent,mean_cum_lost,stderr\n";
        const size_t m = agg.cumLost.empty() ? 0 : agg.cumLost[0].mean.size();
        for (size_t tr = 0; tr < m; ++tr)
            for (size_t a = 0; a < agg.agents.size(); ++a)
                s += std::to_string(tr + 1) + "," + agentName(agg.agents[a]) + "," +
                     g6(agg.cumLost[a].mean[tr]) + "," + g6(agg.cumLost[a].se[tr]) + "\n";
        return s;
    }

    inline std::string regret(const MetricsRecord & agg) {
        std::string s = "track,agent,cum_regret_mean,stderr\n";
        const size_t m = agg.cumRegret.empty() ? 0 : agg.cumRegret[0].mean.size();
        for (size_t tr = 0; tr < m; ++tr)
            for (size_t a = 0; a < agg.agents.size(); ++a)
                s += std::to_string(tr + 1) + "," + agentName(agg.agents[a]) + "," +
                     g6(agg.cumRegret[a].mean[tr]) + "," + g6(agg.cumRegret[a].se[tr]) + "\n";
        return s;
    }

    inline std::string sinr(const MetricsRecord & agg) {
        std::string s = "track,agent,mean_sinr_db,stderr\n";
        const size_t m = agg.meanSinr.empty() ? 0 : agg.meanSinr[0].mean.size();
        for (size_t tr = 0; tr < m; ++tr)
            for (size_t a = 0; a < agg.agents.size(); ++a)
                s += std::to_string(tr + 1) + "," + agentName(agg.agents[a]) + "," +
                     g6(agg.meanSinr[a].mean[tr]) + "," + g6(agg.meanSinr[a].se[tr]) + "\n";
        return s;
    }

    inline std::string kl(const MetricsRecord & agg) {
        std::string s = "track,kl_mean,kl_stderr\n";
        for (size_t tr = 0; tr < agg.kl.mean.size(); ++tr)
            s += std::to_string(tr + 1) + "," + g6(agg.kl.mean[tr]) + "," + g6(agg.kl.se[tr]) + "\n";
        return s;
    }

    inline std::string rmseFinalTrack(const MetricsRecord & agg) {
        std::string s = "cpi,agent,rmse_m,stderr\n";
        const size_t n = agg.rmse.empty() ? 0 : agg.rmse[0].mean.size();
        for (size_t k = 0; k < n; ++k)
            for (size_t a = 0; a < agg.agents.size(); ++a)
                s += std::to_string(k + 1) + "," + agentName(agg.agents[a]) + "," +
                     g6(agg.rmse[a].mean[k]) + "," + g6(agg.rmse[a].se[k]) + "\n";
        return s;
    }
}

/// Writes the Fig. 2-6 data series, the resolved config and the headline
/// summary under outDir.
inline void emitResults(const MetricsRecord & agg, const ExperimentConfig & cfg,
                        const std::filesystem::path & outDir) {
    std::error_code ec;
    std::filesystem::create_directories(outDir, ec);
    auto write = [&](const char * name, const std::string & body) {
        const auto path = outDir / name;
        std::ofstream f(path, std::ios::binary);
        if (!f)
            throw Error("cannot open " + path.string() + " for writing");
        f << body;
        if (!f)
            throw Error("write failed for " + path.string());
    };
    write("lost_tracks.csv", csv::lostTracks(agg));
    write("regret.csv", csv::regret(agg));
    write("sinr.csv", csv::sinr(agg));
    write("kl.csv", csv::kl(agg));
    write("rmse_final_track.csv", csv::rmseFinalTrack(agg));
    write("config.json", configToJson(cfg).dump(2) + "\n");
    nlohmann::json summary(agg.summary);
    write("summary.json", summary.dump(2) + "\n");
}

}
