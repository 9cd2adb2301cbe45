#pragma once

#include <algorithm>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include <metawave/bandit.hpp>

namespace metawave {

/// Knobs for drawing a random finite-state target channel. The paper-scale
/// experiment leaves all of these unspecified; defaults are recorded in
/// every emitted config.
struct SceneConfig {
    int stateCount = 6;
    int memoryOrder = 2;                  // states condition on the last r states
    double obsDiagonal = 0.85;            // P(o = s | s)
    double obsNeighbor = 0.10;            // confusion mass on the next state; rest uniform
    double transitionConcentration = 1.0; // Dirichlet alpha for kernel rows
    double relLossMin = -3.0;             // catalog of per-waveform relative losses,
    double relLossMax = 3.0;              // in dB against a nominal return (negative = gain)
    double relLossJitter = 1.2;           // per-(state, waveform) perturbation on top
    double familySplit = 0.45;            // waveforms come in pairs split by 2x this amount
    double referenceRangeM = 10000.0;     // range where the feature scale g = 1
    double featureClampAbs = 25.0;        // features clamped to [-c, c]
    double plausibleStateProb = 0.05;     // worst-case support cutoff on P(s|o)
};

/// One finite-state target channel instance: a memoryful state process, an
/// observation kernel, and the task parameter θ that maps features to mean
/// losses. Immutable once sampled; serializable for replay.
struct Scene {
    int stateCount = 0;
    int waveformCount = 0;
    int memoryOrder = 0;
    Mat transitionKernel;   // |S|^r rows, |S| columns; row = encoded last-r states
    Mat observationKernel;  // |S|×|S|, row = true state
    Vec trueTheta;
    std::vector<std::vector<Vec>> featureTable;   // [observation][waveform] base features
    double lossNoiseVariance = 1.0;
    double referenceRangeM = 10000.0;
    double featureClampAbs = 25.0;
};

namespace detail {
    inline void checkStochastic(const Mat & kernel, const char * who) {
        for (Eigen::Index r = 0; r < kernel.rows(); ++r) {
            if (kernel.row(r).minCoeff() < 0.0)
                throw Error(std::string(who) + ": negative entry in row " + std::to_string(r));
            if (std::abs(kernel.row(r).sum() - 1.0) > 1e-12)
                throw Error(std::string(who) + ": row " + std::to_string(r) + " does not sum to 1");
        }
    }

    inline int drawCategorical(const Vec & probs, RngStream & rng) {
        const double u = rng.uniform01();
        double acc = 0.0;
        for (Eigen::Index i = 0; i < probs.size(); ++i) {
            acc += probs[i];
            if (u < acc)
                return static_cast<int>(i);
        }
        return static_cast<int>(probs.size() - 1);
    }

    inline Vec dirichletRow(Eigen::Index n, double alpha, RngStream & rng) {
        Vec row(n);
        for (Eigen::Index i = 0; i < n; ++i)
            row[i] = rng.gamma(alpha);
        return row / row.sum();
    }

    inline int powi(int base, int exp) {
        int r = 1;
        while (exp-- > 0) r *= base;
        return r;
    }
}

inline void validateScene(const Scene & sc) {
    if (sc.stateCount < 1 || sc.waveformCount < 1 || sc.memoryOrder < 1)
        throw Error("Scene: stateCount, waveformCount and memoryOrder must be >= 1");
    if (sc.transitionKernel.rows() != detail::powi(sc.stateCount, sc.memoryOrder) || sc.transitionKernel.cols() != sc.stateCount)
        throw ShapeMismatch("Scene: transition kernel shape");
    if (sc.observationKernel.rows() != sc.stateCount || sc.observationKernel.cols() != sc.stateCount)
        throw ShapeMismatch("Scene: observation kernel shape");
    detail::checkStochastic(sc.transitionKernel, "transition kernel");
    detail::checkStochastic(sc.observationKernel, "observation kernel");
    if (sc.featureTable.size() != static_cast<size_t>(sc.stateCount))
        throw ShapeMismatch("Scene: feature table rows");
    for (const auto & row : sc.featureTable) {
        if (row.size() != static_cast<size_t>(sc.waveformCount))
            throw ShapeMismatch("Scene: feature table columns");
        for (const auto & phi : row)
            if (phi.size() != sc.trueTheta.size())
                throw ShapeMismatch("Scene: feature dimension");
    }
    if (sc.lossNoiseVariance < 0.0)
        throw NonPositiveVariance("Scene: loss noise variance");
    if (sc.referenceRangeM <= 0.0)
        throw NonPositiveRange("Scene: reference range");
}

/// Draws a task instance: θ ~ P⋆, a Dirichlet transition kernel over the
/// last r states, a diagonally dominant observation kernel, and the
/// per-(observation, waveform) feature table. The feature coordinates are
/// the expected and worst-case relative loss of the waveform given the
/// observation, so the mean loss of (o, w) is ⟨θ, φ(o,w)⟩ by construction.
inline Scene sampleTask(const Gaussian & pStar, const SceneConfig & cfg, int waveformCount,
                        double lossNoiseVariance, RngStream & rng) {
    if (cfg.stateCount < 1 || waveformCount < 1 || cfg.memoryOrder < 1)
        throw Error("sampleTask: stateCount, waveformCount and memoryOrder must be >= 1");
    if (cfg.obsDiagonal < 0.5 || cfg.obsDiagonal > 1.0)
        throw Error("sampleTask: observation diagonal must be in [0.5, 1]");
    if (cfg.relLossMin > cfg.relLossMax)
        throw Error("sampleTask: relative-loss bounds out of order");

    Scene sc;
    sc.stateCount = cfg.stateCount;
    sc.waveformCount = waveformCount;
    sc.memoryOrder = cfg.memoryOrder;
    sc.lossNoiseVariance = lossNoiseVariance;
    sc.referenceRangeM = cfg.referenceRangeM;
    sc.featureClampAbs = cfg.featureClampAbs;
    sc.trueTheta = sampleGaussian(pStar, rng);

    const int s = cfg.stateCount;
    const int rows = detail::powi(s, cfg.memoryOrder);
    sc.transitionKernel = Mat(rows, s);
    for (int r = 0; r < rows; ++r)
        sc.transitionKernel.row(r) = detail::dirichletRow(s, cfg.transitionConcentration, rng).transpose();

    // Observations confuse a state mostly with its cyclic neighbor, the
    // remaining mass spread over the rest; the kernel stays doubly
    // stochastic so the uniform-prior state posterior is its column.
    if (s == 1) {
        sc.observationKernel = Mat::Ones(1, 1);
    } else if (s == 2) {
        sc.observationKernel = Mat::Constant(2, 2, 1.0 - cfg.obsDiagonal);
        sc.observationKernel.diagonal().setConstant(cfg.obsDiagonal);
    } else {
        const double off = (1.0 - cfg.obsDiagonal - cfg.obsNeighbor) / (s - 2);
        if (off < 0.0)
            throw Error("sampleTask: observation diagonal plus neighbor mass exceeds 1");
        sc.observationKernel = Mat::Constant(s, s, off);
        for (int x = 0; x < s; ++x) {
            sc.observationKernel(x, x) = cfg.obsDiagonal;
            sc.observationKernel(x, (x + 1) % s) = cfg.obsNeighbor;
        }
    }

    // Relative loss of transmitting waveform w while the scene is in state
    // x. Each state permutes a common per-waveform catalog and adds a small
    // perturbation: which waveform works best depends on the state, while
    // the channel quality available to a well-chosen waveform stays
    // comparable across states.
    Mat relLoss(s, waveformCount);
    {
        // The catalog pairs similar waveforms (family variants split by a
        // small gap), so a near-equivalent alternative exists next to the
        // best choice; states perturb every entry.
        Vec catalog(waveformCount);
        for (int w = 0; w < waveformCount; w += 2) {
            const double mode = rng.uniform(cfg.relLossMin, cfg.relLossMax);
            catalog[w] = mode - cfg.familySplit;
            if (w + 1 < waveformCount)
                catalog[w + 1] = mode + cfg.familySplit;
        }
        for (int x = 0; x < s; ++x)
            for (int w = 0; w < waveformCount; ++w)
                relLoss(x, w) = catalog[w] + rng.uniform(-cfg.relLossJitter, cfg.relLossJitter);
    }

    // P(s|o) under a uniform state prior: column o of the observation
    // kernel, normalized.
    sc.featureTable.assign(s, std::vector<Vec>(waveformCount));
    for (int o = 0; o < s; ++o) {
        Vec post = sc.observationKernel.col(o);
        post /= post.sum();
        for (int w = 0; w < waveformCount; ++w) {
            double avg = 0.0;
            double worst = -std::numeric_limits<double>::infinity();
            for (int x = 0; x < s; ++x) {
                avg += post[x] * relLoss(x, w);
                if (post[x] > cfg.plausibleStateProb)
                    worst = std::max(worst, relLoss(x, w));
            }
            if (!std::isfinite(worst))   // cutoff excluded every state
                worst = relLoss.col(w).maxCoeff();
            Vec phi(2);
            phi << avg, worst;
            sc.featureTable[o][w] = phi;
        }
    }

    validateScene(sc);
    return sc;
}

/// Advances the state process one step. The kernel row is indexed by the
/// last r states (most recent in the lowest digit); shorter histories are
/// padded at the front with their earliest entry, and an empty history
/// draws uniformly.
inline int stepState(const Scene & sc, std::span<const int> history, RngStream & rng) {
    if (history.empty())
        return static_cast<int>(rng.uniformIndex(sc.stateCount));
    int idx = 0;
    for (int i = 0; i < sc.memoryOrder; ++i) {
        const long k = static_cast<long>(history.size()) - sc.memoryOrder + i;
        const int st = history[k >= 0 ? static_cast<size_t>(k) : 0];
        idx = idx * sc.stateCount + st;
    }
    return detail::drawCategorical(sc.transitionKernel.row(idx).transpose(), rng);
}

/// o ~ P(·|s): one draw from the observation kernel row of the true state.
inline int observeState(const Scene & sc, int state, RngStream & rng) {
    if (state < 0 || state >= sc.stateCount)
        throw Error("observeState: state index out of range");
    return detail::drawCategorical(sc.observationKernel.row(state).transpose(), rng);
}

/// Features for every waveform under observation o at the given estimated
/// range: the base (average, worst-case) relative losses scaled by the
/// two-way spreading factor g(r) = (r/r₀)², clamped to the configured box.
inline ContextSet contextFeatures(const Scene & sc, int obs, double trackRangeM) {
    if (trackRangeM <= 0.0)
        throw NonPositiveRange("contextFeatures: track range must be positive");
    if (obs < 0 || obs >= sc.stateCount)
        throw Error("contextFeatures: observation index out of range");
    const double g = (trackRangeM / sc.referenceRangeM) * (trackRangeM / sc.referenceRangeM);
    const auto d = sc.trueTheta.size();
    Mat features(sc.waveformCount, d);
    for (int w = 0; w < sc.waveformCount; ++w) {
        Vec phi = sc.featureTable[obs][w] * g;
        for (Eigen::Index i = 0; i < d; ++i)
            phi[i] = std::clamp(phi[i], -sc.featureClampAbs, sc.featureClampAbs);
        features.row(w) = phi.transpose();
    }
    return ContextSet(std::move(features));
}

/// ℓ = ⟨θ, φ⟩ + η with η ~ N(0, σ²); SINR in dB is the negated loss.
inline double realizeLoss(const Scene & sc, const Vec & phi, RngStream & rng) {
    if (phi.size() != sc.trueTheta.size())
        throw DimensionMismatch("realizeLoss: feature length vs theta");
    double loss = sc.trueTheta.dot(phi);
    if (sc.lossNoiseVariance > 0.0)
        loss += std::sqrt(sc.lossNoiseVariance) * rng.normal();
    return loss;
}

inline nlohmann::json sceneToJson(const Scene & sc) {
    nlohmann::json j;
    j["state_count"] = sc.stateCount;
    j["waveform_count"] = sc.waveformCount;
    j["memory_order"] = sc.memoryOrder;
    j["loss_noise_variance"] = sc.lossNoiseVariance;
    j["reference_range_m"] = sc.referenceRangeM;
    j["feature_clamp_abs"] = sc.featureClampAbs;
    j["true_theta"] = std::vector<double>(sc.trueTheta.begin(), sc.trueTheta.end());
    auto matrixRows = [](const Mat & m) {
        std::vector<std::vector<double>> rows;
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            rows.emplace_back(m.row(r).begin(), m.row(r).end());
        return rows;
    };
    j["transition_kernel"] = matrixRows(sc.transitionKernel);
    j["observation_kernel"] = matrixRows(sc.observationKernel);
    std::vector<std::vector<std::vector<double>>> table;
    for (const auto & row : sc.featureTable) {
        auto & tr = table.emplace_back();
        for (const auto & phi : row)
            tr.emplace_back(phi.begin(), phi.end());
    }
    j["feature_table"] = table;
    return j;
}

inline Scene sceneFromJson(const nlohmann::json & j) {
    Scene sc;
    sc.stateCount = j.at("state_count").get<int>();
    sc.waveformCount = j.at("waveform_count").get<int>();
    sc.memoryOrder = j.at("memory_order").get<int>();
    sc.lossNoiseVariance = j.at("loss_noise_variance").get<double>();
    sc.referenceRangeM = j.at("reference_range_m").get<double>();
    sc.featureClampAbs = j.at("feature_clamp_abs").get<double>();
    const auto theta = j.at("true_theta").get<std::vector<double>>();
    sc.trueTheta = Eigen::Map<const Vec>(theta.data(), theta.size());
    auto toMatrix = [](const nlohmann::json & rows) {
        const auto data = rows.get<std::vector<std::vector<double>>>();
        Mat m(data.size(), data.empty() ? 0 : data[0].size());
        for (size_t r = 0; r < data.size(); ++r) {
            if (data[r].size() != static_cast<size_t>(m.cols()))
                throw ShapeMismatch("scene JSON: ragged matrix");
            m.row(r) = Eigen::Map<const Vec>(data[r].data(), data[r].size()).transpose();
        }
        return m;
    };
    sc.transitionKernel = toMatrix(j.at("transition_kernel"));
    sc.observationKernel = toMatrix(j.at("observation_kernel"));
    for (const auto & row : j.at("feature_table")) {
        auto & tr = sc.featureTable.emplace_back();
        for (const auto & phi : row) {
            const auto v = phi.get<std::vector<double>>();
            tr.push_back(Eigen::Map<const Vec>(v.data(), v.size()));
        }
    }
    validateScene(sc);
    return sc;
}

}
