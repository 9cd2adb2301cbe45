#pragma once

#include <limits>
#include <utility>

#include <metawave/gaussian.hpp>

namespace metawave {

/// Per-round action set: one feature vector per waveform, as the rows of a
/// K×d matrix.
class ContextSet {
  public:
    explicit ContextSet(Mat features) : features_(std::move(features)) {
        if (features_.rows() < 1 || features_.cols() < 1)
            throw DimensionMismatch("ContextSet: need at least one arm and one feature");
        if (!features_.allFinite())
            throw Error("ContextSet: non-finite features");
    }

    Eigen::Index arms() const { return features_.rows(); }
    Eigen::Index dim() const { return features_.cols(); }
    const Mat & features() const { return features_; }
    Vec feature(Eigen::Index w) const { return features_.row(w).transpose(); }

  private:
    Mat features_;
};

/// Thompson Sampling agent state: the running posterior plus the prior it
/// was initialized with. Updated functionally, one value per round.
struct AgentState {
    LinearPosterior posterior;
    Gaussian priorUsed;
};

inline AgentState initAgent(const Gaussian & prior, double noiseVariance) {
    return AgentState{LinearPosterior(prior, noiseVariance), prior};
}

/// Thompson Sampling selection: draw θ̃ from the posterior and act greedily,
/// returning argmin_w ⟨θ̃, φ_w⟩. Sampling makes the probability of choosing
/// w equal its posterior probability of being loss-minimizing. Ties break
/// to the lowest index.
inline int selectWaveform(const AgentState & a, const ContextSet & ctx, RngStream & rng) {
    if (ctx.dim() != a.posterior.dim())
        throw DimensionMismatch("selectWaveform: context dim vs posterior dim");
    const Vec theta = samplePosterior(a.posterior, rng);
    const Vec values = ctx.features() * theta;
    int best = 0;
    for (Eigen::Index w = 1; w < values.size(); ++w)
        if (values[w] < values[best])
            best = static_cast<int>(w);
    return best;
}

inline AgentState updateAgent(const AgentState & a, const Vec & phi, double loss) {
    return AgentState{conjugateUpdate(a.posterior, phi, loss), a.priorUsed};
}

/// Noise-free regret of the chosen arm under the environment's true
/// parameter: ⟨θ, φ_chosen⟩ − min_w ⟨θ, φ_w⟩. Zero iff the choice is
/// optimal.
inline double instantRegret(const Vec & trueTheta, const ContextSet & ctx, int chosen) {
    if (trueTheta.size() != ctx.dim())
        throw DimensionMismatch("instantRegret: theta dim vs context dim");
    if (chosen < 0 || chosen >= ctx.arms())
        throw Error("instantRegret: waveform index out of range");
    const Vec values = ctx.features() * trueTheta;
    return values[chosen] - values.minCoeff();
}

/// One element of the per-track history H: (o_k, w_k, φ_k, ℓ_k) plus the
/// realized regret for bookkeeping.
struct RoundRecord {
    int observation = 0;
    int chosenWaveform = 0;
    Vec features;
    double loss = 0.0;
    double instantRegret = 0.0;
};

}
