#pragma once

#include <concepts>
#include <utility>
#include <vector>

#include <metawave/bandit.hpp>

namespace metawave {

/// The hierarchical layer's running estimate of the instance-prior mean:
/// Q_s = N(μ_s, Λ_s⁻¹). The instance-prior covariance Σ = σ₀²I and the
/// loss-noise variance σ² are fixed and known.
class MetaPosterior {
  public:
    MetaPosterior(Vec mean, Mat precision, double instanceVariance, double lossNoiseVariance)
            : mean_(std::move(mean)), precision_(symmetrize(precision)),
              instanceVariance_(instanceVariance), lossNoiseVariance_(lossNoiseVariance) {
        if (instanceVariance_ <= 0.0)
            throw NonPositiveVariance("MetaPosterior: instance variance");
        if (lossNoiseVariance_ <= 0.0)
            throw NonPositiveVariance("MetaPosterior: loss-noise variance");
        if (precision_.rows() != mean_.size())
            throw DimensionMismatch("MetaPosterior: precision vs mean");
        checkFinite(mean_, "MetaPosterior mean");
        cholesky(precision_);   // must be SPD
    }

    Eigen::Index dim() const { return mean_.size(); }
    const Vec & mean() const { return mean_; }
    const Mat & precision() const { return precision_; }
    double instanceVariance() const { return instanceVariance_; }
    double lossNoiseVariance() const { return lossNoiseVariance_; }

    Gaussian asGaussian() const { return Gaussian(mean_, precision_); }

    /// The instance prior centered at the current meta-posterior mean,
    /// N(μ_s, σ₀²I); the plug-in used for the KL-to-true-prior metric.
    Gaussian plugInPrior() const { return Gaussian::isotropic(mean_, instanceVariance_); }

  private:
    Vec mean_;
    Mat precision_;
    double instanceVariance_;
    double lossNoiseVariance_;
};

/// All evidence from one stage: the chosen features (one row per round
/// actually played) and the realized losses.
struct StageData {
    Mat design;   // n×d
    Vec losses;   // n

    Eigen::Index rounds() const { return design.rows(); }
};

/// Q₁ = N(0, σ_q²I): the meta-prior over instance-prior means.
inline MetaPosterior initMeta(Eigen::Index dim, double sigmaQ2, double sigma02, double sigma2) {
    if (dim < 1)
        throw DimensionMismatch("initMeta: dimension must be >= 1");
    if (sigmaQ2 <= 0.0)
        throw NonPositiveVariance("initMeta: sigma_q^2");
    return MetaPosterior(Vec::Zero(dim), Mat::Identity(dim, dim) / sigmaQ2, sigma02, sigma2);
}

/// Step 1 of the meta loop: P_s ~ Q_s. The returned instance prior is
/// N(μ̂, σ₀²I) with μ̂ drawn from the meta-posterior; its covariance is
/// always σ₀²I regardless of Q_s.
inline Gaussian samplePrior(const MetaPosterior & q, RngStream & rng) {
    const Vec mu = sampleGaussian(q.asGaussian(), rng);
    return Gaussian::isotropic(mu, q.instanceVariance());
}

/// Closed-form meta-posterior recursion over one stage:
///   Λ_s = Λ_{s−1} + XᵀM⁻¹X,  μ_s = Λ_s⁻¹(Λ_{s−1}μ_{s−1} + XᵀM⁻¹L),
/// with M = σ²I_n + XΣXᵀ the stage's marginal loss covariance. M is SPD by
/// construction and inverted via Cholesky solves. An empty stage is a
/// no-op.
inline MetaPosterior metaUpdate(const MetaPosterior & q, const StageData & stage) {
    if (stage.rounds() == 0)
        return q;
    if (stage.design.cols() != q.dim())
        throw DimensionMismatch("metaUpdate: design has " + std::to_string(stage.design.cols()) + " columns for dim " + std::to_string(q.dim()));
    if (stage.losses.size() != stage.rounds())
        throw ShapeMismatch("metaUpdate: " + std::to_string(stage.rounds()) + " design rows vs " + std::to_string(stage.losses.size()) + " losses");

    const Eigen::Index n = stage.rounds();
    const Mat & x = stage.design;
    const Mat m = symmetrize(q.lossNoiseVariance() * Mat::Identity(n, n) + q.instanceVariance() * (x * x.transpose()));
    const Mat mChol = cholesky(m);

    const Mat whitenedX = solveCholesky(mChol, x);               // M⁻¹X
    const Vec whitenedL = solveCholesky(mChol, Vec(stage.losses));

    const Mat precision = symmetrize(q.precision() + x.transpose() * whitenedX);
    const Vec rhs = q.precision() * q.mean() + x.transpose() * whitenedL;
    const Vec mean = solveCholesky(cholesky(precision), rhs);
    return MetaPosterior(mean, precision, q.instanceVariance(), q.lossNoiseVariance());
}

/// Per-stage output of the meta-learning driver. The KL is the plug-in
/// divergence KL(N(μ_s, σ₀²I) ‖ P⋆) of the meta-posterior held while the
/// stage was played, i.e. before that stage's update.
struct MetaStageMetrics {
    double trackRegret = 0.0;
    double cumulativeRegret = 0.0;
    double klToTruePrior = 0.0;
};

/// What the meta-learning loop needs from a stream of bandit task
/// instances. beginTask samples θ ~ P⋆ and resets per-task state; contexts
/// and realizeLoss drive one round each.
template <class E>
concept MetaTaskEnvironment = requires(E & env, RngStream & rng, int round, int arm) {
    { env.beginTask(rng) };
    { env.contexts(round) } -> std::convertible_to<ContextSet>;
    { env.realizeLoss(round, arm, rng) } -> std::convertible_to<double>;
    { env.trueTheta() } -> std::convertible_to<Vec>;
    { env.truePrior() } -> std::convertible_to<Gaussian>;
};

/// The full meta-TS loop: for each stage, sample an instance prior from the
/// meta-posterior, run Thompson Sampling with it for `horizon` rounds, then
/// fold the stage's evidence back into the meta-posterior. Agent draws come
/// from agentRng, environment draws from envRng, so either side can be
/// replayed independently.
template <MetaTaskEnvironment Env>
std::vector<MetaStageMetrics> runMetaTs(Env & env, int stages, int horizon, MetaPosterior q,
                                        RngStream & agentRng, RngStream & envRng) {
    if (stages < 1 || horizon < 1)
        throw Error("runMetaTs: stages and horizon must be >= 1");

    std::vector<MetaStageMetrics> out;
    out.reserve(stages);
    double cumulative = 0.0;

    for (int s = 0; s < stages; ++s) {
        env.beginTask(envRng);

        MetaStageMetrics ms;
        ms.klToTruePrior = klGaussian(q.plugInPrior(), env.truePrior());

        const Gaussian prior = samplePrior(q, agentRng);
        AgentState agent = initAgent(prior, q.lossNoiseVariance());

        Mat design(horizon, q.dim());
        Vec losses(horizon);
        for (int k = 0; k < horizon; ++k) {
            const ContextSet ctx = env.contexts(k);
            const int w = selectWaveform(agent, ctx, agentRng);
            const double loss = env.realizeLoss(k, w, envRng);
            const Vec phi = ctx.feature(w);
            agent = updateAgent(agent, phi, loss);
            design.row(k) = phi.transpose();
            losses[k] = loss;
            ms.trackRegret += instantRegret(env.trueTheta(), ctx, w);
        }

        q = metaUpdate(q, StageData{std::move(design), std::move(losses)});
        cumulative += ms.trackRegret;
        ms.cumulativeRegret = cumulative;
        out.push_back(ms);
    }
    return out;
}

}
