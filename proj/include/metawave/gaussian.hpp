#pragma once

#include <utility>

#include <metawave/linalg.hpp>
#include <metawave/rng.hpp>

namespace metawave {

/// Multivariate normal held in natural form: mean and precision (inverse
/// covariance). Rank-one evidence updates are exact on the precision; the
/// covariance is only materialized through solves against the cached
/// Cholesky factor. Immutable after construction.
class Gaussian {
  public:
    Gaussian(Vec mean, Mat precision)
            : mean_(std::move(mean)), precision_(symmetrize(precision)) {
        if (mean_.size() < 1)
            throw DimensionMismatch("Gaussian: dimension must be >= 1");
        if (precision_.rows() != mean_.size())
            throw DimensionMismatch("Gaussian: precision is " + std::to_string(precision_.rows()) + "x" + std::to_string(precision_.cols()) + " for mean of length " + std::to_string(mean_.size()));
        checkFinite(mean_, "Gaussian mean");
        chol_ = cholesky(precision_);   // construction fails if not SPD
    }

    static Gaussian isotropic(const Vec & mean, double variance) {
        if (variance <= 0.0)
            throw NonPositiveVariance("Gaussian::isotropic");
        const auto d = mean.size();
        return Gaussian(mean, Mat::Identity(d, d) / variance);
    }

    Eigen::Index dim() const { return mean_.size(); }
    const Vec & mean() const { return mean_; }
    const Mat & precision() const { return precision_; }

    /// Lower factor of the precision, L·Lᵀ = Λ.
    const Mat & precisionCholesky() const { return chol_; }

    Mat covariance() const { return solveCholesky(chol_, Mat(Mat::Identity(dim(), dim()))); }

  private:
    Vec mean_;
    Mat precision_;
    Mat chol_;
};

/// x = mean + L⁻ᵀz with z standard normal and L the precision factor, so
/// that cov(x) = L⁻ᵀL⁻¹ = Λ⁻¹. Deterministic for a fixed stream state.
inline Vec sampleGaussian(const Gaussian & g, RngStream & rng) {
    const Vec z = rng.normalVector(g.dim());
    return g.mean() + g.precisionCholesky().transpose().triangularView<Eigen::Upper>().solve(z);
}

/// KL(p ‖ q) = ½[tr(Σq⁻¹Σp) + (μq−μp)ᵀΣq⁻¹(μq−μp) − d + ln(detΣq/detΣp)],
/// evaluated from the precision factors:
///   tr(ΛqΛp⁻¹) = ‖Lp⁻¹Lq‖²_F, ln(detΣq/detΣp) = ln detΛp − ln detΛq.
/// Rounding noise in (−1e-10, 0) is clamped to zero.
inline double klGaussian(const Gaussian & p, const Gaussian & q) {
    if (p.dim() != q.dim())
        throw DimensionMismatch("klGaussian: " + std::to_string(p.dim()) + " vs " + std::to_string(q.dim()));
    const auto d = static_cast<double>(p.dim());
    const Mat & lp = p.precisionCholesky();
    const Mat & lq = q.precisionCholesky();

    const Mat w = lp.triangularView<Eigen::Lower>().solve(lq);
    const double trace = w.squaredNorm();
    const double quad = (lq.transpose() * (q.mean() - p.mean())).squaredNorm();
    const double logDetRatio = logDetFromCholesky(lp) - logDetFromCholesky(lq);

    double kl = 0.5 * (trace + quad - d + logDetRatio);
    if (kl < 0.0 && kl > -1e-10)
        kl = 0.0;
    return kl;
}

/// Bayesian linear-regression posterior over θ for the loss model
/// ℓ = ⟨θ, φ⟩ + η, η ~ N(0, σ²), in natural form (Λ, b = Λμ).
class LinearPosterior {
  public:
    LinearPosterior(Mat precision, Vec shift, double noiseVariance)
            : precision_(symmetrize(precision)), shift_(std::move(shift)), noiseVariance_(noiseVariance) {
        if (precision_.rows() != shift_.size())
            throw DimensionMismatch("LinearPosterior: precision vs shift");
        if (noiseVariance_ <= 0.0)
            throw NonPositiveVariance("LinearPosterior: noise variance");
        checkFinite(shift_, "LinearPosterior shift");
    }

    LinearPosterior(const Gaussian & prior, double noiseVariance)
            : LinearPosterior(prior.precision(), prior.precision() * prior.mean(), noiseVariance) {}

    Eigen::Index dim() const { return shift_.size(); }
    const Mat & precision() const { return precision_; }
    const Vec & shift() const { return shift_; }
    double noiseVariance() const { return noiseVariance_; }

    Vec mean() const { return solveCholesky(cholesky(precision_), shift_); }

    Gaussian asGaussian() const { return Gaussian(mean(), precision_); }

  private:
    Mat precision_;
    Vec shift_;
    double noiseVariance_;
};

/// One conjugate evidence update: Λ' = Λ + φφᵀ/σ², b' = b + φℓ/σ².
inline LinearPosterior conjugateUpdate(const LinearPosterior & p, const Vec & phi, double loss) {
    if (phi.size() != p.dim())
        throw DimensionMismatch("conjugateUpdate: feature length " + std::to_string(phi.size()) + " vs dim " + std::to_string(p.dim()));
    if (!std::isfinite(loss))
        throw Error("conjugateUpdate: non-finite loss");
    checkFinite(phi, "conjugateUpdate features");
    const double inv = 1.0 / p.noiseVariance();
    Mat precision = p.precision() + inv * (phi * phi.transpose());
    Vec shift = p.shift() + phi * (loss * inv);
    return LinearPosterior(std::move(precision), std::move(shift), p.noiseVariance());
}

/// Draws θ̃ ~ N(Λ⁻¹b, Λ⁻¹) with a single factorization of Λ.
inline Vec samplePosterior(const LinearPosterior & p, RngStream & rng) {
    const Mat lower = cholesky(p.precision());
    const Vec mean = solveCholesky(lower, p.shift());
    const Vec z = rng.normalVector(p.dim());
    return mean + lower.transpose().triangularView<Eigen::Upper>().solve(z);
}

}
