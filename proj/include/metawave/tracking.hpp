#pragma once

#include <cmath>

#include <Eigen/Dense>

#include <metawave/linalg.hpp>
#include <metawave/rng.hpp>

namespace metawave {

/// Constant-velocity point target in the plane, radar at the origin.
struct TargetState {
    Eigen::Vector2d position{0.0, 0.0};   // meters
    Eigen::Vector2d velocity{0.0, 0.0};   // m/s

    double rangeM() const { return position.norm(); }
};

/// position += velocity·dt, then velocity picks up N(0, q·dt·I) process
/// noise; speed is capped at maxSpeed.
inline TargetState stepTarget(const TargetState & t, double dtSeconds, double processNoise,
                              RngStream & rng, double maxSpeedMps = 300.0) {
    if (dtSeconds <= 0.0)
        throw Error("stepTarget: dt must be positive");
    TargetState next;
    next.position = t.position + t.velocity * dtSeconds;
    next.velocity = t.velocity;
    if (processNoise > 0.0) {
        const double sd = std::sqrt(processNoise * dtSeconds);
        next.velocity += Eigen::Vector2d(sd * rng.normal(), sd * rng.normal());
    }
    const double speed = next.velocity.norm();
    if (speed > maxSpeedMps)
        next.velocity *= maxSpeedMps / speed;
    return next;
}

struct TrackerParams {
    double processNoise = 0.5;           // (m/s²)²·s, matches stepTarget
    double measurementVarAt0Db = 2500.0; // (50 m)² position variance at 0 dB SINR
};

/// Recursive linear (Kalman-form) filter over [px, py, vx, vy] with a
/// constant-velocity motion model. Measurement noise shrinks with SINR:
/// R = (σ_m²/sinr_linear)·I.
struct TrackerState {
    Eigen::Vector4d estimate = Eigen::Vector4d::Zero();
    Eigen::Matrix4d covariance = Eigen::Matrix4d::Identity();

    Eigen::Vector2d positionEstimate() const { return estimate.head<2>(); }
    double rangeEstimateM() const { return estimate.head<2>().norm(); }
};

inline TrackerState trackerUpdate(const TrackerState & tr, const Eigen::Vector2d & measuredPosition,
                                  double sinrDb, double dtSeconds, const TrackerParams & prm = {}) {
    if (dtSeconds <= 0.0)
        throw Error("trackerUpdate: dt must be positive");
    if (!measuredPosition.allFinite())
        throw Error("trackerUpdate: non-finite measurement");

    Eigen::Matrix4d f = Eigen::Matrix4d::Identity();
    f(0, 2) = dtSeconds;
    f(1, 3) = dtSeconds;
    Eigen::Matrix4d q = Eigen::Matrix4d::Zero();
    q(2, 2) = q(3, 3) = prm.processNoise * dtSeconds;

    const Eigen::Vector4d xPred = f * tr.estimate;
    const Eigen::Matrix4d pPred = f * tr.covariance * f.transpose() + q;

    const double sinrLinear = std::pow(10.0, sinrDb / 10.0);
    const double rVar = prm.measurementVarAt0Db / sinrLinear;
    const Eigen::Matrix2d r = rVar * Eigen::Matrix2d::Identity();

    Eigen::Matrix<double, 2, 4> h = Eigen::Matrix<double, 2, 4>::Zero();
    h(0, 0) = h(1, 1) = 1.0;

    const Eigen::Matrix2d innovationCov = h * pPred * h.transpose() + r;
    const Eigen::Matrix<double, 4, 2> gain = pPred * h.transpose() * innovationCov.inverse();

    TrackerState next;
    next.estimate = xPred + gain * (measuredPosition - h * xPred);
    // Joseph form keeps the covariance symmetric positive definite.
    const Eigen::Matrix4d ikh = Eigen::Matrix4d::Identity() - gain * h;
    next.covariance = ikh * pPred * ikh.transpose() + gain * r * gain.transpose();
    next.covariance = 0.5 * (next.covariance + next.covariance.transpose());

    Eigen::LLT<Eigen::Matrix4d> llt(next.covariance);
    if (llt.info() != Eigen::Success)
        throw NotPositiveDefinite("trackerUpdate: covariance lost positive definiteness");
    return next;
}

/// Latches after `windowLength` consecutive CPIs with SINR strictly below
/// the threshold; once tripped it stays tripped for the rest of the track.
struct LostTrackDetector {
    double thresholdDb = 3.0;
    int windowLength = 5;
    int consecutiveBelow = 0;
    bool tripped = false;
};

inline LostTrackDetector detectLostTrack(LostTrackDetector det, double sinrDb) {
    if (sinrDb < det.thresholdDb) {
        if (++det.consecutiveBelow >= det.windowLength)
            det.tripped = true;
    } else {
        det.consecutiveBelow = 0;
    }
    return det;
}

}
