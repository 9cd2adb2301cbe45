#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include <metawave/errors.hpp>
#include <metawave/scene.hpp>

namespace metawave {

enum class AgentKind { Uninformative = 0, Meta = 1, Oracle = 2 };

inline constexpr std::array<AgentKind, 3> kAllAgents{AgentKind::Uninformative, AgentKind::Meta, AgentKind::Oracle};

inline const char * agentName(AgentKind a) {
    switch (a) {
        case AgentKind::Uninformative: return "uninformative";
        case AgentKind::Meta:          return "meta";
        case AgentKind::Oracle:        return "oracle";
    }
    return "?";
}

inline std::optional<AgentKind> agentFromName(const std::string & s) {
    for (auto a : kAllAgents)
        if (s == agentName(a))
            return a;
    return std::nullopt;
}

struct NoiseConfig {
    double sigma2 = 1.0;    // loss-noise variance σ² (dB²)
    double sigma02 = 0.25;  // instance-prior variance σ₀²
    double sigmaQ2 = 4.0;   // meta-prior variance σ_q²
};

struct TargetConfig {
    double dtSeconds = 0.1;
    double processNoise = 0.5;       // (m/s²)²·s
    double maxSpeedMps = 300.0;
    double rangeMinM = 9000.0;       // initial range drawn uniformly
    double rangeMaxM = 11000.0;
    double speedMinMps = 30.0;       // initial speed drawn uniformly
    double speedMaxMps = 90.0;
    double initPosSigmaM = 2000.0;   // tracker initialization uncertainty
    double initVelSigmaMps = 100.0;
    double measurementVarAt0Db = 1.0e6;   // (1 km)^2 at 0 dB; ties tracking quality to SINR
};

struct ExperimentConfig {
    int tracks = 50;       // m
    int horizon = 200;     // n CPIs per track
    int waveforms = 5;     // K
    int featureDim = 2;    // d
    int trials = 100;      // Monte Carlo replications
    std::uint64_t seed = 20210527;
    int workers = 1;
    double uninformativePriorScale = 100.0;   // flat prior variance = scale·σ_q²
    NoiseConfig noise;
    SceneConfig scene;
    TargetConfig target;
    std::vector<AgentKind> agents{AgentKind::Uninformative, AgentKind::Meta, AgentKind::Oracle};

    bool hasAgent(AgentKind a) const {
        for (auto e : agents)
            if (e == a) return true;
        return false;
    }
};

inline void validateConfig(const ExperimentConfig & cfg) {
    auto require = [](bool ok, const char * msg) { if (!ok) throw ConfigError(msg); };
    require(cfg.tracks >= 1, "tracks must be >= 1");
    require(cfg.horizon >= 1, "horizon must be >= 1");
    require(cfg.waveforms >= 1, "waveforms must be >= 1");
    require(cfg.trials >= 1, "trials must be >= 1");
    require(cfg.workers >= 1, "workers must be >= 1");
    require(cfg.featureDim == 2, "feature_dim must be 2 (features are average and worst-case loss)");
    require(cfg.noise.sigma2 > 0.0, "sigma2 must be positive");
    require(cfg.noise.sigma02 > 0.0, "sigma02 must be positive");
    require(cfg.noise.sigmaQ2 > 0.0, "sigma_q2 must be positive");
    require(cfg.uninformativePriorScale > 0.0, "uninformative_prior_scale must be positive");
    require(!cfg.agents.empty(), "at least one agent must be enabled");
    require(cfg.scene.stateCount >= 1, "scene_state_count must be >= 1");
    require(cfg.scene.memoryOrder >= 1, "scene_memory_order must be >= 1");
    require(cfg.scene.memoryOrder <= 8, "scene_memory_order must be <= 8");
    require(cfg.scene.obsDiagonal >= 0.5 && cfg.scene.obsDiagonal <= 1.0, "scene_obs_diagonal must be in [0.5, 1]");
    require(cfg.scene.obsNeighbor >= 0.0 && cfg.scene.obsDiagonal + cfg.scene.obsNeighbor <= 1.0,
            "scene_obs_neighbor must be nonnegative and diagonal + neighbor mass at most 1");
    require(cfg.scene.transitionConcentration > 0.0, "scene_transition_concentration must be positive");
    require(cfg.scene.relLossMin <= cfg.scene.relLossMax, "scene_rel_loss_min must not exceed scene_rel_loss_max");
    require(cfg.scene.relLossJitter >= 0.0, "scene_rel_loss_jitter must be nonnegative");
    require(cfg.scene.familySplit >= 0.0, "scene_family_split must be nonnegative");
    require(cfg.scene.referenceRangeM > 0.0, "scene_reference_range_m must be positive");
    require(cfg.scene.featureClampAbs > 0.0, "scene_feature_clamp_abs must be positive");
    require(cfg.target.dtSeconds > 0.0, "target_dt_seconds must be positive");
    require(cfg.target.processNoise >= 0.0, "target_process_noise must be nonnegative");
    require(cfg.target.maxSpeedMps > 0.0, "target_max_speed_mps must be positive");
    require(cfg.target.rangeMinM > 0.0 && cfg.target.rangeMinM <= cfg.target.rangeMaxM, "target range bounds out of order");
    require(cfg.target.speedMinMps >= 0.0 && cfg.target.speedMinMps <= cfg.target.speedMaxMps, "target speed bounds out of order");
    require(cfg.target.measurementVarAt0Db > 0.0, "target_measurement_var_0db must be positive");
}

/// The config is one flat JSON document; every field is optional and
/// defaults are filled in (and recorded on output). Unknown keys are
/// rejected so typos fail loudly.
inline ExperimentConfig configFromJson(const nlohmann::json & j) {
    ExperimentConfig cfg;
    static const std::vector<std::string> known{
        "tracks", "horizon", "waveforms", "feature_dim", "trials", "seed", "workers",
        "uninformative_prior_scale", "sigma2", "sigma02", "sigma_q2",
        "scene_state_count", "scene_memory_order", "scene_obs_diagonal", "scene_obs_neighbor",
        "scene_transition_concentration", "scene_rel_loss_min", "scene_rel_loss_max", "scene_rel_loss_jitter", "scene_family_split",
        "scene_reference_range_m", "scene_feature_clamp_abs", "scene_plausible_state_prob",
        "target_dt_seconds", "target_process_noise", "target_max_speed_mps",
        "target_range_min_m", "target_range_max_m", "target_speed_min_mps",
        "target_speed_max_mps", "target_init_pos_sigma_m", "target_init_vel_sigma_mps",
        "target_measurement_var_0db", "agents"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::find(known.begin(), known.end(), it.key()) == known.end())
            throw ConfigError("unknown key '" + it.key() + "'");
    }
    auto get = [&](const char * key, auto & field) {
        if (j.contains(key)) {
            try {
                field = j.at(key).get<std::remove_reference_t<decltype(field)>>();
            } catch (const nlohmann::json::exception &) {
                throw ConfigError(std::string("bad value for '") + key + "'");
            }
        }
    };
    get("tracks", cfg.tracks);
    get("horizon", cfg.horizon);
    get("waveforms", cfg.waveforms);
    get("feature_dim", cfg.featureDim);
    get("trials", cfg.trials);
    get("seed", cfg.seed);
    get("workers", cfg.workers);
    get("uninformative_prior_scale", cfg.uninformativePriorScale);
    get("sigma2", cfg.noise.sigma2);
    get("sigma02", cfg.noise.sigma02);
    get("sigma_q2", cfg.noise.sigmaQ2);
    get("scene_state_count", cfg.scene.stateCount);
    get("scene_memory_order", cfg.scene.memoryOrder);
    get("scene_obs_diagonal", cfg.scene.obsDiagonal);
    get("scene_obs_neighbor", cfg.scene.obsNeighbor);
    get("scene_transition_concentration", cfg.scene.transitionConcentration);
    get("scene_rel_loss_min", cfg.scene.relLossMin);
    get("scene_rel_loss_max", cfg.scene.relLossMax);
    get("scene_rel_loss_jitter", cfg.scene.relLossJitter);
    get("scene_family_split", cfg.scene.familySplit);
    get("scene_reference_range_m", cfg.scene.referenceRangeM);
    get("scene_feature_clamp_abs", cfg.scene.featureClampAbs);
    get("scene_plausible_state_prob", cfg.scene.plausibleStateProb);
    get("target_dt_seconds", cfg.target.dtSeconds);
    get("target_process_noise", cfg.target.processNoise);
    get("target_max_speed_mps", cfg.target.maxSpeedMps);
    get("target_range_min_m", cfg.target.rangeMinM);
    get("target_range_max_m", cfg.target.rangeMaxM);
    get("target_speed_min_mps", cfg.target.speedMinMps);
    get("target_speed_max_mps", cfg.target.speedMaxMps);
    get("target_init_pos_sigma_m", cfg.target.initPosSigmaM);
    get("target_init_vel_sigma_mps", cfg.target.initVelSigmaMps);
    get("target_measurement_var_0db", cfg.target.measurementVarAt0Db);
    if (j.contains("agents")) {
        cfg.agents.clear();
        for (const auto & name : j.at("agents")) {
            const auto kind = agentFromName(name.get<std::string>());
            if (!kind)
                throw ConfigError("unknown agent '" + name.get<std::string>() + "'");
            if (!cfg.hasAgent(*kind))
                cfg.agents.push_back(*kind);
        }
    }
    return cfg;
}

/// The fully resolved config, defaults included; written next to results.
inline nlohmann::json configToJson(const ExperimentConfig & cfg) {
    nlohmann::json j;
    j["tracks"] = cfg.tracks;
    j["horizon"] = cfg.horizon;
    j["waveforms"] = cfg.waveforms;
    j["feature_dim"] = cfg.featureDim;
    j["trials"] = cfg.trials;
    j["seed"] = cfg.seed;
    j["workers"] = cfg.workers;
    j["uninformative_prior_scale"] = cfg.uninformativePriorScale;
    j["sigma2"] = cfg.noise.sigma2;
    j["sigma02"] = cfg.noise.sigma02;
    j["sigma_q2"] = cfg.noise.sigmaQ2;
    j["scene_state_count"] = cfg.scene.stateCount;
    j["scene_memory_order"] = cfg.scene.memoryOrder;
    j["scene_obs_diagonal"] = cfg.scene.obsDiagonal;
    j["scene_obs_neighbor"] = cfg.scene.obsNeighbor;
    j["scene_transition_concentration"] = cfg.scene.transitionConcentration;
    j["scene_rel_loss_min"] = cfg.scene.relLossMin;
    j["scene_rel_loss_max"] = cfg.scene.relLossMax;
    j["scene_rel_loss_jitter"] = cfg.scene.relLossJitter;
    j["scene_family_split"] = cfg.scene.familySplit;
    j["scene_reference_range_m"] = cfg.scene.referenceRangeM;
    j["scene_feature_clamp_abs"] = cfg.scene.featureClampAbs;
    j["scene_plausible_state_prob"] = cfg.scene.plausibleStateProb;
    j["target_dt_seconds"] = cfg.target.dtSeconds;
    j["target_process_noise"] = cfg.target.processNoise;
    j["target_max_speed_mps"] = cfg.target.maxSpeedMps;
    j["target_range_min_m"] = cfg.target.rangeMinM;
    j["target_range_max_m"] = cfg.target.rangeMaxM;
    j["target_speed_min_mps"] = cfg.target.speedMinMps;
    j["target_speed_max_mps"] = cfg.target.speedMaxMps;
    j["target_init_pos_sigma_m"] = cfg.target.initPosSigmaM;
    j["target_init_vel_sigma_mps"] = cfg.target.initVelSigmaMps;
    j["target_measurement_var_0db"] = cfg.target.measurementVarAt0Db;
    std::vector<std::string> names;
    for (auto a : kAllAgents)
        if (cfg.hasAgent(a))
            names.emplace_back(agentName(a));
    j["agents"] = names;
    return j;
}

}
