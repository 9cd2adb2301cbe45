// Command-line front end: run a full experiment, validate a config, or
// replay a serialized scene for debugging.

#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include <metawave/harness.hpp>

namespace {

using namespace metawave;

nlohmann::json loadJsonFile(const std::string & path) {
    std::ifstream f(path);
    if (!f)
        throw ConfigError("cannot open '" + path + "'");
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception & e) {
        throw ConfigError("cannot parse '" + path + "': " + e.what());
    }
    return j;
}

ExperimentConfig loadConfig(const std::string & path) {
    if (path.empty())
        return ExperimentConfig{};
    return configFromJson(loadJsonFile(path));
}

std::vector<AgentKind> parseAgentList(const std::string & list) {
    std::vector<AgentKind> out;
    std::string token;
    std::stringstream ss(list);
    while (std::getline(ss, token, ',')) {
        const auto kind = agentFromName(token);
        if (!kind)
            throw ConfigError("unknown agent '" + token + "'");
        out.push_back(*kind);
    }
    if (out.empty())
        throw ConfigError("empty agent list");
    return out;
}

int runCommand(const std::string & configPath, int trialsOverride, long long seedOverride,
               std::string outDir, const std::string & agentsOverride, int workersOverride) {
    ExperimentConfig cfg = loadConfig(configPath);
    if (trialsOverride > 0)
        cfg.trials = trialsOverride;
    if (seedOverride >= 0)
        cfg.seed = static_cast<std::uint64_t>(seedOverride);
    if (!agentsOverride.empty())
        cfg.agents = parseAgentList(agentsOverride);
    if (workersOverride > 0)
        cfg.workers = workersOverride;
    validateConfig(cfg);

    if (outDir.empty()) {
        if (const char * env = std::getenv("METAWAVE_OUT"))
            outDir = env;
        else
            outDir = "results";
    }

    const auto trials = runTrials(cfg);
    const auto agg = aggregate(trials);
    emitResults(agg, cfg, outDir);

    std::cout << "wrote " << outDir << " (" << cfg.trials << " trials, " << cfg.tracks
              << " tracks x " << cfg.horizon << " CPIs, seed " << cfg.seed << ")\n";
    for (auto kind : kAllAgents) {
        if (!cfg.hasAgent(kind)) continue;
        const std::string name = agentName(kind);
        std::cout << "  " << name << ": cum regret " << csv::g6(agg.summary.at("cum_regret_final_" + name))
                  << ", lost tracks " << csv::g6(agg.summary.at("cum_lost_final_" + name)) << "\n";
    }
    return 0;
}

int validateCommand(const std::string & configPath) {
    const ExperimentConfig cfg = loadConfig(configPath);
    validateConfig(cfg);
    std::cout << configToJson(cfg).dump(2) << "\nok\n";
    return 0;
}

int replayCommand(const std::string & scenePath, int horizon, long long seed, const std::string & agentName_) {
    const Scene scene = sceneFromJson(loadJsonFile(scenePath));
    ExperimentConfig cfg;
    cfg.horizon = horizon;
    if (seed >= 0)
        cfg.seed = static_cast<std::uint64_t>(seed);
    cfg.waveforms = scene.waveformCount;
    cfg.noise.sigma2 = scene.lossNoiseVariance > 0.0 ? scene.lossNoiseVariance : cfg.noise.sigma2;

    Gaussian prior = Gaussian::isotropic(Vec::Zero(scene.trueTheta.size()),
                                         cfg.uninformativePriorScale * cfg.noise.sigmaQ2);
    if (agentName_ == "oracle")
        prior = Gaussian::isotropic(scene.trueTheta, cfg.noise.sigma02);
    else if (agentName_ != "uninformative")
        throw ConfigError("replay supports agents 'uninformative' and 'oracle'");

    auto agentRng = streams::agent(cfg.seed, agentName_ == "oracle" ? AgentKind::Oracle : AgentKind::Uninformative, 0, 0);
    const auto outcome = detail::runTrack(cfg, scene, prior,
                                          streams::env(cfg.seed, streams::State, 0, 0),
                                          streams::env(cfg.seed, streams::Observation, 0, 0),
                                          streams::env(cfg.seed, streams::LossNoise, 0, 0),
                                          streams::env(cfg.seed, streams::Target, 0, 0),
                                          streams::env(cfg.seed, streams::Measurement, 0, 0),
                                          agentRng, true);

    std::cout << "cpi,loss_db,sinr_db,instant_regret,rmse_m\n";
    for (int k = 0; k < cfg.horizon; ++k)
        std::cout << k + 1 << "," << csv::g6(outcome.losses[k]) << "," << csv::g6(-outcome.losses[k]) << ","
                  << csv::g6(outcome.regretByCpi[k]) << "," << csv::g6(outcome.rmseByCpi[k]) << "\n";
    std::cerr << "track regret " << csv::g6(outcome.stats.regret) << ", mean SINR "
              << csv::g6(outcome.stats.meanSinrDb) << " dB, lost=" << (outcome.stats.lost ? 1 : 0) << "\n";
    return 0;
}

}

int main(int argc, char ** argv) {
    CLI::App app{"meta-learning waveform-selection simulator"};
    app.require_subcommand(1);

    std::string configPath, outDir, agents, scenePath, replayAgent = "uninformative";
    int trials = 0, workers = 0, horizon = 200;
    long long seed = -1;

    auto * run = app.add_subcommand("run", "run a Monte Carlo experiment and emit CSV/JSON results");
    run->add_option("--config", configPath, "experiment config (JSON); defaults are used when omitted");
    run->add_option("--trials", trials, "override the trial count");
    run->add_option("--seed", seed, "override the master seed");
    run->add_option("--out", outDir, "output directory (default 'results', or $METAWAVE_OUT)");
    run->add_option("--agents", agents, "comma-separated subset of uninformative,meta,oracle");
    run->add_option("--workers", workers, "worker threads for trials");

    auto * validate = app.add_subcommand("validate", "check a config and print the resolved defaults");
    validate->add_option("--config", configPath, "experiment config (JSON)")->required();

    auto * replay = app.add_subcommand("replay", "re-simulate a serialized scene for debugging");
    replay->add_option("--scene", scenePath, "scene JSON produced by the library")->required();
    replay->add_option("--horizon", horizon, "CPIs to simulate");
    replay->add_option("--seed", seed, "master seed for the replay");
    replay->add_option("--agent", replayAgent, "uninformative or oracle");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError & e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (run->parsed())
            return runCommand(configPath, trials, seed, outDir, agents, workers);
        if (validate->parsed())
            return validateCommand(configPath);
        return replayCommand(scenePath, horizon, seed, replayAgent);
    } catch (const ConfigError & e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception & e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 2;
    }
}
