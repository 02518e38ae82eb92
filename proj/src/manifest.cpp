#include "evoforecast/manifest.hpp"

#include <cstdio>

#include "evoforecast/error.hpp"
#include "evoforecast/simulator.hpp"
#include "text_util.hpp"

namespace evo::pipeline {

void ExperimentConfig::validate() const {
    sim::SimParams p{individuals, generations, replicates, interval, survive_fraction, recombination_rate, seed};
    p.validate();
    if (loci < 1) throw ParameterError("loci must be positive");
    if (!(n_ld >= 0.0 && n_ld <= 1.0)) throw ParameterError("n_ld must lie in [0,1], got " + std::to_string(n_ld));
    if (targets > loci) throw ParameterError("more targets than loci");
}

void to_json(nlohmann::json &j, const ExperimentConfig &c) {
    j = nlohmann::json{{"seed", c.seed}, {"loci", c.loci}, {"individuals", c.individuals},
        {"generations", c.generations}, {"replicates", c.replicates}, {"interval", c.interval},
        {"survive_fraction", c.survive_fraction}, {"recombination_rate", c.recombination_rate},
        {"targets", c.targets}, {"n_ld", c.n_ld}};
}

void from_json(const nlohmann::json &j, ExperimentConfig &c) {
    static const char *known[] = {"seed", "loci", "individuals", "generations", "replicates", "interval",
        "survive_fraction", "recombination_rate", "targets", "n_ld"};
    for (const auto &[key, value] : j.items()) {
        bool ok = false;
        for (auto k : known) ok = ok || key == k;
        if (!ok) throw ParameterError("unknown experiment config key '" + key + "'");
    }
    c.seed = j.value("seed", c.seed);
    c.loci = j.value("loci", c.loci);
    c.individuals = j.value("individuals", c.individuals);
    c.generations = j.value("generations", c.generations);
    c.replicates = j.value("replicates", c.replicates);
    c.interval = j.value("interval", c.interval);
    c.survive_fraction = j.value("survive_fraction", c.survive_fraction);
    c.recombination_rate = j.value("recombination_rate", c.recombination_rate);
    c.targets = j.value("targets", c.targets);
    c.n_ld = j.value("n_ld", c.n_ld);
}

ExperimentConfig load_experiment_config(const std::filesystem::path &path) {
    ExperimentConfig c;
    try {
        nlohmann::json::parse(detail::read_file(path)).get_to(c);
    } catch (const nlohmann::json::exception &e) {
        throw ParameterError("invalid experiment config " + path.string() + ": " + e.what());
    }
    c.validate();
    return c;
}

std::string checksum(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string file_checksum(const std::filesystem::path &path) { return checksum(detail::read_file(path)); }

RunManifest::RunManifest(std::string stage, std::uint64_t seed, nlohmann::json config)
    : stage_(std::move(stage)), seed_(seed), config_(std::move(config)) {}

std::string RunManifest::config_hash() const { return checksum(config_.dump()); }

void RunManifest::add_input(const std::filesystem::path &path) {
    inputs_.push_back({{"path", path.string()}, {"checksum", file_checksum(path)}});
}

void RunManifest::add_output(const std::filesystem::path &path) {
    outputs_.push_back({{"path", path.string()}, {"checksum", file_checksum(path)}});
}

void RunManifest::write(const std::filesystem::path &path) {
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    nlohmann::json j{{"stage", stage_}, {"tool_version", kToolVersion}, {"seed", seed_}, {"config", config_},
        {"config_hash", config_hash()}, {"inputs", inputs_}, {"outputs", outputs_}, {"wall_seconds", seconds}};
    detail::write_file(path, j.dump(2) + "\n");
}

}  // namespace evo::pipeline
