#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace evo::pipeline {

inline constexpr std::string_view kToolVersion = "0.3.0";

/// Everything needed to regenerate one simulated E&R dataset.
///
/// Stored as a flat JSON object; every key is optional and falls back to the
/// defaults below:
///
///     {"seed": 7, "loci": 2000, "individuals": 200, "generations": 75,
///      "replicates": 10, "interval": 5, "survive_fraction": 0.99,
///      "recombination_rate": 1.0, "targets": 5, "n_ld": 0.0}
struct ExperimentConfig {
    std::uint64_t seed = 0;
    std::size_t loci = 2000;
    std::size_t individuals = 1000;
    int generations = 75;
    std::size_t replicates = 10;
    int interval = 5;
    double survive_fraction = 0.99;
    double recombination_rate = 1.0;
    std::size_t targets = 10;
    double n_ld = 0.0;

    void validate() const;
};

void to_json(nlohmann::json &j, const ExperimentConfig &c);
void from_json(const nlohmann::json &j, ExperimentConfig &c);

ExperimentConfig load_experiment_config(const std::filesystem::path &path);

/// 64-bit FNV-1a of the bytes, as 16 hex digits.
std::string checksum(std::string_view bytes);
std::string file_checksum(const std::filesystem::path &path);

/// Provenance record written next to the outputs of every stage.
class RunManifest {
  public:
    RunManifest(std::string stage, std::uint64_t seed, nlohmann::json config);

    void add_input(const std::filesystem::path &path);
    void add_output(const std::filesystem::path &path);
    /// Stops the stage clock and writes the manifest as JSON.
    void write(const std::filesystem::path &path);

    const nlohmann::json &config() const { return config_; }
    std::string config_hash() const;

  private:
    std::string stage_;
    std::uint64_t seed_;
    nlohmann::json config_;
    nlohmann::json inputs_ = nlohmann::json::array();
    nlohmann::json outputs_ = nlohmann::json::array();
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace evo::pipeline
