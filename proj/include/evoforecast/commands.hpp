#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "evoforecast/frequency_tensor.hpp"
#include "evoforecast/haplotype_pool.hpp"
#include "evoforecast/ld.hpp"
#include "evoforecast/manifest.hpp"
#include "evoforecast/metrics.hpp"
#include "evoforecast/poolseq.hpp"
#include "evoforecast/simulator.hpp"
#include "evoforecast/vae_inference.hpp"
#include "evoforecast/vae_train.hpp"
#include "evoforecast/wright_fisher.hpp"

// Pipeline stages shared by the CLI and the integration tests. Every stage
// reads and writes files and leaves a `<output>.manifest.json` behind.
namespace evo::pipeline {

namespace fs = std::filesystem;

struct SimulatedDataset {
    sim::TraitModel trait;
    HaplotypePool ancestral;
    FrequencyTensor truth;
};

/// Starting frequencies, targets, LD noise and the replicated forward run,
/// each from its own stream of config.seed.
SimulatedDataset simulate_dataset(const ExperimentConfig &config, unsigned threads = 1);

std::string format_targets(const sim::TraitModel &trait);
sim::TraitModel read_targets(const fs::path &path);

/// Writes haplotypes.txt, ground_truth.tsv and targets.tsv into out_dir.
SimulatedDataset cmd_simulate(const ExperimentConfig &config, const fs::path &out_dir, unsigned threads = 1);

FrequencyTensor cmd_noise(const fs::path &in, const fs::path &out, const poolseq::NoiseParams &noise,
    std::uint64_t seed, unsigned threads = 1);

struct TrainOptions {
    vae::Architecture arch;
    vae::TrainConfig config;
    int train_until = 30;
};

vae::TrainResult cmd_train(const fs::path &noisy, const fs::path &weights, const fs::path &log, const TrainOptions &opts);

struct GenerateOptions {
    int train_until = 30;
    vae::RolloutOptions rollout;
};

FrequencyTensor cmd_generate(const fs::path &weights, const fs::path &noisy, const fs::path &out, const GenerateOptions &opts);

struct WfOptions {
    int train_until = 30;
    std::size_t steps = 9;
    std::optional<poolseq::NoiseParams> noise;  // sampling correction for Ne
    std::optional<fs::path> s_file;             // skip s estimation
    std::optional<double> ne;                   // skip Ne estimation
    wf::RegressionMode mode = wf::RegressionMode::pooled;
    bool printed_form = false;
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

struct WfEstimates {
    double ne = 0.0;
    std::vector<double> ne_per_replicate;
    std::vector<double> s;  // per SNP row
};

WfEstimates estimate_wf_parameters(const FrequencyTensor &training, const WfOptions &opts);

/// Writes the WF prediction to `out`, `<out>.s_hat.tsv` and `<out>.meta.json`.
FrequencyTensor cmd_wf(const fs::path &noisy, const fs::path &out, const WfOptions &opts);

struct EvaluateOptions {
    int train_until = 30;
    std::optional<fs::path> targets;
    std::size_t radius = 500;
    std::size_t max_no_targets = 9000;
    std::string dataset = "dataset";
    std::string variant = "model";
    double level = 0.95;
    std::uint64_t seed = 0;
};

struct MetricRow {
    std::string dataset, variant, aggregation, cohort;
    int test_generation;
    double d, ci_lo, ci_hi;
    std::size_t snps;
};

std::vector<MetricRow> evaluate(const FrequencyTensor &truth, const FrequencyTensor &prediction,
    const FrequencyTensor &noisy, const std::optional<sim::TraitModel> &trait, const EvaluateOptions &opts);
/// Several model runs on the same data: per-run rows labelled
/// `<variant>/run<k>` with CIs over SNPs, then one `<variant>` row per key
/// holding the mean over runs with a bootstrap CI over the run-level d.
std::vector<MetricRow> evaluate_runs(const FrequencyTensor &truth, const std::vector<FrequencyTensor> &predictions,
    const FrequencyTensor &noisy, const std::optional<sim::TraitModel> &trait, const EvaluateOptions &opts);
std::string format_metrics(const std::vector<MetricRow> &rows);

std::vector<MetricRow> cmd_evaluate(const fs::path &truth, const fs::path &prediction, const fs::path &noisy,
    const fs::path &out, const EvaluateOptions &opts);
std::vector<MetricRow> cmd_evaluate(const fs::path &truth, const std::vector<fs::path> &predictions,
    const fs::path &noisy, const fs::path &out, const EvaluateOptions &opts);

struct LdOptions {
    int train_until = 30;
    std::size_t half_window = 50;
    double alpha = 0.1;
    std::optional<fs::path> weights;  // enables the vae_similarity method
};

struct LdReport {
    ld::LdTable table;
    std::size_t pairs = 0;
    std::size_t filtered_pairs = 0;
    std::map<ld::Method, double> rho_all;
    std::map<ld::Method, double> rho_filtered;
};

LdReport ld_report(const HaplotypePool &ancestral, const FrequencyTensor &noisy, const vae::VaeParams *params,
    const LdOptions &opts);
std::string format_ld_report(const LdReport &report, double alpha);

LdReport cmd_ld(const fs::path &haplotypes, const fs::path &noisy, const fs::path &table, const fs::path &report,
    const LdOptions &opts);

struct ReportOptions {
    int train_until = 30;
    std::size_t half_window = 50;
    std::size_t radius = 500;
    std::size_t r2_pairs = 1000;
    std::optional<poolseq::NoiseParams> noise;
    std::uint64_t seed = 0;
};

/// Long-format dataset characteristics `panel,group,key,value`: r^2 of random
/// window pairs, AFC by cohort, Ne per replicate, |s| by cohort.
std::string cmd_report(const fs::path &haplotypes, const fs::path &noisy, const fs::path &targets, const fs::path &out,
    const ReportOptions &opts);

}  // namespace evo::pipeline
