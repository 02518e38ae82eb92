// evoforecast: command-line driver for the E&R forecasting pipeline.
//
//   simulate -> noise -> train -> generate | wf -> evaluate, plus ld and report.
//
// Exit codes: 0 success, 1 runtime/data error, 2 usage/parameter error.

#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "evoforecast/commands.hpp"
#include "evoforecast/error.hpp"
#include "json.hpp"

namespace {

using namespace evo;
using namespace evo::pipeline;

unsigned default_threads() {
    if (const char *env = std::getenv("EVOFORECAST_THREADS")) {
        try {
            const long v = std::stol(env);
            if (v >= 1) return static_cast<unsigned>(v);
        } catch (const std::exception &) {
        }
        throw ParameterError("EVOFORECAST_THREADS must be a positive integer");
    }
    return 1;
}

// Flags that override a config-file value only when given on the command line.
class Overrides {
  public:
    template <class T>
    CLI::Option *add(CLI::App *app, const std::string &name, T &target, const std::string &help) {
        auto holder = std::make_shared<T>(target);
        auto *opt = app->add_option(name, *holder, help)->capture_default_str();
        apply_.push_back([opt, holder, &target] {
            if (opt->count() > 0) target = *holder;
        });
        return opt;
    }
    void apply() const {
        for (const auto &f : apply_) f();
    }

  private:
    std::vector<std::function<void()>> apply_;
};

void add_noise_options(CLI::App *app, poolseq::NoiseParams &noise) {
    app->add_option("--n-sampling", noise.n_sampling, "individuals drawn per pool")->capture_default_str();
    app->add_option("--n-cov", noise.n_cov, "sequencing coverage")->capture_default_str();
    app->add_option("--census", noise.census, "census population size N")->capture_default_str();
}

vae::TrainConfig train_config_from_json(const nlohmann::json &j, vae::Architecture &arch) {
    vae::TrainConfig c;
    for (const auto &[key, value] : j.items()) {
        if (key == "variant") arch.variant = vae::parse_variant(value.get<std::string>());
        else if (key == "trajectory_length") arch.trajectory_length = value.get<std::size_t>();
        else if (key == "half_window") arch.half_window = value.get<std::size_t>();
        else if (key == "latent_dim") arch.latent_dim = value.get<std::size_t>();
        else if (key == "enc1_hidden") arch.enc1_hidden = value.get<std::vector<std::size_t>>();
        else if (key == "enc2_hidden") arch.enc2_hidden = value.get<std::vector<std::size_t>>();
        else if (key == "dec_hidden") arch.dec_hidden = value.get<std::vector<std::size_t>>();
        else if (key == "beta") c.beta = value.get<double>();
        else if (key == "lr_phase1") c.lr_phase1 = value.get<double>();
        else if (key == "lr_phase2") c.lr_phase2 = value.get<double>();
        else if (key == "epochs_phase1") c.epochs_phase1 = value.get<int>();
        else if (key == "epochs_phase2") c.epochs_phase2 = value.get<int>();
        else if (key == "batch_size") c.batch_size = value.get<std::size_t>();
        else if (key == "finetune_fraction") c.finetune_fraction = value.get<double>();
        else if (key == "neighbor_block") c.neighbor_block = value.get<std::size_t>();
        else throw ParameterError("unknown training config key: " + key);
    }
    return c;
}

nlohmann::json read_json(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception &e) {
        throw DataError(path + ": " + e.what());
    }
}

int run(int argc, char **argv) {
    CLI::App app{"Simulation, forecasting and LD extraction for evolve-and-resequence experiments"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kToolVersion));

    unsigned threads = default_threads();
    bool deterministic = false;
    app.add_option("--threads", threads, "worker threads (default: $EVOFORECAST_THREADS or 1)")
        ->check(CLI::PositiveNumber);
    app.add_flag("--deterministic", deterministic, "single-threaded, bit-exact mode");
    auto workers = [&] { return deterministic ? 1u : threads; };

    // simulate
    auto *sim = app.add_subcommand("simulate", "forward-simulate an E&R experiment");
    std::string sim_config, sim_out;
    ExperimentConfig flags;
    Overrides sim_over;
    sim->add_option("--config", sim_config, "experiment JSON");
    sim->add_option("--out", sim_out, "output directory")->required();
    sim_over.add(sim, "--seed", flags.seed, "master seed")->required();
    sim_over.add(sim, "--loci", flags.loci, "number of SNPs L");
    sim_over.add(sim, "--individuals", flags.individuals, "population size N");
    sim_over.add(sim, "--generations", flags.generations, "generations G");
    sim_over.add(sim, "--replicates", flags.replicates, "replicates R");
    sim_over.add(sim, "--interval", flags.interval, "sampling interval c");
    sim_over.add(sim, "--survive-fraction", flags.survive_fraction, "truncation selection survivors");
    sim_over.add(sim, "--recombination-rate", flags.recombination_rate, "crossovers per gamete");
    sim_over.add(sim, "--targets", flags.targets, "number of selected targets");
    sim_over.add(sim, "--n-ld", flags.n_ld, "LD noise fraction in [0,1]");

    // noise
    auto *noise = app.add_subcommand("noise", "apply Pool-Seq sampling noise");
    std::string noise_in, noise_out;
    std::uint64_t noise_seed = 0;
    poolseq::NoiseParams noise_params;
    noise->add_option("--input", noise_in, "ground-truth TSV")->required()->check(CLI::ExistingFile);
    noise->add_option("--out", noise_out, "noisy TSV")->required();
    noise->add_option("--seed", noise_seed, "master seed")->required();
    add_noise_options(noise, noise_params);

    // train
    auto *train = app.add_subcommand("train", "train the forecasting VAE");
    std::string train_in, train_weights, train_log, train_config;
    TrainOptions topts;
    vae::Architecture arch_flags;
    vae::TrainConfig cfg_flags;
    std::string variant_flag = "w";
    Overrides train_over;
    train->add_option("--input", train_in, "noisy TSV")->required()->check(CLI::ExistingFile);
    train->add_option("--weights", train_weights, "output weight file")->required();
    train->add_option("--log", train_log, "output loss log CSV")->required();
    train->add_option("--config", train_config, "training JSON");
    train->add_option("--train-until", topts.train_until, "last training generation")->capture_default_str();
    train->add_option("--seed", cfg_flags.seed, "master seed")->required();
    train_over.add(train, "--variant", variant_flag, "w | no_w");
    train_over.add(train, "--trajectory-length", arch_flags.trajectory_length, "b");
    train_over.add(train, "--half-window", arch_flags.half_window, "w");
    train_over.add(train, "--latent-dim", arch_flags.latent_dim, "M");
    train_over.add(train, "--beta", cfg_flags.beta, "KLD weight");
    train_over.add(train, "--lr1", cfg_flags.lr_phase1, "phase-1 learning rate");
    train_over.add(train, "--lr2", cfg_flags.lr_phase2, "phase-2 learning rate");
    train_over.add(train, "--epochs1", cfg_flags.epochs_phase1, "phase-1 epochs");
    train_over.add(train, "--epochs2", cfg_flags.epochs_phase2, "phase-2 epochs");
    train_over.add(train, "--batch-size", cfg_flags.batch_size, "batch size");
    train_over.add(train, "--finetune-fraction", cfg_flags.finetune_fraction, "top-AFC fraction for phase 2");
    train_over.add(train, "--neighbor-block", cfg_flags.neighbor_block, "adjacent windows kept together");

    // generate
    auto *gen = app.add_subcommand("generate", "autoregressive forecast with trained weights");
    std::string gen_weights, gen_in, gen_out;
    GenerateOptions gopts;
    bool mean_latent = false;
    gen->add_option("--weights", gen_weights, "weight file")->required()->check(CLI::ExistingFile);
    gen->add_option("--input", gen_in, "noisy TSV")->required()->check(CLI::ExistingFile);
    gen->add_option("--out", gen_out, "predicted TSV")->required();
    gen->add_option("--seed", gopts.rollout.seed, "master seed")->required();
    gen->add_option("--train-until", gopts.train_until, "last observed generation")->capture_default_str();
    gen->add_option("--steps", gopts.rollout.steps, "forecast steps")->capture_default_str();
    gen->add_option("--samples", gopts.rollout.samples_per_replicate, "rollouts per replicate")->capture_default_str();
    gen->add_flag("--mean-latent", mean_latent, "use z = mu instead of sampling");

    // wf
    auto *wfc = app.add_subcommand("wf", "Wright-Fisher baseline forecast");
    std::string wf_in, wf_out, wf_s_file, wf_mode = "pooled";
    WfOptions wopts;
    double wf_ne = 0.0;
    bool no_correction = false;
    poolseq::NoiseParams wf_noise;
    wfc->add_option("--input", wf_in, "noisy TSV")->required()->check(CLI::ExistingFile);
    wfc->add_option("--out", wf_out, "predicted TSV")->required();
    wfc->add_option("--seed", wopts.seed, "master seed")->required();
    wfc->add_option("--train-until", wopts.train_until, "last observed generation")->capture_default_str();
    wfc->add_option("--steps", wopts.steps, "forecast steps")->capture_default_str();
    auto *ne_opt = wfc->add_option("--ne", wf_ne, "fixed Ne instead of the temporal estimate");
    wfc->add_option("--s-file", wf_s_file, "fixed s per SNP (snp_index<TAB>s_hat)")->check(CLI::ExistingFile);
    wfc->add_option("--mode", wf_mode, "s regression: pooled | per_replicate | two_point")
        ->check(CLI::IsMember({"pooled", "per_replicate", "two_point"}));
    wfc->add_flag("--printed-form", wopts.printed_form, "use the uncorrected fitness-map denominator");
    wfc->add_flag("--no-sampling-correction", no_correction, "estimate Ne without the Pool-Seq correction");
    add_noise_options(wfc, wf_noise);

    // evaluate
    auto *eval = app.add_subcommand("evaluate", "relative distribution distance against a baseline");
    std::string ev_truth, ev_noisy, ev_out, ev_targets;
    std::vector<std::string> ev_preds;
    EvaluateOptions eopts;
    eval->add_option("--truth", ev_truth, "ground-truth TSV")->required()->check(CLI::ExistingFile);
    eval->add_option("--prediction", ev_preds, "predicted TSV; repeat for several model runs")->required()->check(CLI::ExistingFile);
    eval->add_option("--noisy", ev_noisy, "noisy TSV providing the baseline")->required()->check(CLI::ExistingFile);
    eval->add_option("--out", ev_out, "metrics CSV")->required();
    eval->add_option("--seed", eopts.seed, "master seed")->required();
    eval->add_option("--targets", ev_targets, "targets TSV for cohort split")->check(CLI::ExistingFile);
    eval->add_option("--train-until", eopts.train_until, "last observed generation")->capture_default_str();
    eval->add_option("--radius", eopts.radius, "no-target exclusion radius (SNPs)")->capture_default_str();
    eval->add_option("--max-no-targets", eopts.max_no_targets, "no-target cohort cap")->capture_default_str();
    eval->add_option("--dataset", eopts.dataset, "dataset label")->capture_default_str();
    eval->add_option("--variant", eopts.variant, "model label")->capture_default_str();
    eval->add_option("--level", eopts.level, "confidence level")->capture_default_str();

    // ld
    auto *ldc = app.add_subcommand("ld", "LD estimates and Spearman report");
    std::string ld_haps, ld_in, ld_table, ld_report_path, ld_weights;
    LdOptions lopts;
    ldc->add_option("--haplotypes", ld_haps, "ancestral haplotypes")->required()->check(CLI::ExistingFile);
    ldc->add_option("--input", ld_in, "noisy TSV")->required()->check(CLI::ExistingFile);
    ldc->add_option("--table", ld_table, "output LD table TSV")->required();
    ldc->add_option("--report", ld_report_path, "output Spearman CSV")->required();
    ldc->add_option("--weights", ld_weights, "w-variant weights")->check(CLI::ExistingFile);
    ldc->add_option("--train-until", lopts.train_until, "last observed generation")->capture_default_str();
    ldc->add_option("--half-window", lopts.half_window, "w without weights")->capture_default_str();
    ldc->add_option("--alpha", lopts.alpha, "AFC filter fraction")->capture_default_str();

    // report
    auto *rep = app.add_subcommand("report", "dataset characteristics as long-format CSV");
    std::string rep_haps, rep_in, rep_targets, rep_out;
    ReportOptions ropts;
    poolseq::NoiseParams rep_noise;
    rep->add_option("--haplotypes", rep_haps, "ancestral haplotypes")->required()->check(CLI::ExistingFile);
    rep->add_option("--input", rep_in, "noisy TSV")->required()->check(CLI::ExistingFile);
    rep->add_option("--targets", rep_targets, "targets TSV")->required()->check(CLI::ExistingFile);
    rep->add_option("--out", rep_out, "output CSV")->required();
    rep->add_option("--seed", ropts.seed, "master seed")->required();
    rep->add_option("--train-until", ropts.train_until, "last observed generation")->capture_default_str();
    rep->add_option("--half-window", ropts.half_window, "pair window")->capture_default_str();
    rep->add_option("--radius", ropts.radius, "no-target exclusion radius")->capture_default_str();
    rep->add_option("--r2-pairs", ropts.r2_pairs, "random pairs for the r^2 panel")->capture_default_str();
    add_noise_options(rep, rep_noise);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    if (sim->parsed()) {
        flags = sim_config.empty() ? ExperimentConfig{} : load_experiment_config(sim_config);
        sim_over.apply();
        cmd_simulate(flags, sim_out, workers());
    } else if (noise->parsed()) {
        cmd_noise(noise_in, noise_out, noise_params, noise_seed, workers());
    } else if (train->parsed()) {
        const std::uint64_t seed = cfg_flags.seed;
        vae::Architecture arch;
        vae::TrainConfig config;
        if (!train_config.empty()) config = train_config_from_json(read_json(train_config), arch);
        arch_flags = arch;
        cfg_flags = config;
        variant_flag = std::string(vae::to_string(arch.variant));
        train_over.apply();
        arch_flags.variant = vae::parse_variant(variant_flag);
        cfg_flags.seed = seed;
        cfg_flags.threads = workers();
        topts.arch = arch_flags;
        topts.config = cfg_flags;
        cmd_train(train_in, train_weights, train_log, topts);
    } else if (gen->parsed()) {
        gopts.rollout.deterministic = mean_latent;
        gopts.rollout.threads = workers();
        cmd_generate(gen_weights, gen_in, gen_out, gopts);
    } else if (wfc->parsed()) {
        if (ne_opt->count() > 0) wopts.ne = wf_ne;
        if (!wf_s_file.empty()) wopts.s_file = wf_s_file;
        if (!no_correction) wopts.noise = wf_noise;
        wopts.mode = wf_mode == "pooled" ? wf::RegressionMode::pooled
            : wf_mode == "per_replicate" ? wf::RegressionMode::per_replicate
                                         : wf::RegressionMode::two_point;
        wopts.threads = workers();
        cmd_wf(wf_in, wf_out, wopts);
    } else if (eval->parsed()) {
        if (!ev_targets.empty()) eopts.targets = ev_targets;
        cmd_evaluate(ev_truth, std::vector<fs::path>(ev_preds.begin(), ev_preds.end()), ev_noisy, ev_out, eopts);
    } else if (ldc->parsed()) {
        if (!ld_weights.empty()) lopts.weights = ld_weights;
        cmd_ld(ld_haps, ld_in, ld_table, ld_report_path, lopts);
    } else if (rep->parsed()) {
        ropts.noise = rep_noise;
        cmd_report(rep_haps, rep_in, rep_targets, rep_out, ropts);
    }
    return 0;
}

}  // namespace

int main(int argc, char **argv) {
    try {
        return run(argc, argv);
    } catch (const evo::ParameterError &e) {
        std::cerr << "evoforecast: parameter error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception &e) {
        std::cerr << "evoforecast: error: " << e.what() << "\n";
        return 1;
    }
}
