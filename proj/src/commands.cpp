#include "evoforecast/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <set>
#include <tuple>

#include "evoforecast/error.hpp"
#include "text_util.hpp"

namespace evo::pipeline {

namespace {

fs::path manifest_path(const fs::path &output) { return fs::path(output.string() + ".manifest.json"); }

std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

nlohmann::json noise_json(const poolseq::NoiseParams &p) {
    return {{"n_sampling", p.n_sampling}, {"n_cov", p.n_cov}, {"census", p.census}};
}

nlohmann::json arch_json(const vae::Architecture &a) {
    return {{"b", a.trajectory_length}, {"w", a.half_window}, {"M", a.latent_dim}, {"enc1_hidden", a.enc1_hidden},
        {"enc2_hidden", a.enc2_hidden}, {"dec_hidden", a.dec_hidden}, {"variant", vae::to_string(a.variant)}};
}

nlohmann::json train_json(const vae::TrainConfig &c) {
    return {{"beta", c.beta}, {"lr_phase1", c.lr_phase1}, {"lr_phase2", c.lr_phase2},
        {"epochs_phase1", c.epochs_phase1}, {"epochs_phase2", c.epochs_phase2}, {"batch_size", c.batch_size},
        {"finetune_fraction", c.finetune_fraction}, {"neighbor_block", c.neighbor_block}, {"threads", c.threads}};
}

}  // namespace

SimulatedDataset simulate_dataset(const ExperimentConfig &config, unsigned threads) {
    config.validate();
    Rng freq_rng = make_rng(config.seed, {stream::kStartFrequencies});
    Rng target_rng = make_rng(config.seed, {stream::kTargets});
    Rng noise_rng = make_rng(config.seed, {stream::kLdNoise});

    auto freqs = sim::sample_starting_frequencies(config.loci, freq_rng);
    auto trait = sim::select_targets(freqs, config.targets, target_rng);
    auto pool = sim::apply_ld_noise(sim::build_max_ld_haplotypes(freqs, config.individuals), config.n_ld, noise_rng);

    sim::SimParams params{config.individuals, config.generations, config.replicates, config.interval,
        config.survive_fraction, config.recombination_rate, config.seed};
    auto result = sim::run_experiment(pool, trait, params, threads);
    return {std::move(trait), std::move(result.ancestral), std::move(result.frequencies)};
}

std::string format_targets(const sim::TraitModel &trait) {
    std::string out = "locus\teffect\n";
    char buf[64];
    for (const auto &t : trait.targets) {
        std::snprintf(buf, sizeof buf, "%zu\t%.6f\n", t.locus, t.effect);
        out += buf;
    }
    return out;
}

sim::TraitModel read_targets(const fs::path &path) {
    sim::TraitModel trait;
    auto text = detail::read_file(path);
    auto lines = detail::split_lines(text);
    for (std::size_t ln = 0; ln < lines.size(); ++ln) {
        if (ln == 0 && lines[0].starts_with("locus")) continue;
        if (lines[ln].empty()) continue;
        auto cells = detail::split(lines[ln], '\t');
        if (cells.size() != 2) throw ParseError("expected locus<TAB>effect", ln + 1);
        trait.targets.push_back({static_cast<std::size_t>(detail::parse_int(cells[0], ln + 1)),
            detail::parse_double(cells[1], ln + 1)});
    }
    return trait;
}

SimulatedDataset cmd_simulate(const ExperimentConfig &config, const fs::path &out_dir, unsigned threads) {
    nlohmann::json cfg = config;
    RunManifest manifest("simulate", config.seed, cfg);
    auto data = simulate_dataset(config, threads);
    fs::create_directories(out_dir);
    const auto haps = out_dir / "haplotypes.txt";
    const auto truth = out_dir / "ground_truth.tsv";
    const auto targets = out_dir / "targets.tsv";
    write_haplotypes(data.ancestral, haps);
    write_frequency_table(data.truth, truth);
    detail::write_file(targets, format_targets(data.trait));
    for (const auto &p : {haps, truth, targets}) manifest.add_output(p);
    manifest.write(out_dir / "simulate.manifest.json");
    return data;
}

FrequencyTensor cmd_noise(
    const fs::path &in, const fs::path &out, const poolseq::NoiseParams &noise, std::uint64_t seed, unsigned threads) {
    RunManifest manifest("noise", seed, noise_json(noise));
    manifest.add_input(in);
    auto noisy = poolseq::pool_seq_noise(read_frequency_table(in), noise, seed, threads);
    write_frequency_table(noisy, out);
    manifest.add_output(out);
    manifest.write(manifest_path(out));
    return noisy;
}

vae::TrainResult cmd_train(const fs::path &noisy, const fs::path &weights, const fs::path &log, const TrainOptions &opts) {
    RunManifest manifest("train", opts.config.seed,
        {{"architecture", arch_json(opts.arch)}, {"training", train_json(opts.config)}, {"train_until", opts.train_until}});
    manifest.add_input(noisy);
    auto tensor = read_frequency_table(noisy);
    if (tensor.kind() == TensorKind::predicted) throw ParameterError("train expects an observed (noisy) tensor");
    auto result = vae::train(tensor.until_generation(opts.train_until), opts.arch, opts.config);
    vae::save_params(result.params, weights);
    detail::write_file(log, vae::format_training_log(result.log));
    manifest.add_output(weights);
    manifest.add_output(log);
    manifest.write(manifest_path(weights));
    return result;
}

FrequencyTensor cmd_generate(const fs::path &weights, const fs::path &noisy, const fs::path &out, const GenerateOptions &opts) {
    RunManifest manifest("generate", opts.rollout.seed,
        {{"train_until", opts.train_until}, {"steps", opts.rollout.steps},
            {"samples_per_replicate", opts.rollout.samples_per_replicate}, {"deterministic", opts.rollout.deterministic}});
    manifest.add_input(weights);
    manifest.add_input(noisy);
    auto params = vae::load_params(weights);
    auto history = read_frequency_table(noisy).until_generation(opts.train_until);
    auto predicted = vae::rollout(params, history, opts.rollout);
    write_frequency_table(predicted, out);
    manifest.add_output(out);
    manifest.write(manifest_path(out));
    return predicted;
}

WfEstimates estimate_wf_parameters(const FrequencyTensor &training, const WfOptions &opts) {
    WfEstimates est;
    if (opts.ne) {
        est.ne = *opts.ne;
    } else {
        const int g0 = training.generations().front();
        const int t = training.generations().back() - g0;
        est.ne_per_replicate = wf::estimate_ne_per_replicate(training, g0, t, opts.noise);
        est.ne = wf::estimate_ne(training, g0, t, opts.noise);
    }
    if (opts.s_file) {
        auto text = detail::read_file(*opts.s_file);
        auto lines = detail::split_lines(text);
        std::map<std::size_t, double> by_snp;
        for (std::size_t ln = 0; ln < lines.size(); ++ln) {
            if (ln == 0 && lines[0].starts_with("snp_index")) continue;
            auto cells = detail::split(lines[ln], '\t');
            if (cells.size() != 2) throw ParseError("expected snp_index<TAB>s_hat", ln + 1);
            by_snp[static_cast<std::size_t>(detail::parse_int(cells[0], ln + 1))] = detail::parse_double(cells[1], ln + 1);
        }
        for (auto snp : training.snp_indices()) {
            auto it = by_snp.find(snp);
            if (it == by_snp.end()) throw DataError("no selection estimate for SNP " + std::to_string(snp));
            est.s.push_back(it->second);
        }
    } else {
        est.s = wf::estimate_s_all(training, opts.mode);
    }
    return est;
}

FrequencyTensor cmd_wf(const fs::path &noisy, const fs::path &out, const WfOptions &opts) {
    nlohmann::json cfg{{"train_until", opts.train_until}, {"steps", opts.steps}, {"printed_form", opts.printed_form}};
    if (opts.noise) cfg["noise"] = noise_json(*opts.noise);
    RunManifest manifest("wf", opts.seed, cfg);
    manifest.add_input(noisy);
    if (opts.s_file) manifest.add_input(*opts.s_file);

    auto training = read_frequency_table(noisy).until_generation(opts.train_until);
    auto est = estimate_wf_parameters(training, opts);
    const int c = training.interval() > 0 ? training.interval() : 1;
    auto sim = wf::simulate_wf(training, est.s, est.ne, static_cast<int>(opts.steps) * c, c, opts.seed, opts.threads,
        opts.printed_form);
    auto predicted = sim.slice_times(1, sim.times());
    write_frequency_table(predicted, out);

    const fs::path s_out(out.string() + ".s_hat.tsv");
    std::string s_text = "snp_index\ts_hat\n";
    char buf[64];
    for (std::size_t i = 0; i < est.s.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu\t%.8f\n", training.snp_indices()[i], est.s[i]);
        s_text += buf;
    }
    detail::write_file(s_out, s_text);
    const fs::path meta(out.string() + ".meta.json");
    nlohmann::json per_rep = nlohmann::json::array();
    for (double v : est.ne_per_replicate) per_rep.push_back(std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v));
    detail::write_file(meta, nlohmann::json{{"ne", est.ne}, {"ne_per_replicate", per_rep}}.dump(2) + "\n");

    for (const auto &p : {out, s_out, meta}) manifest.add_output(p);
    manifest.write(manifest_path(out));
    return predicted;
}

std::vector<MetricRow> evaluate(const FrequencyTensor &truth, const FrequencyTensor &prediction,
    const FrequencyTensor &noisy, const std::optional<sim::TraitModel> &trait, const EvaluateOptions &opts) {
    const auto baseline = noisy.until_generation(opts.train_until);
    if (baseline.times() == 0 || baseline.generations().back() != opts.train_until) {
        throw DataError("baseline tensor lacks the final training generation " + std::to_string(opts.train_until));
    }
    std::set<std::size_t> available(prediction.snp_indices().begin(), prediction.snp_indices().end());
    auto restrict = [&](const std::vector<std::size_t> &snps) {
        std::vector<std::size_t> out;
        for (auto s : snps) {
            if (available.count(s)) out.push_back(s);
        }
        return out;
    };

    std::vector<std::pair<std::string, std::vector<std::size_t>>> cohorts;
    if (trait) {
        Rng rng = make_rng(opts.seed, {stream::kCohort});
        std::size_t loci = truth.snp_indices().empty() ? 0 : truth.snp_indices().back() + 1;
        cohorts.emplace_back("targets", restrict([&] {
            std::vector<std::size_t> t;
            for (const auto &x : trait->targets) t.push_back(x.locus);
            return t;
        }()));
        try {
            auto spec = metrics::build_cohorts(*trait, loci, rng, opts.radius, opts.max_no_targets);
            cohorts.emplace_back("no_targets", restrict(spec.no_targets));
        } catch (const DataError &) {
            cohorts.emplace_back("no_targets", std::vector<std::size_t>{});
        }
    }
    cohorts.emplace_back("all", prediction.snp_indices());

    const int c = truth.interval();
    std::vector<MetricRow> rows;
    for (auto agg : {metrics::Aggregation::mean, metrics::Aggregation::std}) {
        for (const auto &[name, snps] : cohorts) {
            if (snps.empty()) continue;
            for (std::size_t j = 1;; ++j) {
                const int g = opts.train_until + c * static_cast<int>(j);
                if (!truth.has_generation(g) || !prediction.has_generation(g)) break;
                auto terms = metrics::relative_distance_terms(truth, prediction, baseline, agg, j, snps);
                double d = 0.0;
                for (double v : terms) d += v;
                d /= static_cast<double>(terms.size());
                double lo = std::numeric_limits<double>::quiet_NaN(), hi = lo;
                if (terms.size() >= 2) std::tie(lo, hi) = metrics::confidence_interval(terms, opts.level, opts.seed);
                rows.push_back({opts.dataset, opts.variant, std::string(metrics::to_string(agg)), name, g, d, lo, hi,
                    terms.size()});
            }
        }
    }
    return rows;
}

std::vector<MetricRow> evaluate_runs(const FrequencyTensor &truth, const std::vector<FrequencyTensor> &predictions,
    const FrequencyTensor &noisy, const std::optional<sim::TraitModel> &trait, const EvaluateOptions &opts) {
    if (predictions.empty()) throw ParameterError("evaluate: no prediction given");
    if (predictions.size() == 1) return evaluate(truth, predictions.front(), noisy, trait, opts);

    std::vector<MetricRow> rows;
    std::vector<std::vector<MetricRow>> per_run;
    for (std::size_t k = 0; k < predictions.size(); ++k) {
        auto o = opts;
        o.variant = opts.variant + "/run" + std::to_string(k + 1);
        per_run.push_back(evaluate(truth, predictions[k], noisy, trait, o));
        if (per_run.back().size() != per_run.front().size()) {
            throw DataError("evaluate: model runs cover different generations or SNPs");
        }
        rows.insert(rows.end(), per_run.back().begin(), per_run.back().end());
    }
    for (std::size_t i = 0; i < per_run.front().size(); ++i) {
        MetricRow summary = per_run.front()[i];
        summary.variant = opts.variant;
        std::vector<double> ds;
        for (const auto &run : per_run) ds.push_back(run[i].d);
        summary.d = std::accumulate(ds.begin(), ds.end(), 0.0) / static_cast<double>(ds.size());
        std::tie(summary.ci_lo, summary.ci_hi) = metrics::confidence_interval(ds, opts.level, opts.seed);
        rows.push_back(summary);
    }
    return rows;
}

std::string format_metrics(const std::vector<MetricRow> &rows) {
    std::string out = "dataset,variant,aggregation,cohort,test_generation,d,ci_lo,ci_hi\n";
    for (const auto &r : rows) {
        out += r.dataset + "," + r.variant + "," + r.aggregation + "," + r.cohort + "," +
            std::to_string(r.test_generation) + "," + fmt(r.d) + "," + fmt(r.ci_lo) + "," + fmt(r.ci_hi) + "\n";
    }
    return out;
}

std::vector<MetricRow> cmd_evaluate(const fs::path &truth, const fs::path &prediction, const fs::path &noisy,
    const fs::path &out, const EvaluateOptions &opts) {
    return cmd_evaluate(truth, std::vector<fs::path>{prediction}, noisy, out, opts);
}

std::vector<MetricRow> cmd_evaluate(const fs::path &truth, const std::vector<fs::path> &predictions,
    const fs::path &noisy, const fs::path &out, const EvaluateOptions &opts) {
    RunManifest manifest("evaluate", opts.seed,
        {{"train_until", opts.train_until}, {"radius", opts.radius}, {"max_no_targets", opts.max_no_targets},
            {"dataset", opts.dataset}, {"variant", opts.variant}, {"level", opts.level}});
    manifest.add_input(truth);
    for (const auto &p : predictions) manifest.add_input(p);
    manifest.add_input(noisy);
    std::optional<sim::TraitModel> trait;
    if (opts.targets) {
        manifest.add_input(*opts.targets);
        trait = read_targets(*opts.targets);
    }
    std::vector<FrequencyTensor> runs;
    for (const auto &p : predictions) runs.push_back(read_frequency_table(p));
    auto rows = evaluate_runs(read_frequency_table(truth), runs, read_frequency_table(noisy), trait, opts);
    detail::write_file(out, format_metrics(rows));
    manifest.add_output(out);
    manifest.write(manifest_path(out));
    return rows;
}

LdReport ld_report(const HaplotypePool &ancestral, const FrequencyTensor &noisy, const vae::VaeParams *params,
    const LdOptions &opts) {
    const auto training = noisy.until_generation(opts.train_until);
    std::size_t w = opts.half_window;
    if (params) {
        if (params->variant != vae::Variant::w) throw ParameterError("LD extraction needs weights of the w variant");
        w = params->half_window;
    }
    const auto pairs = ld::window_pairs(training, w);
    std::map<ld::SnpPair, double> similarity;
    if (params) {
        for (const auto &row : vae::extract_similarities(*params, training)) {
            similarity[{row.focal, row.neighbor}] = row.value;
        }
    }

    LdReport report;
    ld::LdTable truth;
    std::vector<ld::SnpPair> used;
    for (const auto &[i, j] : pairs) {
        if (i >= ancestral.loci() || j >= ancestral.loci()) throw DataError("SNP index beyond the haplotype snapshot");
        double r2;
        try {
            r2 = ld::r2_from_haplotypes(ancestral, i, j);
        } catch (const DataError &) {
            continue;  // monomorphic in the ancestral pool
        }
        const std::size_t ri = ld::row_of(training, i);
        const std::size_t rj = ld::row_of(training, j);
        truth.push_back({i, j, ld::Method::ground_truth, r2});
        report.table.push_back({i, j, ld::Method::ground_truth, r2});
        if (params) report.table.push_back({i, j, ld::Method::vae_similarity, similarity.at({i, j})});
        report.table.push_back({i, j, ld::Method::ldx_freq, ld::ldx_freq_estimate(training, ri, rj)});
        report.table.push_back({i, j, ld::Method::scalar_product, ld::scalar_product_baseline(training, ri, rj)});
        used.emplace_back(i, j);
    }
    report.pairs = used.size();
    report.rho_all = ld::evaluate_ld(report.table, truth);

    const auto kept = ld::filter_pairs(training, used, opts.alpha, training.generations().back());
    report.filtered_pairs = kept.size();
    if (kept.size() >= 2) {
        std::set<ld::SnpPair> keep(kept.begin(), kept.end());
        ld::LdTable sub;
        for (const auto &row : report.table) {
            if (keep.count({row.focal, row.neighbor})) sub.push_back(row);
        }
        report.rho_filtered = ld::evaluate_ld(sub, sub);
    }
    return report;
}

std::string format_ld_report(const LdReport &report, double alpha) {
    std::string out = "scenario,method,spearman,pairs,alpha_afc\n";
    for (const auto &[scenario, rho, n] : {std::tuple{"all", &report.rho_all, report.pairs},
             std::tuple{"filtered", &report.rho_filtered, report.filtered_pairs}}) {
        for (const auto &[method, value] : *rho) {
            out += std::string(scenario) + "," + std::string(ld::to_string(method)) + "," + fmt(value) + "," +
                std::to_string(n) + "," + fmt(alpha) + "\n";
        }
    }
    return out;
}

LdReport cmd_ld(const fs::path &haplotypes, const fs::path &noisy, const fs::path &table, const fs::path &report_path,
    const LdOptions &opts) {
    RunManifest manifest("ld", 0,
        {{"train_until", opts.train_until}, {"half_window", opts.half_window}, {"alpha", opts.alpha},
            {"with_weights", opts.weights.has_value()}});
    manifest.add_input(haplotypes);
    manifest.add_input(noisy);
    std::optional<vae::VaeParams> params;
    if (opts.weights) {
        manifest.add_input(*opts.weights);
        params = vae::load_params(*opts.weights);
    }
    auto report = ld_report(read_haplotypes(haplotypes), read_frequency_table(noisy), params ? &*params : nullptr, opts);
    detail::write_file(table, ld::format_ld_table(report.table));
    detail::write_file(report_path, format_ld_report(report, opts.alpha));
    manifest.add_output(table);
    manifest.add_output(report_path);
    manifest.write(manifest_path(report_path));
    return report;
}

std::string cmd_report(const fs::path &haplotypes, const fs::path &noisy, const fs::path &targets, const fs::path &out,
    const ReportOptions &opts) {
    nlohmann::json cfg{{"train_until", opts.train_until}, {"half_window", opts.half_window}, {"radius", opts.radius},
        {"r2_pairs", opts.r2_pairs}};
    if (opts.noise) cfg["noise"] = noise_json(*opts.noise);
    RunManifest manifest("report", opts.seed, cfg);
    for (const auto &p : {haplotypes, noisy, targets}) manifest.add_input(p);

    const auto pool = read_haplotypes(haplotypes);
    const auto training = read_frequency_table(noisy).until_generation(opts.train_until);
    const auto trait = read_targets(targets);
    std::string text = "panel,group,key,value\n";

    // r^2 of random window pairs
    auto pairs = ld::window_pairs(training, opts.half_window);
    Rng rng = make_rng(opts.seed, {stream::kCohort, 1});
    std::shuffle(pairs.begin(), pairs.end(), rng);
    std::size_t written = 0;
    for (const auto &[i, j] : pairs) {
        if (written == opts.r2_pairs) break;
        try {
            const double r2 = ld::r2_from_haplotypes(pool, i, j);
            text += "r2,window_pairs," + std::to_string(i) + "-" + std::to_string(j) + "," + fmt(r2) + "\n";
            ++written;
        } catch (const DataError &) {
        }
    }

    // AFC and |s| by cohort
    Rng cohort_rng = make_rng(opts.seed, {stream::kCohort});
    std::vector<std::pair<std::string, std::vector<std::size_t>>> cohorts;
    std::vector<std::size_t> target_snps;
    for (const auto &t : trait.targets) target_snps.push_back(t.locus);
    cohorts.emplace_back("targets", target_snps);
    try {
        cohorts.emplace_back("no_targets", metrics::build_cohorts(trait, pool.loci(), cohort_rng, opts.radius).no_targets);
    } catch (const DataError &) {
    }
    const auto afc = metrics::afc(training, training.generations().front(), training.generations().back());
    const auto s = wf::estimate_s_all(training);
    for (const auto &[name, snps] : cohorts) {
        for (auto snp : snps) {
            text += "afc," + name + "," + std::to_string(snp) + "," + fmt(afc[ld::row_of(training, snp)]) + "\n";
        }
    }
    for (const auto &[name, snps] : cohorts) {
        for (auto snp : snps) {
            text += "abs_s," + name + "," + std::to_string(snp) + "," + fmt(std::abs(s[ld::row_of(training, snp)])) + "\n";
        }
    }

    // Ne per replicate
    const int g0 = training.generations().front();
    try {
        auto ne = wf::estimate_ne_per_replicate(training, g0, training.generations().back() - g0, opts.noise);
        for (std::size_t r = 0; r < ne.size(); ++r) text += "ne,replicates," + std::to_string(r) + "," + fmt(ne[r]) + "\n";
    } catch (const DataError &) {
    }

    detail::write_file(out, text);
    manifest.add_output(out);
    manifest.write(manifest_path(out));
    return text;
}

}  // namespace evo::pipeline
