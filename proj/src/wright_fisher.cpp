#include "evoforecast/wright_fisher.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "evoforecast/error.hpp"
#include "evoforecast/parallel.hpp"

namespace evo::wf {

namespace {
constexpr double kMinF = 1e-6;       // guard for the corrected F
constexpr double kLogitClamp = 0.001;
}  // namespace

double fitness_map(double x, double s, bool printed_form) {
    if (!(s > -1.0)) throw ParameterError("selection coefficient must exceed -1 (negative fitness)");
    const double hom = (1.0 + s) * x * x;
    const double het = (1.0 + 0.5 * s) * x * (1.0 - x);
    const double other = (1.0 - x) * (1.0 - x);
    const double mean = hom + (printed_form ? 1.0 : 2.0) * het + other;
    return (hom + het) / mean;
}

void WfParams::validate() const {
    if (!(ne >= 1.0)) throw ParameterError("ne must be at least 1");
    if (interval < 1) throw ParameterError("interval must be at least 1");
    if (horizon < 0 || horizon % interval != 0) throw ParameterError("horizon must be a non-negative multiple of c");
    if (!(s > -1.0)) throw ParameterError("selection coefficient must exceed -1 (negative fitness)");
}

double wf_step(double f, const WfParams &p, Rng &rng) {
    if (f <= 0.0) return 0.0;
    if (f >= 1.0) return 1.0;
    const auto trials = static_cast<std::uint64_t>(std::max(1.0, std::nearbyint(2.0 * p.ne)));
    const double mean = std::clamp(fitness_map(f, p.s, p.printed_form), 0.0, 1.0);
    if (mean <= 0.0) return 0.0;
    if (mean >= 1.0) return 1.0;
    std::binomial_distribution<std::uint64_t> draw(trials, mean);
    return static_cast<double>(draw(rng)) / static_cast<double>(trials);
}

FrequencyTensor simulate_wf(const FrequencyTensor &start, std::span<const double> s, double ne, int horizon, int interval,
    std::uint64_t seed, unsigned threads, bool printed_form) {
    if (start.times() == 0) throw DataError("simulate_wf: empty start tensor");
    if (s.size() != start.snps()) throw ParameterError("simulate_wf: one selection coefficient per SNP required");
    WfParams base{ne, 0.0, horizon, interval, printed_form};
    base.validate();

    const std::size_t t0 = start.times() - 1;
    const int g0 = start.generations()[t0];
    std::vector<int> generations;
    for (int g = 0; g <= horizon; g += interval) generations.push_back(g0 + g);
    FrequencyTensor out(generations, start.snp_indices(), start.positions(), start.replicates(), TensorKind::predicted);

    parallel_for(start.snps(), threads, [&](std::size_t i) {
        WfParams p = base;
        p.s = s[i];
        if (!(p.s > -1.0)) throw ParameterError("selection coefficient must exceed -1 (negative fitness)");
        const auto snp = static_cast<std::uint64_t>(start.snp_indices()[i]);
        for (std::size_t r = 0; r < start.replicates(); ++r) {
            Rng rng = make_rng(seed, {stream::kWrightFisher, snp, r});
            double f = start.at(t0, i, r);
            out.at(0, i, r) = f;
            std::size_t t = 1;
            for (int g = 1; g <= horizon; ++g) {
                f = wf_step(f, p, rng);
                if (g % interval == 0) out.at(t++, i, r) = f;
            }
        }
    });
    return out;
}

std::vector<double> estimate_ne_per_replicate(
    const FrequencyTensor &f, int g0, int t, const std::optional<poolseq::NoiseParams> &noise) {
    if (t <= 0) throw ParameterError("estimate_ne: t must be positive");
    const std::size_t a = f.time_index(g0);
    const std::size_t b = f.time_index(g0 + t);
    double correction = 0.0;
    if (noise) {
        noise->validate();
        correction = 2.0 * noise->inverse_effective_size();
    }
    std::vector<double> out(f.replicates(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t r = 0; r < f.replicates(); ++r) {
        double sum = 0.0;
        std::size_t informative = 0;
        for (std::size_t i = 0; i < f.snps(); ++i) {
            const double x = f.at(a, i, r);
            const double y = f.at(b, i, r);
            if (!(x > 0.0 && x < 1.0)) continue;
            const double z = 0.5 * (x + y);
            sum += (x - y) * (x - y) / (z - x * y);
            ++informative;
        }
        if (informative < 100) {
            throw DataError("estimate_ne: replicate " + std::to_string(r) + " has only " + std::to_string(informative) +
                " informative SNPs (need 100)");
        }
        const double fc = sum / static_cast<double>(informative);
        const double corrected = fc - correction;
        if (corrected > 0.0) out[r] = static_cast<double>(t) / (2.0 * std::max(corrected, kMinF));
    }
    return out;
}

double estimate_ne(const FrequencyTensor &f, int g0, int t, const std::optional<poolseq::NoiseParams> &noise) {
    auto per_rep = estimate_ne_per_replicate(f, g0, t, noise);
    double sum = 0.0;
    std::size_t n = 0;
    for (double v : per_rep) {
        if (std::isnan(v)) continue;
        sum += v;
        ++n;
    }
    if (n == 0) throw EstimationError("estimate_ne: corrected F is not positive in any replicate (noise dominates drift)");
    return sum / static_cast<double>(n);
}

namespace {

double logit_clamped(double f) {
    const double x = std::clamp(f, kLogitClamp, 1.0 - kLogitClamp);
    return std::log(x / (1.0 - x));
}

// OLS slope of y on x; throws when all x coincide.
double ols_slope(std::span<const double> x, std::span<const double> y) {
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        mx += x[k];
        my += y[k];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        sxx += (x[k] - mx) * (x[k] - mx);
        sxy += (x[k] - mx) * (y[k] - my);
    }
    if (sxx <= 0.0) throw EstimationError("estimate_s: singular design (all points at the same generation)");
    return sxy / sxx;
}

}  // namespace

double estimate_s(std::span<const double> values, std::span<const int> generations, std::size_t replicates,
    RegressionMode mode) {
    const std::size_t times = generations.size();
    if (times < 2) throw ParameterError("estimate_s: need at least 2 time points");
    if (values.size() != times * replicates) throw ParameterError("estimate_s: values do not match generations x replicates");

    std::vector<std::size_t> use;
    if (mode == RegressionMode::two_point) {
        use = {0, times - 1};
    } else {
        for (std::size_t k = 0; k < times; ++k) use.push_back(k);
    }

    if (mode == RegressionMode::per_replicate) {
        double total = 0.0;
        for (std::size_t r = 0; r < replicates; ++r) {
            std::vector<double> x, y;
            for (auto k : use) {
                x.push_back(generations[k]);
                y.push_back(logit_clamped(values[r * times + k]));
            }
            total += ols_slope(x, y);
        }
        return 2.0 * total / static_cast<double>(replicates);
    }

    std::vector<double> x, y;
    for (std::size_t r = 0; r < replicates; ++r) {
        for (auto k : use) {
            x.push_back(generations[k]);
            y.push_back(logit_clamped(values[r * times + k]));
        }
    }
    return 2.0 * ols_slope(x, y);
}

std::vector<double> estimate_s_all(const FrequencyTensor &f, RegressionMode mode) {
    std::vector<double> out(f.snps());
    std::vector<double> values(f.times() * f.replicates());
    for (std::size_t i = 0; i < f.snps(); ++i) {
        for (std::size_t r = 0; r < f.replicates(); ++r) {
            for (std::size_t t = 0; t < f.times(); ++t) values[r * f.times() + t] = f.at(t, i, r);
        }
        out[i] = estimate_s(values, f.generations(), f.replicates(), mode);
    }
    return out;
}

}  // namespace evo::wf
