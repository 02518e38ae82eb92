#pragma once

#include <filesystem>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "evoforecast/frequency_tensor.hpp"
#include "evoforecast/haplotype_pool.hpp"

namespace testutil {

inline evo::FrequencyTensor make_tensor(std::vector<int> generations, std::size_t snps, std::size_t replicates,
    evo::TensorKind kind = evo::TensorKind::ground_truth) {
    std::vector<std::size_t> idx(snps);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return evo::FrequencyTensor(std::move(generations), idx, evo::default_positions(snps), replicates, kind);
}

inline std::vector<int> every(int step, int last) {
    std::vector<int> g;
    for (int x = 0; x <= last; x += step) g.push_back(x);
    return g;
}

inline double variance(const std::vector<double> &x) {
    const double n = static_cast<double>(x.size());
    const double m = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double v = 0.0;
    for (double a : x) v += (a - m) * (a - m);
    return v / (n - 1.0);
}

inline double mean(const std::vector<double> &x) {
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
  public:
    explicit TempDir(const std::string &tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("evoforecast-" + tag + "-" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir &) = delete;
    TempDir &operator=(const TempDir &) = delete;

    const std::filesystem::path &path() const { return path_; }
    std::filesystem::path operator/(const std::string &name) const { return path_ / name; }

  private:
    std::filesystem::path path_;
};

}  // namespace testutil
