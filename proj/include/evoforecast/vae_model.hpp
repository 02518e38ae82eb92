#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "evoforecast/random.hpp"

namespace evo::vae {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// "w" mixes the focal embedding with attention-weighted neighbour
/// embeddings; "no_w" uses the focal trajectory only.
enum class Variant { w, no_w };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view text);

struct Architecture {
    std::size_t trajectory_length = 6;  // b
    std::size_t half_window = 50;       // w, window has 2w+1 rows
    std::size_t latent_dim = 10;        // M
    std::vector<std::size_t> enc1_hidden{100, 50, 25, 12};
    std::vector<std::size_t> enc2_hidden{100, 50, 50};
    std::vector<std::size_t> dec_hidden{20, 10, 5};
    Variant variant = Variant::w;

    std::size_t window_rows() const { return 2 * half_window + 1; }
};

struct Dense {
    Matrix weight;  // out x in
    Vector bias;    // out
};

/// Fully connected stack; every layer but (optionally) the last uses tanh.
struct Mlp {
    std::vector<Dense> layers;

    std::size_t input_dim() const { return layers.front().weight.cols(); }
    std::size_t output_dim() const { return layers.back().weight.rows(); }
};

/// All trainable weights. Also used as the gradient container.
struct VaeParams {
    Variant variant = Variant::w;
    std::size_t half_window = 0;
    Mlp enc1;  // similarity encoder
    Mlp enc2;  // prediction encoder
    Vector combine;  // (lambda_focal, lambda_neighbours)
    Dense mu_head;
    Dense logvar_head;
    Mlp dec;

    std::size_t trajectory_length() const { return enc2.input_dim(); }
    std::size_t latent_dim() const { return mu_head.weight.rows(); }
    std::size_t window_rows() const { return 2 * half_window + 1; }

    /// Every parameter block in serialization order.
    std::vector<std::span<double>> blocks();
    std::vector<std::span<const double>> blocks() const;
    /// (rows, cols) of every block in serialization order.
    std::vector<std::pair<std::size_t, std::size_t>> shapes() const;
    std::size_t parameter_count() const;

    /// Same shapes, all zero.
    VaeParams zeros_like() const;

    bool operator==(const VaeParams &other) const;
};

/// Fan-in scaled uniform initialisation U(-1/sqrt(fan_in), 1/sqrt(fan_in));
/// combination coefficients start at 0.5.
VaeParams init_params(const Architecture &arch, Rng &rng);

/// One training/inference window.
struct WindowSample {
    std::vector<double> focal;  // b values, oldest first
    Matrix neighbors;           // (2w+1) x b, row w == focal
    double target = 0.0;
    std::size_t snp_index = 0;
    std::size_t replicate = 0;
    int base_generation = 0;
};

/// Batched input. Trajectories are shared between windows: `focal[k]` and the
/// entries of `neighbors` index rows of `trajectories`. An empty `neighbors`
/// skips the attention pathway (only valid for no_w).
struct Batch {
    Matrix trajectories;                 // U x b
    std::vector<std::size_t> focal;      // B
    std::vector<std::size_t> neighbors;  // B x (2w+1), row-major
    Vector targets;                      // B
    Matrix noise;                        // B x M reparameterisation noise

    std::size_t size() const { return focal.size(); }
};

/// Builds a batch from standalone samples with the given noise rows.
Batch make_batch(std::span<const WindowSample> samples, const Matrix &noise);

struct LossParts {
    double total = 0.0;
    double recon = 0.0;
    double kld = 0.0;
};

/// KL(N(mu, diag(exp(logvar))) || N(0, I)).
double kl_divergence(const Vector &mu, const Vector &logvar);

constexpr double kLogvarMin = -10.0;
constexpr double kLogvarMax = 10.0;
constexpr double kNormEpsilon = 1e-12;

/// Forward state kept for the backward pass.
struct Forward {
    std::vector<Matrix> enc1_act;  // activations per layer, [0] = input
    std::vector<Matrix> enc2_act;
    std::vector<Matrix> dec_act;
    Vector norms;                  // |Enc1 row|
    Matrix unit;                   // Enc1 rows / (|row| + eps)
    Matrix similarity;             // B x (2w+1)
    Matrix attention;              // B x (2w+1)
    Matrix context;                // B x M, attention-weighted Enc2 neighbours
    Matrix pre_latent;             // B x M
    Matrix mu;
    Matrix logvar_raw;
    Matrix logvar;                 // clamped
    Matrix z;
    Vector prediction;             // B
    LossParts loss;
};

/// Full forward pass and mean loss over the batch.
Forward forward(const VaeParams &params, const Batch &batch, double beta);

/// Exact reverse-mode gradient of forward(params, batch, beta).loss.total,
/// accumulated into `grad` (same shapes as params).
void backward(const VaeParams &params, const Batch &batch, const Forward &fwd, double beta, VaeParams &grad);

/// Loss and gradient for a fixed noise matrix.
LossParts loss_and_gradients(const VaeParams &params, const Batch &batch, double beta, VaeParams &grad);

struct Encoding {
    Vector mu;
    Vector logvar;
    Vector attention;   // 2w+1
    Vector similarity;  // 2w+1
};

Encoding encode(const WindowSample &sample, const VaeParams &params);

/// z = mu + exp(logvar/2) * eps with eps ~ N(0, I); returns mu when
/// `deterministic`.
Vector reparameterize(const Vector &mu, const Vector &logvar, Rng &rng, bool deterministic = false);

/// Decoder output in (0,1).
double decode(const Vector &z, const VaeParams &params);

/// Mean batch loss with noise drawn from `rng`.
LossParts loss(std::span<const WindowSample> samples, const VaeParams &params, double beta, Rng &rng);

/// Weight file: magic, version, variant, dimensions, layer-shape table, then
/// every block as little-endian float64 in row-major order.
std::string serialize(const VaeParams &params);
VaeParams deserialize(std::string_view bytes);
void save_params(const VaeParams &params, const std::filesystem::path &path);
VaeParams load_params(const std::filesystem::path &path);

}  // namespace evo::vae
