#include "evoforecast/vae_model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>

#include "evoforecast/error.hpp"
#include "text_util.hpp"

namespace evo::vae {

std::string_view to_string(Variant v) { return v == Variant::w ? "w" : "no_w"; }

Variant parse_variant(std::string_view text) {
    if (text == "w") return Variant::w;
    if (text == "no_w") return Variant::no_w;
    throw ParameterError("unknown variant '" + std::string(text) + "' (expected w or no_w)");
}

namespace {

template <class P, class Fn>
void visit_blocks(P &p, Fn &&fn) {
    auto mlp = [&](auto &m) {
        for (auto &layer : m.layers) {
            fn(layer.weight.data(), layer.weight.rows(), layer.weight.cols());
            fn(layer.bias.data(), layer.bias.rows(), 1);
        }
    };
    mlp(p.enc1);
    mlp(p.enc2);
    fn(p.combine.data(), p.combine.rows(), 1);
    fn(p.mu_head.weight.data(), p.mu_head.weight.rows(), p.mu_head.weight.cols());
    fn(p.mu_head.bias.data(), p.mu_head.bias.rows(), 1);
    fn(p.logvar_head.weight.data(), p.logvar_head.weight.rows(), p.logvar_head.weight.cols());
    fn(p.logvar_head.bias.data(), p.logvar_head.bias.rows(), 1);
    mlp(p.dec);
}

Dense make_dense(std::size_t in, std::size_t out, Rng &rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> u(-bound, bound);
    Dense d{Matrix(out, in), Vector(out)};
    for (Eigen::Index i = 0; i < d.weight.size(); ++i) d.weight.data()[i] = u(rng);
    for (Eigen::Index i = 0; i < d.bias.size(); ++i) d.bias[i] = u(rng);
    return d;
}

Mlp make_mlp(std::size_t in, const std::vector<std::size_t> &hidden, std::size_t out, Rng &rng) {
    Mlp m;
    std::size_t prev = in;
    for (auto h : hidden) {
        m.layers.push_back(make_dense(prev, h, rng));
        prev = h;
    }
    m.layers.push_back(make_dense(prev, out, rng));
    return m;
}

// tanh through the vectorised exp; Eigen only vectorises tanh for float.
// Absolute error stays near machine epsilon. Every op here must have a packet
// version (sign() does not), or Eigen silently falls back to scalar exp.
// tanh(20) is 1 in double, and the clamp keeps exp(-2x) finite.
Matrix fast_tanh(const Matrix &x) {
    const auto e = (-2.0 * x.array().max(-20.0).min(20.0)).exp();
    return ((1.0 - e) / (1.0 + e)).matrix();
}

void mlp_forward(const Mlp &mlp, const Matrix &input, bool tanh_last, std::vector<Matrix> &acts) {
    acts.resize(mlp.layers.size() + 1);
    acts[0] = input;
    for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
        const auto &layer = mlp.layers[l];
        Matrix pre = acts[l] * layer.weight.transpose();
        pre.rowwise() += layer.bias.transpose();
        if (l + 1 < mlp.layers.size() || tanh_last) {
            acts[l + 1] = fast_tanh(pre);
        } else {
            acts[l + 1] = std::move(pre);
        }
    }
}

// grad_out is d(loss)/d(output activation). Returns d(loss)/d(input) when
// need_input, otherwise an empty matrix.
Matrix mlp_backward(const Mlp &mlp, const std::vector<Matrix> &acts, Matrix grad_out, bool tanh_last, Mlp &grad,
    bool need_input) {
    for (std::size_t l = mlp.layers.size(); l-- > 0;) {
        Matrix dpre;
        if (l + 1 < mlp.layers.size() || tanh_last) {
            dpre = (grad_out.array() * (1.0 - acts[l + 1].array().square())).matrix();
        } else {
            dpre = std::move(grad_out);
        }
        grad.layers[l].weight.noalias() += dpre.transpose() * acts[l];
        grad.layers[l].bias += dpre.colwise().sum().transpose();
        if (l > 0 || need_input) {
            grad_out = dpre * mlp.layers[l].weight;
        }
    }
    return need_input ? grad_out : Matrix();
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

std::vector<std::span<double>> VaeParams::blocks() {
    std::vector<std::span<double>> out;
    visit_blocks(*this, [&](double *p, Eigen::Index r, Eigen::Index c) { out.emplace_back(p, static_cast<std::size_t>(r * c)); });
    return out;
}

std::vector<std::span<const double>> VaeParams::blocks() const {
    std::vector<std::span<const double>> out;
    visit_blocks(*this,
        [&](const double *p, Eigen::Index r, Eigen::Index c) { out.emplace_back(p, static_cast<std::size_t>(r * c)); });
    return out;
}

std::vector<std::pair<std::size_t, std::size_t>> VaeParams::shapes() const {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    visit_blocks(*this, [&](const double *, Eigen::Index r, Eigen::Index c) {
        out.emplace_back(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
    });
    return out;
}

std::size_t VaeParams::parameter_count() const {
    std::size_t n = 0;
    for (auto b : blocks()) n += b.size();
    return n;
}

VaeParams VaeParams::zeros_like() const {
    VaeParams z = *this;
    for (auto b : z.blocks()) std::fill(b.begin(), b.end(), 0.0);
    return z;
}

bool VaeParams::operator==(const VaeParams &other) const {
    if (variant != other.variant || half_window != other.half_window || shapes() != other.shapes()) return false;
    auto a = blocks();
    auto b = other.blocks();
    for (std::size_t k = 0; k < a.size(); ++k) {
        if (std::memcmp(a[k].data(), b[k].data(), a[k].size_bytes()) != 0) return false;
    }
    return true;
}

VaeParams init_params(const Architecture &arch, Rng &rng) {
    if (arch.trajectory_length < 1 || arch.latent_dim < 1) throw ParameterError("b and M must be positive");
    VaeParams p;
    p.variant = arch.variant;
    p.half_window = arch.half_window;
    p.enc1 = make_mlp(arch.trajectory_length, arch.enc1_hidden, arch.latent_dim, rng);
    p.enc2 = make_mlp(arch.trajectory_length, arch.enc2_hidden, arch.latent_dim, rng);
    p.combine = Vector::Constant(2, 0.5);
    p.mu_head = make_dense(arch.latent_dim, arch.latent_dim, rng);
    p.logvar_head = make_dense(arch.latent_dim, arch.latent_dim, rng);
    p.dec = make_mlp(arch.latent_dim, arch.dec_hidden, 1, rng);
    return p;
}

Batch make_batch(std::span<const WindowSample> samples, const Matrix &noise) {
    Batch batch;
    if (samples.empty()) return batch;
    const std::size_t b = samples.front().focal.size();
    const auto rows = static_cast<std::size_t>(samples.front().neighbors.rows());
    const std::size_t per = rows == 0 ? 1 : rows;
    batch.trajectories.resize(static_cast<Eigen::Index>(samples.size() * per), static_cast<Eigen::Index>(b));
    batch.targets.resize(static_cast<Eigen::Index>(samples.size()));
    for (std::size_t k = 0; k < samples.size(); ++k) {
        const auto &s = samples[k];
        if (s.focal.size() != b || static_cast<std::size_t>(s.neighbors.rows()) != rows) {
            throw DataError("make_batch: samples differ in shape");
        }
        const std::size_t centre = rows == 0 ? 0 : rows / 2;
        for (std::size_t j = 0; j < rows; ++j) {
            batch.trajectories.row(static_cast<Eigen::Index>(k * per + j)) = s.neighbors.row(static_cast<Eigen::Index>(j));
            batch.neighbors.push_back(k * per + j);
        }
        for (std::size_t t = 0; t < b; ++t) {
            batch.trajectories(static_cast<Eigen::Index>(k * per + centre), static_cast<Eigen::Index>(t)) = s.focal[t];
        }
        batch.focal.push_back(k * per + centre);
        batch.targets[static_cast<Eigen::Index>(k)] = s.target;
    }
    batch.noise = noise;
    return batch;
}

double kl_divergence(const Vector &mu, const Vector &logvar) {
    // expm1(v) - v >= 0 holds in floating point too, so no term can go negative
    return 0.5 * (mu.array().square() + logvar.array().expm1() - logvar.array()).sum();
}

Forward forward(const VaeParams &params, const Batch &batch, double beta) {
    Forward fw;
    const auto B = static_cast<Eigen::Index>(batch.size());
    const auto M = static_cast<Eigen::Index>(params.latent_dim());
    const std::size_t P = params.window_rows();
    const bool attend = !batch.neighbors.empty();
    if (B == 0) throw DataError("empty batch");
    if (params.variant == Variant::w && !attend) throw DataError("the w variant needs neighbour rows in every batch");
    if (attend && batch.neighbors.size() != batch.size() * P) throw DataError("batch neighbour table has wrong size");
    if (batch.noise.rows() != B || batch.noise.cols() != M) throw DataError("batch noise has wrong shape");
    if (static_cast<std::size_t>(batch.trajectories.cols()) != params.trajectory_length()) {
        throw DataError("trajectory length does not match the network input");
    }

    mlp_forward(params.enc2, batch.trajectories, true, fw.enc2_act);
    const Matrix &h2 = fw.enc2_act.back();

    fw.pre_latent.resize(B, M);
    if (attend) {
        mlp_forward(params.enc1, batch.trajectories, true, fw.enc1_act);
        const Matrix &h1 = fw.enc1_act.back();
        fw.norms = h1.rowwise().norm();
        fw.unit = h1;
        for (Eigen::Index u = 0; u < h1.rows(); ++u) fw.unit.row(u) /= fw.norms[u] + kNormEpsilon;

        const auto Pi = static_cast<Eigen::Index>(P);
        fw.similarity.resize(B, Pi);
        fw.attention.resize(B, Pi);
        fw.context = Matrix::Zero(B, M);
        for (Eigen::Index k = 0; k < B; ++k) {
            const auto f = static_cast<Eigen::Index>(batch.focal[static_cast<std::size_t>(k)]);
            const std::size_t *nb = batch.neighbors.data() + static_cast<std::size_t>(k) * P;
            for (Eigen::Index j = 0; j < Pi; ++j) {
                fw.similarity(k, j) = fw.unit.row(f).dot(fw.unit.row(static_cast<Eigen::Index>(nb[j])));
            }
            const double top = fw.similarity.row(k).maxCoeff();
            fw.attention.row(k) = (fw.similarity.row(k).array() - top).exp().matrix();
            fw.attention.row(k) /= fw.attention.row(k).sum();
            for (Eigen::Index j = 0; j < Pi; ++j) {
                fw.context.row(k) += fw.attention(k, j) * h2.row(static_cast<Eigen::Index>(nb[j]));
            }
        }
    }
    for (Eigen::Index k = 0; k < B; ++k) {
        const auto f = static_cast<Eigen::Index>(batch.focal[static_cast<std::size_t>(k)]);
        if (params.variant == Variant::w) {
            fw.pre_latent.row(k) = params.combine[0] * h2.row(f) + params.combine[1] * fw.context.row(k);
        } else {
            fw.pre_latent.row(k) = h2.row(f);
        }
    }

    fw.mu = fw.pre_latent * params.mu_head.weight.transpose();
    fw.mu.rowwise() += params.mu_head.bias.transpose();
    fw.logvar_raw = fw.pre_latent * params.logvar_head.weight.transpose();
    fw.logvar_raw.rowwise() += params.logvar_head.bias.transpose();
    fw.logvar = fw.logvar_raw.cwiseMax(kLogvarMin).cwiseMin(kLogvarMax);
    fw.z = fw.mu + ((0.5 * fw.logvar.array()).exp() * batch.noise.array()).matrix();

    mlp_forward(params.dec, fw.z, false, fw.dec_act);
    fw.prediction.resize(B);
    double recon = 0.0, kld = 0.0;
    for (Eigen::Index k = 0; k < B; ++k) {
        fw.prediction[k] = sigmoid(fw.dec_act.back()(k, 0));
        const double err = batch.targets[k] - fw.prediction[k];
        recon += err * err;
        kld += kl_divergence(fw.mu.row(k).transpose(), fw.logvar.row(k).transpose());
    }
    fw.loss.recon = recon / static_cast<double>(B);
    fw.loss.kld = kld / static_cast<double>(B);
    fw.loss.total = fw.loss.recon + beta * fw.loss.kld;
    return fw;
}

void backward(const VaeParams &params, const Batch &batch, const Forward &fw, double beta, VaeParams &grad) {
    const auto B = static_cast<Eigen::Index>(batch.size());
    const auto M = static_cast<Eigen::Index>(params.latent_dim());
    const std::size_t P = params.window_rows();
    const bool attend = !batch.neighbors.empty();
    const double inv_b = 1.0 / static_cast<double>(B);

    // decoder: d/dlogit of (t - sigmoid)^2 / B
    Matrix d_out(B, 1);
    for (Eigen::Index k = 0; k < B; ++k) {
        const double p = fw.prediction[k];
        d_out(k, 0) = 2.0 * (p - batch.targets[k]) * inv_b * p * (1.0 - p);
    }
    Matrix dz = mlp_backward(params.dec, fw.dec_act, std::move(d_out), false, grad.dec, true);

    // reparameterisation and KL term
    const Matrix sigma = (0.5 * fw.logvar.array()).exp().matrix();
    Matrix dmu = dz + (beta * inv_b) * fw.mu;
    Matrix dlogvar = (dz.array() * batch.noise.array() * 0.5 * sigma.array()).matrix() +
        ((beta * inv_b * 0.5) * (fw.logvar.array().exp() - 1.0)).matrix();
    for (Eigen::Index i = 0; i < dlogvar.size(); ++i) {
        const double raw = fw.logvar_raw.data()[i];
        if (raw < kLogvarMin || raw > kLogvarMax) dlogvar.data()[i] = 0.0;
    }
    grad.mu_head.weight.noalias() += dmu.transpose() * fw.pre_latent;
    grad.mu_head.bias += dmu.colwise().sum().transpose();
    grad.logvar_head.weight.noalias() += dlogvar.transpose() * fw.pre_latent;
    grad.logvar_head.bias += dlogvar.colwise().sum().transpose();
    Matrix dpre = dmu * params.mu_head.weight + dlogvar * params.logvar_head.weight;

    const Matrix &h2 = fw.enc2_act.back();
    Matrix dh2 = Matrix::Zero(h2.rows(), M);
    Matrix dunit;
    if (attend) dunit = Matrix::Zero(h2.rows(), M);
    std::vector<double> da(P);
    for (Eigen::Index k = 0; k < B; ++k) {
        const auto f = static_cast<Eigen::Index>(batch.focal[static_cast<std::size_t>(k)]);
        if (params.variant == Variant::no_w) {
            dh2.row(f) += dpre.row(k);
            continue;
        }
        const std::size_t *nb = batch.neighbors.data() + static_cast<std::size_t>(k) * P;
        const double lf = params.combine[0];
        const double ln = params.combine[1];
        dh2.row(f) += lf * dpre.row(k);
        grad.combine[0] += dpre.row(k).dot(h2.row(f));
        grad.combine[1] += dpre.row(k).dot(fw.context.row(k));
        const Eigen::RowVectorXd dctx = ln * dpre.row(k);
        double weighted = 0.0;
        for (std::size_t j = 0; j < P; ++j) {
            const auto n = static_cast<Eigen::Index>(nb[j]);
            const double a = fw.attention(k, static_cast<Eigen::Index>(j));
            dh2.row(n) += a * dctx;
            da[j] = dctx.dot(h2.row(n));
            weighted += a * da[j];
        }
        for (std::size_t j = 0; j < P; ++j) {
            const auto n = static_cast<Eigen::Index>(nb[j]);
            const double ds = fw.attention(k, static_cast<Eigen::Index>(j)) * (da[j] - weighted);
            dunit.row(f) += ds * fw.unit.row(n);
            dunit.row(n) += ds * fw.unit.row(f);
        }
    }

    mlp_backward(params.enc2, fw.enc2_act, std::move(dh2), true, grad.enc2, false);

    if (attend && params.variant == Variant::w) {
        const Matrix &h1 = fw.enc1_act.back();
        Matrix dh1(h1.rows(), M);
        for (Eigen::Index u = 0; u < h1.rows(); ++u) {
            const double n = fw.norms[u];
            const double d = n + kNormEpsilon;
            dh1.row(u) = dunit.row(u) / d;
            if (n > 0.0) dh1.row(u) -= h1.row(u) * (h1.row(u).dot(dunit.row(u)) / (n * d * d));
        }
        mlp_backward(params.enc1, fw.enc1_act, std::move(dh1), true, grad.enc1, false);
    }
}

LossParts loss_and_gradients(const VaeParams &params, const Batch &batch, double beta, VaeParams &grad) {
    Forward fw = forward(params, batch, beta);
    backward(params, batch, fw, beta, grad);
    return fw.loss;
}

Encoding encode(const WindowSample &sample, const VaeParams &params) {
    Matrix noise = Matrix::Zero(1, static_cast<Eigen::Index>(params.latent_dim()));
    std::vector<WindowSample> one{sample};
    if (static_cast<std::size_t>(sample.neighbors.rows()) != params.window_rows()) {
        throw DataError("encode: window has " + std::to_string(sample.neighbors.rows()) + " rows, network expects " +
            std::to_string(params.window_rows()));
    }
    Batch batch = make_batch(one, noise);
    Forward fw = forward(params, batch, 0.0);
    return {fw.mu.row(0).transpose(), fw.logvar.row(0).transpose(), fw.attention.row(0).transpose(),
        fw.similarity.row(0).transpose()};
}

Vector reparameterize(const Vector &mu, const Vector &logvar, Rng &rng, bool deterministic) {
    if (deterministic) return mu;
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector z(mu.size());
    for (Eigen::Index m = 0; m < mu.size(); ++m) z[m] = mu[m] + std::exp(0.5 * logvar[m]) * normal(rng);
    return z;
}

double decode(const Vector &z, const VaeParams &params) {
    std::vector<Matrix> acts;
    mlp_forward(params.dec, z.transpose(), false, acts);
    return sigmoid(acts.back()(0, 0));
}

LossParts loss(std::span<const WindowSample> samples, const VaeParams &params, double beta, Rng &rng) {
    if (samples.empty()) throw DataError("loss: empty batch");
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix noise(static_cast<Eigen::Index>(samples.size()), static_cast<Eigen::Index>(params.latent_dim()));
    for (Eigen::Index i = 0; i < noise.size(); ++i) noise.data()[i] = normal(rng);
    return forward(params, make_batch(samples, noise), beta).loss;
}

// ---------------------------------------------------------------------------
// Weight file
//
//   bytes 0-7    magic "EVOFVAE\0"
//   u32          format version (1)
//   u32          variant (0 = w, 1 = no_w)
//   u32          half window w
//   u32 x 3      layer counts of enc1, enc2, dec
//   u32          block count K
//   K x (u32 rows, u32 cols)
//   float64 data of every block, row-major, in the order of the shape table
//
// All integers and floats little-endian.

namespace {

constexpr char kMagic[8] = {'E', 'V', 'O', 'F', 'V', 'A', 'E', '\0'};
constexpr std::uint32_t kVersion = 1;

void put_u64(std::string &out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out += static_cast<char>((v >> (8 * i)) & 0xff);
}
void put_u32(std::string &out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out += static_cast<char>((v >> (8 * i)) & 0xff);
}

class Reader {
  public:
    explicit Reader(std::string_view bytes) : bytes_(bytes) {}

    std::uint64_t u(int width) {
        if (pos_ + static_cast<std::size_t>(width) > bytes_.size()) throw DataError("weight file truncated");
        std::uint64_t v = 0;
        for (int i = 0; i < width; ++i) {
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + static_cast<std::size_t>(i)])) << (8 * i);
        }
        pos_ += static_cast<std::size_t>(width);
        return v;
    }
    std::uint32_t u32() { return static_cast<std::uint32_t>(u(4)); }
    double f64() { return std::bit_cast<double>(u(8)); }
    std::string_view take(std::size_t n) {
        if (pos_ + n > bytes_.size()) throw DataError("weight file truncated");
        auto s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == bytes_.size(); }

  private:
    std::string_view bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::string serialize(const VaeParams &params) {
    std::string out(kMagic, sizeof kMagic);
    put_u32(out, kVersion);
    put_u32(out, params.variant == Variant::w ? 0u : 1u);
    put_u32(out, static_cast<std::uint32_t>(params.half_window));
    put_u32(out, static_cast<std::uint32_t>(params.enc1.layers.size()));
    put_u32(out, static_cast<std::uint32_t>(params.enc2.layers.size()));
    put_u32(out, static_cast<std::uint32_t>(params.dec.layers.size()));
    auto shapes = params.shapes();
    put_u32(out, static_cast<std::uint32_t>(shapes.size()));
    for (auto [r, c] : shapes) {
        put_u32(out, static_cast<std::uint32_t>(r));
        put_u32(out, static_cast<std::uint32_t>(c));
    }
    for (auto block : params.blocks()) {
        for (double v : block) put_u64(out, std::bit_cast<std::uint64_t>(v));
    }
    return out;
}

VaeParams deserialize(std::string_view bytes) {
    Reader in(bytes);
    if (in.take(sizeof kMagic) != std::string_view(kMagic, sizeof kMagic)) throw DataError("not a weight file (bad magic)");
    const auto version = in.u32();
    if (version != kVersion) throw DataError("unsupported weight file version " + std::to_string(version));
    const auto variant = in.u32();
    if (variant > 1) throw DataError("unknown variant tag in weight file");
    VaeParams p;
    p.variant = variant == 0 ? Variant::w : Variant::no_w;
    p.half_window = in.u32();
    const std::uint32_t counts[3] = {in.u32(), in.u32(), in.u32()};
    const auto blocks = in.u32();
    if (blocks != 2 * (counts[0] + counts[1] + counts[2]) + 5) throw DataError("weight file block count mismatch");
    std::vector<std::pair<std::uint32_t, std::uint32_t>> shapes(blocks);
    for (auto &s : shapes) {
        s.first = in.u32();
        s.second = in.u32();
    }
    std::size_t next = 0;
    auto dense = [&] {
        auto [r, c] = shapes[next];
        auto [br, bc] = shapes[next + 1];
        if (br != r || bc != 1) throw DataError("weight file: bias shape does not match weight");
        next += 2;
        return Dense{Matrix(r, c), Vector(r)};
    };
    auto mlp = [&](std::uint32_t n) {
        Mlp m;
        for (std::uint32_t l = 0; l < n; ++l) m.layers.push_back(dense());
        return m;
    };
    p.enc1 = mlp(counts[0]);
    p.enc2 = mlp(counts[1]);
    if (shapes[next] != std::pair<std::uint32_t, std::uint32_t>{2, 1}) throw DataError("weight file: bad combine block");
    p.combine = Vector(2);
    ++next;
    p.mu_head = dense();
    p.logvar_head = dense();
    p.dec = mlp(counts[2]);
    for (auto block : p.blocks()) {
        for (double &v : block) v = in.f64();
    }
    if (!in.done()) throw DataError("weight file has trailing bytes");
    return p;
}

void save_params(const VaeParams &params, const std::filesystem::path &path) {
    detail::write_file(path, serialize(params));
}

VaeParams load_params(const std::filesystem::path &path) { return deserialize(detail::read_file(path)); }

}  // namespace evo::vae
