#include "di3po/denoiser.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>

#include <json.hpp>

namespace di3po {

namespace {
constexpr int kKernelDx[9] = {-1, 0, 1, -1, 0, 1, -1, 0, 1};
constexpr int kKernelDy[9] = {-1, -1, -1, 0, 0, 0, 1, 1, 1};
}  // namespace

Denoiser::Denoiser(const DenoiserShape& shape) : shape_(shape), params_(shape.param_count(), 0.0) {}

Denoiser::Denoiser(const DenoiserShape& shape, std::vector<double> params) : shape_(shape), params_(std::move(params)) {
    if (params_.size() != shape_.param_count()) throw std::invalid_argument("parameter vector length mismatch");
}

Denoiser Denoiser::random_init(const DenoiserShape& shape, uint64_t seed) {
    Denoiser m(shape);
    std::mt19937_64 eng(seed);
    // Fan-in: 9 inputs for conv weights, 1 for biases and embeddings.
    auto fill = [&](size_t off, size_t n, double fan_in) {
        double s = 1.0 / std::sqrt(fan_in);
        std::uniform_real_distribution<double> u(-s, s);
        for (size_t i = 0; i < n; ++i) m.params_[off + i] = u(eng);
    };
    size_t h = shape.hidden;
    fill(m.off_w1(), h * 9, 9.0);
    fill(m.off_b1(), h, 1.0);
    fill(m.off_temb(), shape.num_timesteps, 1.0);
    fill(m.off_cemb(), static_cast<size_t>(shape.vocab + 1) * h, 1.0);
    fill(m.off_w2(), h * 9, 9.0 * static_cast<double>(h));
    fill(m.off_b2(), 1, 1.0);
    return m;
}

int Denoiser::token_row(const Condition& c) const {
    if (c.is_null) return shape_.vocab;
    if (c.token < 0 || c.token >= shape_.vocab) throw std::invalid_argument("condition token out of vocabulary");
    return c.token;
}

void Denoiser::forward(const Grid& x_t, int t, const Condition& c, std::vector<double>& hidden_act, Grid& out) const {
    if (x_t.width != shape_.width || x_t.height != shape_.height)
        throw std::invalid_argument("shape mismatch in predict_eps");
    if (t < 1 || t > shape_.num_timesteps) throw std::invalid_argument("timestep out of range");

    const int W = shape_.width, H = shape_.height, HC = shape_.hidden;
    const size_t N = static_cast<size_t>(W) * H;
    const double* w1 = params_.data() + off_w1();
    const double* b1 = params_.data() + off_b1();
    const double temb = params_[off_temb() + (t - 1)];
    const double* cemb = params_.data() + off_cemb() + static_cast<size_t>(token_row(c)) * HC;
    const double* w2 = params_.data() + off_w2();
    const double b2 = params_[off_b2()];
    const bool periodic = shape_.padding == Padding::Periodic;

    auto sample = [&](const double* buf, int x, int y) -> double {
        if (periodic) {
            x = (x % W + W) % W;
            y = (y % H + H) % H;
        } else if (x < 0 || x >= W || y < 0 || y >= H) {
            return 0.0;
        }
        return buf[static_cast<size_t>(y) * W + x];
    };

    hidden_act.assign(static_cast<size_t>(HC) * N, 0.0);
    for (int ch = 0; ch < HC; ++ch) {
        const double* wk = w1 + static_cast<size_t>(ch) * 9;
        const double bias = b1[ch] + temb + cemb[ch];
        double* act = hidden_act.data() + static_cast<size_t>(ch) * N;
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                double z = bias;
                for (int k = 0; k < 9; ++k) z += wk[k] * sample(x_t.values.data(), x + kKernelDx[k], y + kKernelDy[k]);
                act[static_cast<size_t>(y) * W + x] = std::tanh(z);
            }
    }

    out = Grid(W, H);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            double o = b2;
            for (int ch = 0; ch < HC; ++ch) {
                const double* wk = w2 + static_cast<size_t>(ch) * 9;
                const double* act = hidden_act.data() + static_cast<size_t>(ch) * N;
                for (int k = 0; k < 9; ++k) o += wk[k] * sample(act, x + kKernelDx[k], y + kKernelDy[k]);
            }
            out.at(x, y) = o;
        }
}

Grid Denoiser::predict_eps(const Grid& x_t, int t, const Condition& c) const {
    std::vector<double> act;
    Grid out;
    forward(x_t, t, c, act, out);
    return out;
}

GradientVector Denoiser::backward(const Grid& x_t, int t, const Condition& c, const std::vector<double>& hidden_act,
                                  const Grid& out_grad) const {
    const int W = shape_.width, H = shape_.height, HC = shape_.hidden;
    const size_t N = static_cast<size_t>(W) * H;
    const double* w2 = params_.data() + off_w2();
    const bool periodic = shape_.padding == Padding::Periodic;

    GradientVector grad(params_.size(), 0.0);
    double* gw1 = grad.data() + off_w1();
    double* gb1 = grad.data() + off_b1();
    double* gtemb = grad.data() + off_temb() + (t - 1);
    double* gcemb = grad.data() + off_cemb() + static_cast<size_t>(token_row(c)) * HC;
    double* gw2 = grad.data() + off_w2();
    double* gb2 = grad.data() + off_b2();

    auto wrap = [&](int v, int n) { return (v % n + n) % n; };

    // Output layer and hidden-activation gradients.
    std::vector<double> g_act(static_cast<size_t>(HC) * N, 0.0);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            double g = out_grad.at(x, y);
            if (g == 0.0) continue;
            *gb2 += g;
            for (int ch = 0; ch < HC; ++ch) {
                const double* act = hidden_act.data() + static_cast<size_t>(ch) * N;
                double* gact = g_act.data() + static_cast<size_t>(ch) * N;
                const double* wk = w2 + static_cast<size_t>(ch) * 9;
                for (int k = 0; k < 9; ++k) {
                    int nx = x + kKernelDx[k], ny = y + kKernelDy[k];
                    if (periodic) {
                        nx = wrap(nx, W);
                        ny = wrap(ny, H);
                    } else if (nx < 0 || nx >= W || ny < 0 || ny >= H) {
                        continue;
                    }
                    size_t ni = static_cast<size_t>(ny) * W + nx;
                    gw2[static_cast<size_t>(ch) * 9 + k] += g * act[ni];
                    gact[ni] += g * wk[k];
                }
            }
        }

    // Through tanh into first layer.
    for (int ch = 0; ch < HC; ++ch) {
        const double* act = hidden_act.data() + static_cast<size_t>(ch) * N;
        const double* gact = g_act.data() + static_cast<size_t>(ch) * N;
        double* gwk = gw1 + static_cast<size_t>(ch) * 9;
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                size_t i = static_cast<size_t>(y) * W + x;
                if (gact[i] == 0.0) continue;
                double gz = gact[i] * (1.0 - act[i] * act[i]);
                gb1[ch] += gz;
                *gtemb += gz;
                gcemb[ch] += gz;
                for (int k = 0; k < 9; ++k) {
                    int nx = x + kKernelDx[k], ny = y + kKernelDy[k];
                    if (periodic) {
                        nx = wrap(nx, W);
                        ny = wrap(ny, H);
                    } else if (nx < 0 || nx >= W || ny < 0 || ny >= H) {
                        continue;
                    }
                    gwk[k] += gz * x_t.values[static_cast<size_t>(ny) * W + nx];
                }
            }
    }
    return grad;
}

GradientVector Denoiser::residual_grad(const Grid& x_t, int t, const Grid& eps, const Condition& c) const {
    require_same_shape(x_t, eps, "residual_grad");
    std::vector<double> act;
    Grid out;
    forward(x_t, t, c, act, out);
    Grid out_grad(x_t.width, x_t.height);
    for (size_t i = 0; i < out.size(); ++i) out_grad.values[i] = -2.0 * (eps.values[i] - out.values[i]);
    return backward(x_t, t, c, act, out_grad);
}

std::pair<double, GradientVector> Denoiser::loss_grad(const Grid& x0, int t, const Grid& eps, const Condition& c,
                                                      const NoiseSchedule& schedule) const {
    NoisySample s = forward_noise(x0, t, eps, schedule);
    std::vector<double> act;
    Grid out;
    forward(s.x_t, t, c, act, out);
    double loss = 0.0;
    Grid out_grad(x0.width, x0.height);
    for (size_t i = 0; i < out.size(); ++i) {
        double r = eps.values[i] - out.values[i];
        loss += r * r;
        out_grad.values[i] = -2.0 * r;
    }
    return {loss, backward(s.x_t, t, c, act, out_grad)};
}

GradientVector Denoiser::per_pixel_grad_contribution(const Grid& x_t, int t, const Grid& eps, const Condition& c,
                                                     Pixel p) const {
    if (p.x < 0 || p.x >= x_t.width || p.y < 0 || p.y >= x_t.height)
        throw std::out_of_range("pixel outside image bounds");
    std::vector<uint8_t> include(x_t.size(), 0);
    include[static_cast<size_t>(p.y) * x_t.width + p.x] = 1;
    return masked_grad_contribution(x_t, t, eps, c, include);
}

GradientVector Denoiser::masked_grad_contribution(const Grid& x_t, int t, const Grid& eps, const Condition& c,
                                                  const std::vector<uint8_t>& include) const {
    require_same_shape(x_t, eps, "masked_grad_contribution");
    if (include.size() != x_t.size()) throw std::invalid_argument("mask size mismatch");
    std::vector<double> act;
    Grid out;
    forward(x_t, t, c, act, out);
    Grid out_grad(x_t.width, x_t.height);
    for (size_t i = 0; i < out.size(); ++i)
        out_grad.values[i] = include[i] ? -2.0 * (eps.values[i] - out.values[i]) : 0.0;
    return backward(x_t, t, c, act, out_grad);
}

// Checkpoint layout (little-endian): magic "D3PO", u32 version, six i32
// fields (width, height, hidden, num_timesteps, vocab, padding), u64
// parameter count, then raw IEEE-754 doubles. A JSON sidecar at
// `path + ".json"` records the same hyperparameters for inspection.
void Denoiser::save_checkpoint(const std::string& path) const {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    f.write("D3PO", 4);
    auto put_u32 = [&](uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); };
    auto put_i32 = [&](int32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); };
    put_u32(1);
    put_i32(shape_.width);
    put_i32(shape_.height);
    put_i32(shape_.hidden);
    put_i32(shape_.num_timesteps);
    put_i32(shape_.vocab);
    put_i32(shape_.padding == Padding::Periodic ? 1 : 0);
    uint64_t n = params_.size();
    f.write(reinterpret_cast<const char*>(&n), 8);
    f.write(reinterpret_cast<const char*>(params_.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!f) throw std::runtime_error("checkpoint write failed: " + path);
    f.close();

    nlohmann::ordered_json side;
    side["format"] = "di3po-checkpoint-v1";
    side["width"] = shape_.width;
    side["height"] = shape_.height;
    side["hidden"] = shape_.hidden;
    side["num_timesteps"] = shape_.num_timesteps;
    side["vocab"] = shape_.vocab;
    side["padding"] = shape_.padding == Padding::Periodic ? "periodic" : "zero";
    side["param_count"] = n;
    std::ofstream js(path + ".json", std::ios::trunc);
    js << side.dump(2) << "\n";
}

Denoiser Denoiser::load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, "D3PO", 4) != 0) throw std::runtime_error("bad checkpoint magic: " + path);
    auto get_u32 = [&] {
        uint32_t v;
        f.read(reinterpret_cast<char*>(&v), 4);
        return v;
    };
    auto get_i32 = [&] {
        int32_t v;
        f.read(reinterpret_cast<char*>(&v), 4);
        return v;
    };
    uint32_t version = get_u32();
    if (version != 1) throw std::runtime_error("unsupported checkpoint version");
    DenoiserShape shape;
    shape.width = get_i32();
    shape.height = get_i32();
    shape.hidden = get_i32();
    shape.num_timesteps = get_i32();
    shape.vocab = get_i32();
    shape.padding = get_i32() == 1 ? Padding::Periodic : Padding::Zero;
    uint64_t n;
    f.read(reinterpret_cast<char*>(&n), 8);
    if (!f || n != shape.param_count()) throw std::runtime_error("checkpoint parameter count mismatch");
    std::vector<double> params(n);
    f.read(reinterpret_cast<char*>(params.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!f) throw std::runtime_error("truncated checkpoint: " + path);
    return Denoiser(shape, std::move(params));
}

}  // namespace di3po
