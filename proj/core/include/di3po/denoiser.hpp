#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "di3po/diffusion.hpp"
#include "di3po/grid.hpp"

namespace di3po {

/// Flat parameter-space vector aligned with Denoiser::param_count() and the
/// layout documented on DenoiserShape.
using GradientVector = std::vector<double>;

enum class Padding { Zero, Periodic };

/// Hyperparameters of the toy denoiser. The flat parameter layout is:
///   [0]                conv1 weights, hidden x 9, kernel row-major
///   [+H*9]             conv1 biases, hidden
///   [+H]               timestep embedding, one scalar per timestep
///   [+T]               condition embedding, (vocab + 1) x hidden
///                      (row `vocab` is the null / unconditional token)
///   [+(V+1)*H]         conv2 weights, hidden x 9
///   [+H*9]             conv2 bias, 1
struct DenoiserShape {
    int width = 16;
    int height = 16;
    int hidden = 8;
    int num_timesteps = 100;
    int vocab = 4;
    Padding padding = Padding::Zero;

    size_t param_count() const {
        return static_cast<size_t>(hidden) * 9 + hidden + num_timesteps + static_cast<size_t>(vocab + 1) * hidden +
               static_cast<size_t>(hidden) * 9 + 1;
    }
    bool operator==(const DenoiserShape&) const = default;
};

/// Two stacked 3x3 convolutions with a tanh in between; per-timestep scalar
/// and per-token vector embeddings added to the hidden pre-activations.
/// Receptive field of any output pixel is the 5x5 neighborhood of its input
/// pixel (truncated at borders under zero padding).
class Denoiser {
public:
    explicit Denoiser(const DenoiserShape& shape);
    Denoiser(const DenoiserShape& shape, std::vector<double> params);

    /// Uniform init in [-s, s], s = 1/sqrt(fan-in), deterministic per seed.
    static Denoiser random_init(const DenoiserShape& shape, uint64_t seed);

    const DenoiserShape& shape() const { return shape_; }
    size_t param_count() const { return params_.size(); }
    const std::vector<double>& params() const { return params_; }
    std::vector<double>& params() { return params_; }

    Grid predict_eps(const Grid& x_t, int t, const Condition& c) const;

    /// DDPM loss (sum of squares) and its analytic parameter gradient.
    std::pair<double, GradientVector> loss_grad(const Grid& x0, int t, const Grid& eps, const Condition& c,
                                                const NoiseSchedule& schedule) const;

    /// Gradient of ||eps - predict_eps(x_t, t, c)||^2 taken directly at x_t.
    GradientVector residual_grad(const Grid& x_t, int t, const Grid& eps, const Condition& c) const;

    /// Gradient contribution of the single-pixel squared residual at p.
    /// Summing over all pixels reproduces residual_grad by linearity.
    GradientVector per_pixel_grad_contribution(const Grid& x_t, int t, const Grid& eps, const Condition& c,
                                               Pixel p) const;

    /// Gradient contribution of the squared residuals of a pixel subset
    /// (include[i] != 0). Equals the sum of per-pixel contributions.
    GradientVector masked_grad_contribution(const Grid& x_t, int t, const Grid& eps, const Condition& c,
                                            const std::vector<uint8_t>& include) const;

    /// Chebyshev radius of the receptive field (two 3x3 convs).
    static constexpr int receptive_radius = 2;

    void save_checkpoint(const std::string& path) const;
    static Denoiser load_checkpoint(const std::string& path);

private:
    DenoiserShape shape_;
    std::vector<double> params_;

    // Layout offsets.
    size_t off_w1() const { return 0; }
    size_t off_b1() const { return static_cast<size_t>(shape_.hidden) * 9; }
    size_t off_temb() const { return off_b1() + shape_.hidden; }
    size_t off_cemb() const { return off_temb() + shape_.num_timesteps; }
    size_t off_w2() const { return off_cemb() + static_cast<size_t>(shape_.vocab + 1) * shape_.hidden; }
    size_t off_b2() const { return off_w2() + static_cast<size_t>(shape_.hidden) * 9; }

    int token_row(const Condition& c) const;
    void forward(const Grid& x_t, int t, const Condition& c, std::vector<double>& hidden_act, Grid& out) const;
    GradientVector backward(const Grid& x_t, int t, const Condition& c, const std::vector<double>& hidden_act,
                            const Grid& out_grad) const;
};

}  // namespace di3po
