#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "lanedrop/tensor.hpp"

namespace lanedrop {

enum class Activation { relu, linear };

/// A named view of one parameter tensor. Parameter containers expose their
/// tensors as a list of these, always in the same order.
struct ParamRef {
    std::string name;
    Matrix* value;
};

struct ConstParamRef {
    std::string name;
    const Matrix* value;
};

/// Fully-connected layer: activation(x * weights + bias).
struct DenseLayer {
    Matrix weights; // in x out
    Matrix bias;    // 1 x out
    Activation activation = Activation::linear;

    std::size_t in_dim() const noexcept { return weights.rows(); }
    std::size_t out_dim() const noexcept { return weights.cols(); }

    /// Glorot-uniform weights, zero bias.
    static DenseLayer init(std::size_t in, std::size_t out, Activation act, std::mt19937_64& rng);
    static DenseLayer zeros(std::size_t in, std::size_t out, Activation act);
};

/// Graph convolution relu(S * H * weights + bias) with S the normalized adjacency.
struct GraphConvLayer {
    Matrix weights; // d_in x d_out
    Matrix bias;    // 1 x d_out

    std::size_t in_dim() const noexcept { return weights.rows(); }
    std::size_t out_dim() const noexcept { return weights.cols(); }

    static GraphConvLayer init(std::size_t in, std::size_t out, std::mt19937_64& rng);
    static GraphConvLayer zeros(std::size_t in, std::size_t out);
};

struct DenseCache {
    Matrix input;
    Matrix pre_activation;
    bool filled = false;
};

struct GraphConvCache {
    Matrix adjacency;
    Matrix propagated; // S * H
    Matrix pre_activation;
    bool filled = false;
};

Matrix dense_forward(const Matrix& x, const DenseLayer& layer);
Matrix dense_forward(const Matrix& x, const DenseLayer& layer, DenseCache& cache);

/// Accumulates parameter gradients into `grad` and returns d(loss)/d(input).
Matrix dense_backward(const DenseLayer& layer, const DenseCache& cache, const Matrix& upstream,
                      DenseLayer* grad);

Matrix graphconv_forward(const Matrix& h, const Matrix& adjacency, const GraphConvLayer& layer);
Matrix graphconv_forward(const Matrix& h, const Matrix& adjacency, const GraphConvLayer& layer,
                         GraphConvCache& cache);

Matrix graphconv_backward(const GraphConvLayer& layer, const GraphConvCache& cache, const Matrix& upstream,
                          GraphConvLayer* grad);

struct AdamState {
    std::vector<Matrix> first_moment;
    std::vector<Matrix> second_moment;
    std::int64_t step_count = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    static AdamState for_params(std::span<const ParamRef> params);
};

/// One bias-corrected Adam step (gradient descent on the loss).
void adam_step(std::span<const ParamRef> params, std::span<const ConstParamRef> grads, AdamState& state,
               double lr);

/// Central-difference gradient check. Perturbs every entry of every tensor
/// in `params` by +-step, evaluates `loss`, and returns the worst relative
/// error |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
double finite_diff_check(const std::function<double()>& loss, std::span<const ParamRef> params,
                         std::span<const ConstParamRef> analytic, double step = 1e-5);

/// In-place target <- tau * source + (1 - tau) * target for every tensor.
void soft_update(std::span<const ParamRef> target, std::span<const ConstParamRef> source, double tau);

std::vector<ConstParamRef> to_const_refs(std::span<const ParamRef> params);

} // namespace lanedrop
