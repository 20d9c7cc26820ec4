#include "lanedrop/nn.hpp"

#include <algorithm>
#include <cmath>

namespace lanedrop {

namespace {

Matrix glorot(std::size_t in, std::size_t out, std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Matrix w(in, out);
    for (auto& x : w.data()) {
        x = dist(rng);
    }
    return w;
}

void apply_relu(Matrix& m) {
    for (auto& x : m.data()) {
        x = x > 0.0 ? x : 0.0;
    }
}

// relu'(0) = 0
Matrix relu_mask(const Matrix& upstream, const Matrix& pre) {
    Matrix out = upstream;
    auto o = out.data();
    auto p = pre.data();
    for (std::size_t i = 0; i < o.size(); ++i) {
        if (!(p[i] > 0.0)) {
            o[i] = 0.0;
        }
    }
    return out;
}

void check_pair(std::span<const ParamRef> a, std::span<const ConstParamRef> b, const char* op) {
    if (a.size() != b.size()) {
        throw ShapeError(std::string(op) + ": parameter list length mismatch");
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!a[i].value->same_shape(*b[i].value)) {
            throw ShapeError(std::string(op) + ": shape mismatch for tensor '" + a[i].name + "'");
        }
    }
}

} // namespace

DenseLayer DenseLayer::init(std::size_t in, std::size_t out, Activation act, std::mt19937_64& rng) {
    return {glorot(in, out, rng), Matrix(1, out), act};
}

DenseLayer DenseLayer::zeros(std::size_t in, std::size_t out, Activation act) {
    return {Matrix(in, out), Matrix(1, out), act};
}

GraphConvLayer GraphConvLayer::init(std::size_t in, std::size_t out, std::mt19937_64& rng) {
    return {glorot(in, out, rng), Matrix(1, out)};
}

GraphConvLayer GraphConvLayer::zeros(std::size_t in, std::size_t out) {
    return {Matrix(in, out), Matrix(1, out)};
}

Matrix dense_forward(const Matrix& x, const DenseLayer& layer) {
    if (x.cols() != layer.in_dim()) {
        throw ShapeError("dense_forward: input has " + std::to_string(x.cols()) + " columns, layer expects " +
                         std::to_string(layer.in_dim()));
    }
    Matrix y = matmul(x, layer.weights);
    add_row_broadcast(y, layer.bias);
    if (layer.activation == Activation::relu) {
        apply_relu(y);
    }
    return y;
}

Matrix dense_forward(const Matrix& x, const DenseLayer& layer, DenseCache& cache) {
    if (x.cols() != layer.in_dim()) {
        throw ShapeError("dense_forward: input has " + std::to_string(x.cols()) + " columns, layer expects " +
                         std::to_string(layer.in_dim()));
    }
    cache.input = x;
    cache.pre_activation = matmul(x, layer.weights);
    add_row_broadcast(cache.pre_activation, layer.bias);
    cache.filled = true;
    Matrix y = cache.pre_activation;
    if (layer.activation == Activation::relu) {
        apply_relu(y);
    }
    return y;
}

Matrix dense_backward(const DenseLayer& layer, const DenseCache& cache, const Matrix& upstream,
                      DenseLayer* grad) {
    if (!cache.filled) {
        throw std::logic_error("dense_backward: no cached forward pass");
    }
    if (upstream.rows() != cache.pre_activation.rows() || upstream.cols() != layer.out_dim()) {
        throw ShapeError("dense_backward: upstream gradient shape mismatch");
    }
    const Matrix d_pre =
        layer.activation == Activation::relu ? relu_mask(upstream, cache.pre_activation) : upstream;
    if (grad != nullptr) {
        grad->weights += matmul_tn(cache.input, d_pre);
        grad->bias += column_sums(d_pre);
    }
    return matmul_nt(d_pre, layer.weights);
}

Matrix graphconv_forward(const Matrix& h, const Matrix& adjacency, const GraphConvLayer& layer) {
    GraphConvCache scratch;
    return graphconv_forward(h, adjacency, layer, scratch);
}

Matrix graphconv_forward(const Matrix& h, const Matrix& adjacency, const GraphConvLayer& layer,
                         GraphConvCache& cache) {
    if (adjacency.rows() != adjacency.cols() || adjacency.cols() != h.rows()) {
        throw ShapeError("graphconv_forward: adjacency does not match node count");
    }
    if (h.cols() != layer.in_dim()) {
        throw ShapeError("graphconv_forward: feature width " + std::to_string(h.cols()) +
                         " does not match layer input " + std::to_string(layer.in_dim()));
    }
    cache.adjacency = adjacency;
    cache.propagated = matmul(adjacency, h);
    cache.pre_activation = matmul(cache.propagated, layer.weights);
    add_row_broadcast(cache.pre_activation, layer.bias);
    cache.filled = true;
    Matrix z = cache.pre_activation;
    apply_relu(z);
    return z;
}

Matrix graphconv_backward(const GraphConvLayer& layer, const GraphConvCache& cache, const Matrix& upstream,
                          GraphConvLayer* grad) {
    if (!cache.filled) {
        throw std::logic_error("graphconv_backward: no cached forward pass");
    }
    if (upstream.rows() != cache.pre_activation.rows() || upstream.cols() != layer.out_dim()) {
        throw ShapeError("graphconv_backward: upstream gradient shape mismatch");
    }
    const Matrix d_pre = relu_mask(upstream, cache.pre_activation);
    if (grad != nullptr) {
        grad->weights += matmul_tn(cache.propagated, d_pre);
        grad->bias += column_sums(d_pre);
    }
    const Matrix d_propagated = matmul_nt(d_pre, layer.weights);
    return matmul_tn(cache.adjacency, d_propagated);
}

AdamState AdamState::for_params(std::span<const ParamRef> params) {
    AdamState state;
    for (const auto& p : params) {
        state.first_moment.emplace_back(p.value->rows(), p.value->cols());
        state.second_moment.emplace_back(p.value->rows(), p.value->cols());
    }
    return state;
}

void adam_step(std::span<const ParamRef> params, std::span<const ConstParamRef> grads, AdamState& state,
               double lr) {
    check_pair(params, grads, "adam_step");
    if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size()) {
        throw ShapeError("adam_step: optimizer state does not match parameter list");
    }
    ++state.step_count;
    const double t = static_cast<double>(state.step_count);
    const double correction1 = 1.0 - std::pow(state.beta1, t);
    const double correction2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto w = params[k].value->data();
        auto g = grads[k].value->data();
        auto m = state.first_moment[k].data();
        auto v = state.second_moment[k].data();
        if (m.size() != w.size()) {
            throw ShapeError("adam_step: moment shape mismatch for tensor '" + params[k].name + "'");
        }
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
            const double m_hat = m[i] / correction1;
            const double v_hat = v[i] / correction2;
            w[i] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
        }
    }
}

double finite_diff_check(const std::function<double()>& loss, std::span<const ParamRef> params,
                         std::span<const ConstParamRef> analytic, double step) {
    check_pair(params, analytic, "finite_diff_check");
    double worst = 0.0;
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto w = params[k].value->data();
        auto g = analytic[k].value->data();
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double saved = w[i];
            w[i] = saved + step;
            const double up = loss();
            w[i] = saved - step;
            const double down = loss();
            w[i] = saved;
            const double numeric = (up - down) / (2.0 * step);
            const double err = std::abs(g[i] - numeric) / std::max(1e-8, std::abs(g[i]) + std::abs(numeric));
            worst = std::max(worst, err);
        }
    }
    return worst;
}

void soft_update(std::span<const ParamRef> target, std::span<const ConstParamRef> source, double tau) {
    check_pair(target, source, "soft_update");
    for (std::size_t k = 0; k < target.size(); ++k) {
        auto t = target[k].value->data();
        auto s = source[k].value->data();
        for (std::size_t i = 0; i < t.size(); ++i) {
            t[i] = tau * s[i] + (1.0 - tau) * t[i];
        }
    }
}

std::vector<ConstParamRef> to_const_refs(std::span<const ParamRef> params) {
    std::vector<ConstParamRef> out;
    out.reserve(params.size());
    for (const auto& p : params) {
        out.push_back({p.name, p.value});
    }
    return out;
}

} // namespace lanedrop
