#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "sentinel/categorical.hpp"

namespace sentinel {

/// MLP mapping a state vector to n_actions * n_atoms logits; softmax over
/// each action's block yields that action's categorical return distribution.
/// ReLU hidden layers, fan-in-scaled uniform init, zero biases.
class ValueNetwork {
public:
    struct Layer {
        Eigen::MatrixXd w;  // out x in
        Eigen::VectorXd b;
    };

    ValueNetwork(int state_dim, int n_actions, AtomSupport support, std::span<const int> hidden,
                 std::uint64_t seed)
        : state_dim_(state_dim), n_actions_(n_actions), support_(support) {
        if (state_dim < 1 || n_actions < 1)
            throw std::invalid_argument("ValueNetwork: bad dimensions");
        std::vector<int> widths;
        widths.push_back(state_dim);
        for (int h : hidden) {
            if (h < 1) throw std::invalid_argument("ValueNetwork: bad hidden width");
            widths.push_back(h);
        }
        widths.push_back(n_actions * support.n_atoms());

        std::mt19937_64 rng(seed);
        for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
            Layer layer;
            layer.w.resize(widths[l + 1], widths[l]);
            layer.b = Eigen::VectorXd::Zero(widths[l + 1]);
            const double bound = 1.0 / std::sqrt(static_cast<double>(widths[l]));
            std::uniform_real_distribution<double> unif(-bound, bound);
            for (Eigen::Index r = 0; r < layer.w.rows(); ++r)
                for (Eigen::Index c = 0; c < layer.w.cols(); ++c) layer.w(r, c) = unif(rng);
            layers_.push_back(std::move(layer));
        }
    }

    int state_dim() const { return state_dim_; }
    int n_actions() const { return n_actions_; }
    int n_atoms() const { return support_.n_atoms(); }
    const AtomSupport& support() const { return support_; }
    std::vector<Layer>& layers() { return layers_; }
    const std::vector<Layer>& layers() const { return layers_; }

    Eigen::VectorXd logits(const Eigen::VectorXd& state) const {
        if (state.size() != state_dim_)
            throw std::invalid_argument("ValueNetwork: state dimension mismatch");
        Eigen::VectorXd h = state;
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            h = (layers_[l].w * h + layers_[l].b).eval();
            if (l + 1 < layers_.size()) h = h.cwiseMax(0.0);
        }
        return h;
    }

    /// Masses for one action block, softmax with max subtraction.
    std::vector<double> action_masses(const Eigen::VectorXd& logit_vec, int action) const {
        const int n = n_atoms();
        const auto block = logit_vec.segment(static_cast<Eigen::Index>(action) * n, n);
        const double top = block.maxCoeff();
        std::vector<double> m(n);
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            m[i] = std::exp(block[i] - top);
            total += m[i];
        }
        for (int i = 0; i < n; ++i) m[i] /= total;
        return m;
    }

    std::vector<CategoricalReturnDistribution> forward(const Eigen::VectorXd& state) const {
        const Eigen::VectorXd l = logits(state);
        std::vector<CategoricalReturnDistribution> out;
        out.reserve(n_actions_);
        for (int a = 0; a < n_actions_; ++a) out.emplace_back(support_, action_masses(l, a));
        return out;
    }

    CategoricalReturnDistribution action_distribution(const Eigen::VectorXd& state,
                                                      int action) const {
        return {support_, action_masses(logits(state), action)};
    }

private:
    int state_dim_;
    int n_actions_;
    AtomSupport support_;
    std::vector<Layer> layers_;
};

/// Hard target sync: an exact parameter copy.
inline ValueNetwork sync_target(const ValueNetwork& net) { return net; }

struct TrainSample {
    Eigen::VectorXd state;
    int action;
    std::vector<double> target;  // masses on the network's support
};

struct AdamState {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::int64_t step = 0;
    std::vector<Eigen::MatrixXd> m_w, v_w;
    std::vector<Eigen::VectorXd> m_b, v_b;

    explicit AdamState(const ValueNetwork& net, double lr = 1e-3) : learning_rate(lr) {
        for (const auto& layer : net.layers()) {
            m_w.push_back(Eigen::MatrixXd::Zero(layer.w.rows(), layer.w.cols()));
            v_w.push_back(Eigen::MatrixXd::Zero(layer.w.rows(), layer.w.cols()));
            m_b.push_back(Eigen::VectorXd::Zero(layer.b.size()));
            v_b.push_back(Eigen::VectorXd::Zero(layer.b.size()));
        }
    }
};

struct NetworkGradients {
    std::vector<Eigen::MatrixXd> w;
    std::vector<Eigen::VectorXd> b;

    explicit NetworkGradients(const ValueNetwork& net) {
        for (const auto& layer : net.layers()) {
            w.push_back(Eigen::MatrixXd::Zero(layer.w.rows(), layer.w.cols()));
            b.push_back(Eigen::VectorXd::Zero(layer.b.size()));
        }
    }
};

/// Mean cross-entropy of the batch and its gradient w.r.t. all parameters.
/// Gradient of the loss w.r.t. an action block's logits is
/// (softmax - target) / batch_size; other blocks receive no gradient.
inline double compute_loss_and_gradients(const ValueNetwork& net,
                                         std::span<const TrainSample> batch,
                                         NetworkGradients& grads) {
    if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
    const auto& layers = net.layers();
    const std::size_t depth = layers.size();
    const int n = net.n_atoms();
    const double inv_batch = 1.0 / static_cast<double>(batch.size());

    double loss = 0.0;
    std::vector<Eigen::VectorXd> pre(depth);   // pre-activation per layer
    std::vector<Eigen::VectorXd> act(depth + 1);
    for (const TrainSample& sample : batch) {
        if (sample.state.size() != net.state_dim())
            throw std::invalid_argument("train_step: state dimension mismatch");
        if (static_cast<int>(sample.target.size()) != n)
            throw std::invalid_argument("train_step: target size mismatch");

        act[0] = sample.state;
        for (std::size_t l = 0; l < depth; ++l) {
            pre[l] = layers[l].w * act[l] + layers[l].b;
            act[l + 1] = (l + 1 < depth) ? pre[l].cwiseMax(0.0) : pre[l];
        }

        const Eigen::Index off = static_cast<Eigen::Index>(sample.action) * n;
        const auto block = act[depth].segment(off, n);
        const double top = block.maxCoeff();
        Eigen::VectorXd p(n);
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            p[i] = std::exp(block[i] - top);
            total += p[i];
        }
        p /= total;
        const double log_total = std::log(total);
        for (int i = 0; i < n; ++i)
            loss -= sample.target[i] * (block[i] - top - log_total) * inv_batch;

        Eigen::VectorXd dblock(n);
        for (int i = 0; i < n; ++i) dblock[i] = (p[i] - sample.target[i]) * inv_batch;

        // output layer: only the chosen action's rows carry gradient
        grads.w[depth - 1].middleRows(off, n).noalias() += dblock * act[depth - 1].transpose();
        grads.b[depth - 1].segment(off, n) += dblock;

        Eigen::VectorXd delta = layers[depth - 1].w.middleRows(off, n).transpose() * dblock;
        for (std::size_t l = depth - 1; l-- > 0;) {
            for (Eigen::Index i = 0; i < delta.size(); ++i)
                if (pre[l][i] <= 0.0) delta[i] = 0.0;
            grads.w[l].noalias() += delta * act[l].transpose();
            grads.b[l] += delta;
            if (l > 0) delta = (layers[l].w.transpose() * delta).eval();
        }
    }

    if (!std::isfinite(loss)) throw std::runtime_error("train_step: non-finite loss");
    for (std::size_t l = 0; l < depth; ++l)
        if (!grads.w[l].allFinite() || !grads.b[l].allFinite())
            throw std::runtime_error("train_step: non-finite gradient in layer " +
                                     std::to_string(l));
    return loss;
}

/// One Adam step on the batch cross-entropy. Returns the pre-update loss.
inline double train_step(ValueNetwork& net, AdamState& opt, std::span<const TrainSample> batch) {
    NetworkGradients grads(net);
    const double loss = compute_loss_and_gradients(net, batch, grads);

    opt.step += 1;
    const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step));
    const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step));
    auto& layers = net.layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
        opt.m_w[l] = opt.beta1 * opt.m_w[l] + (1.0 - opt.beta1) * grads.w[l];
        opt.v_w[l] = opt.beta2 * opt.v_w[l].array().matrix() +
                     (1.0 - opt.beta2) * grads.w[l].array().square().matrix();
        layers[l].w.array() -= opt.learning_rate * (opt.m_w[l].array() / bc1) /
                               ((opt.v_w[l].array() / bc2).sqrt() + opt.epsilon);

        opt.m_b[l] = opt.beta1 * opt.m_b[l] + (1.0 - opt.beta1) * grads.b[l];
        opt.v_b[l] = opt.beta2 * opt.v_b[l].array().matrix() +
                     (1.0 - opt.beta2) * grads.b[l].array().square().matrix();
        layers[l].b.array() -= opt.learning_rate * (opt.m_b[l].array() / bc1) /
                               ((opt.v_b[l].array() / bc2).sqrt() + opt.epsilon);
    }
    return loss;
}

inline void to_json(nlohmann::json& j, const ValueNetwork& net) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& layer : net.layers()) {
        std::vector<double> w(layer.w.size());
        for (Eigen::Index r = 0; r < layer.w.rows(); ++r)
            for (Eigen::Index c = 0; c < layer.w.cols(); ++c)
                w[static_cast<std::size_t>(r * layer.w.cols() + c)] = layer.w(r, c);
        std::vector<double> b(layer.b.data(), layer.b.data() + layer.b.size());
        layers.push_back({{"rows", layer.w.rows()}, {"cols", layer.w.cols()}, {"w", w}, {"b", b}});
    }
    j = nlohmann::json{{"state_dim", net.state_dim()},
                       {"n_actions", net.n_actions()},
                       {"support",
                        {{"v_min", net.support().v_min()},
                         {"v_max", net.support().v_max()},
                         {"n_atoms", net.support().n_atoms()}}},
                       {"layers", layers}};
}

inline ValueNetwork network_from_json(const nlohmann::json& j) {
    AtomSupport support(j.at("support").at("v_min").get<double>(),
                        j.at("support").at("v_max").get<double>(),
                        j.at("support").at("n_atoms").get<int>());
    const auto& layer_array = j.at("layers");
    std::vector<int> hidden;
    for (std::size_t l = 0; l + 1 < layer_array.size(); ++l)
        hidden.push_back(layer_array[l].at("rows").get<int>());
    ValueNetwork net(j.at("state_dim").get<int>(), j.at("n_actions").get<int>(), support, hidden,
                     0);
    for (std::size_t l = 0; l < layer_array.size(); ++l) {
        auto& layer = net.layers()[l];
        const auto rows = layer_array[l].at("rows").get<Eigen::Index>();
        const auto cols = layer_array[l].at("cols").get<Eigen::Index>();
        if (rows != layer.w.rows() || cols != layer.w.cols())
            throw std::invalid_argument("network_from_json: shape header mismatch");
        const auto w = layer_array[l].at("w").get<std::vector<double>>();
        const auto b = layer_array[l].at("b").get<std::vector<double>>();
        if (static_cast<Eigen::Index>(w.size()) != rows * cols ||
            static_cast<Eigen::Index>(b.size()) != rows)
            throw std::invalid_argument("network_from_json: tensor size mismatch");
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c)
                layer.w(r, c) = w[static_cast<std::size_t>(r * cols + c)];
        for (Eigen::Index r = 0; r < rows; ++r) layer.b[r] = b[static_cast<std::size_t>(r)];
    }
    return net;
}

}  // namespace sentinel
