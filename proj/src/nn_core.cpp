#include "hwaware/nn_core.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

namespace hwaware {

double sigmoid(double z) noexcept {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

DenseNet DenseNet::zeros(std::span<const std::size_t> widths) {
    if (widths.size() < 2) throw std::invalid_argument("network needs at least two widths");
    DenseNet net;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        if (widths[l] == 0 || widths[l + 1] == 0) throw std::invalid_argument("zero layer width");
        net.layers.push_back({Matrix(widths[l + 1], widths[l]), std::vector<double>(widths[l + 1])});
    }
    return net;
}

DenseNet DenseNet::random(std::span<const std::size_t> widths, Rng& rng) {
    DenseNet net = zeros(widths);
    for (auto& layer : net.layers) {
        const double bound = std::sqrt(1.0 / double(layer.fan_in()));
        std::uniform_real_distribution<double> u(-bound, bound);
        for (double& w : layer.weights.values()) w = u(rng);
        for (double& b : layer.bias) b = u(rng);
    }
    return net;
}

std::vector<std::size_t> DenseNet::widths() const {
    std::vector<std::size_t> w;
    if (layers.empty()) return w;
    w.push_back(layers.front().fan_in());
    for (const auto& l : layers) w.push_back(l.fan_out());
    return w;
}

void DenseNet::validate() const {
    if (layers.empty()) throw std::invalid_argument("network has no layers");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& layer = layers[l];
        if (layer.bias.size() != layer.fan_out()) {
            throw std::invalid_argument("layer " + std::to_string(l) + ": bias size mismatch");
        }
        if (l > 0 && layer.fan_in() != layers[l - 1].fan_out()) {
            throw std::invalid_argument("layer " + std::to_string(l) + ": fan_in mismatch");
        }
        auto finite = [](double v) { return std::isfinite(v); };
        if (!std::all_of(layer.weights.values().begin(), layer.weights.values().end(), finite) ||
            !std::all_of(layer.bias.begin(), layer.bias.end(), finite)) {
            throw std::invalid_argument("layer " + std::to_string(l) + ": non-finite parameter");
        }
    }
}

ForwardCache forward(const DenseNet& net, const Matrix& X) {
    if (X.cols() != net.input_width()) throw std::invalid_argument("forward: input width mismatch");
    ForwardCache cache;
    cache.act.push_back(X);
    for (const auto& layer : net.layers) {
        const Matrix& in = cache.act.back();
        const std::size_t batch = in.rows();
        Matrix z(batch, layer.fan_out());
        Matrix a(batch, layer.fan_out());
        for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t o = 0; o < layer.fan_out(); ++o) {
                double s = layer.bias[o];
                for (std::size_t i = 0; i < layer.fan_in(); ++i) s += layer.weights(o, i) * in(b, i);
                z(b, o) = s;
                a(b, o) = sigmoid(s);
            }
        }
        cache.pre.push_back(std::move(z));
        cache.act.push_back(std::move(a));
    }
    return cache;
}

double bce_loss(const Matrix& y_hat, std::span<const std::uint8_t> labels) {
    if (y_hat.rows() != labels.size() || y_hat.cols() != 1) {
        throw std::invalid_argument("bce_loss: shape mismatch");
    }
    double total = 0.0;
    for (std::size_t b = 0; b < labels.size(); ++b) {
        const double p = std::clamp(y_hat(b, 0), kProbClamp, 1.0 - kProbClamp);
        total -= labels[b] ? std::log(p) : std::log(1.0 - p);
    }
    return total / double(labels.size());
}

Gradients backward(const DenseNet& net, const ForwardCache& cache,
                   std::span<const std::uint8_t> labels) {
    const Matrix& y_hat = cache.output();
    const std::size_t batch = y_hat.rows();
    if (labels.size() != batch) throw std::invalid_argument("backward: label count mismatch");
    Gradients grads = DenseNet::zeros(net.widths());

    // d loss / d z for the output layer. Inside the clamp window this is the
    // familiar (y_hat - y) / batch; outside it the clamped loss is flat.
    Matrix delta(batch, 1);
    for (std::size_t b = 0; b < batch; ++b) {
        const double p = y_hat(b, 0);
        const bool clamped = p < kProbClamp || p > 1.0 - kProbClamp;
        delta(b, 0) = clamped ? 0.0 : (p - double(labels[b])) / double(batch);
    }

    for (std::size_t l = net.layers.size(); l-- > 0;) {
        const auto& layer = net.layers[l];
        const Matrix& in = cache.act[l];
        auto& g = grads.layers[l];
        for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t o = 0; o < layer.fan_out(); ++o) {
                const double d = delta(b, o);
                g.bias[o] += d;
                for (std::size_t i = 0; i < layer.fan_in(); ++i) g.weights(o, i) += d * in(b, i);
            }
        }
        if (l == 0) break;
        Matrix prev(batch, layer.fan_in());
        for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t i = 0; i < layer.fan_in(); ++i) {
                double s = 0.0;
                for (std::size_t o = 0; o < layer.fan_out(); ++o) s += layer.weights(o, i) * delta(b, o);
                const double a = in(b, i);
                prev(b, i) = s * a * (1.0 - a);
            }
        }
        delta = std::move(prev);
    }
    return grads;
}

AdamState AdamState::for_net(const DenseNet& net, AdamConfig config) {
    auto w = net.widths();
    return {config, DenseNet::zeros(w), DenseNet::zeros(w), 0};
}

void adam_step(DenseNet& params, const Gradients& grads, AdamState& state) {
    if (params.widths() != grads.widths() || params.widths() != state.m.widths()) {
        throw std::invalid_argument("adam_step: shape mismatch");
    }
    const auto& c = state.config;
    ++state.step;
    const double bc1 = 1.0 - std::pow(c.beta1, double(state.step));
    const double bc2 = 1.0 - std::pow(c.beta2, double(state.step));
    auto update = [&](double& theta, double g, double& m, double& v) {
        m = c.beta1 * m + (1.0 - c.beta1) * g;
        v = c.beta2 * v + (1.0 - c.beta2) * g * g;
        theta -= c.lr * (m / bc1) / (std::sqrt(v / bc2) + c.eps);
    };
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        auto& p = params.layers[l];
        const auto& g = grads.layers[l];
        auto& m = state.m.layers[l];
        auto& v = state.v.layers[l];
        for (std::size_t i = 0; i < p.weights.size(); ++i) {
            update(p.weights[i], g.weights[i], m.weights[i], v.weights[i]);
        }
        for (std::size_t i = 0; i < p.bias.size(); ++i) update(p.bias[i], g.bias[i], m.bias[i], v.bias[i]);
    }
}

nlohmann::json net_to_json(const DenseNet& net) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : net.layers) {
        layers.push_back({{"fan_in", l.fan_in()},
                          {"fan_out", l.fan_out()},
                          {"weights", l.weights.storage()},
                          {"bias", l.bias}});
    }
    return {{"format", "hwaware-network"}, {"widths", net.widths()}, {"layers", layers}};
}

DenseNet net_from_json(const nlohmann::json& doc) {
    try {
        DenseNet net;
        for (const auto& l : doc.at("layers")) {
            const auto fan_in = l.at("fan_in").get<std::size_t>();
            const auto fan_out = l.at("fan_out").get<std::size_t>();
            net.layers.push_back({Matrix(fan_out, fan_in, l.at("weights").get<std::vector<double>>()),
                                  l.at("bias").get<std::vector<double>>()});
        }
        net.validate();
        return net;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("malformed network checkpoint: ") + e.what());
    }
}

void save_net(const DenseNet& net, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << net_to_json(net).dump(1) << '\n';
}

DenseNet load_net(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open network checkpoint " + path.string());
    try {
        return net_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument(path.string() + ": " + e.what());
    }
}

}  // namespace hwaware
