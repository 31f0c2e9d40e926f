#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "posetrack/io.hpp"

namespace posetrack {

// Numerically stable in both tails.
inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

struct LogisticModel {
    std::vector<double> weights;
    double bias = 0.0;

    int feature_dim() const { return static_cast<int>(weights.size()); }

    double raw(const std::vector<double>& f) const {
        if (f.size() != weights.size())
            throw std::invalid_argument("feature dimension " + std::to_string(f.size()) +
                                        " does not match model dimension " +
                                        std::to_string(weights.size()));
        double z = bias;
        for (std::size_t i = 0; i < f.size(); ++i) z += weights[i] * f[i];
        return z;
    }

    double predict(const std::vector<double>& f) const { return sigmoid(raw(f)); }

    friend bool operator==(const LogisticModel&, const LogisticModel&) = default;
};

struct TrainSample {
    std::vector<double> features;
    int label = 0;  // 0 or 1
};

struct TrainConfig {
    double learning_rate = 0.5;
    int epochs = 500;
    double l2 = 1e-4;  // applied to weights only, not the bias
};

// Mean log-loss plus l2 * ||w||^2 / 2.
inline double logistic_loss(const LogisticModel& m, const std::vector<TrainSample>& samples,
                            double l2) {
    if (samples.empty()) throw std::invalid_argument("empty sample set");
    double loss = 0.0;
    for (const TrainSample& s : samples) {
        const double z = m.raw(s.features);
        // log(1 + exp(-|z|)) form avoids overflow
        const double margin = s.label == 1 ? z : -z;
        loss += margin >= 0.0 ? std::log1p(std::exp(-margin)) : -margin + std::log1p(std::exp(margin));
    }
    loss /= static_cast<double>(samples.size());
    double reg = 0.0;
    for (double w : m.weights) reg += w * w;
    return loss + l2 * reg / 2.0;
}

// Full-batch gradient descent from a zero (or given) start. Samples are
// ordered canonically first so the fit does not depend on input order.
inline LogisticModel train_logistic(std::vector<TrainSample> samples, const TrainConfig& cfg,
                                    const LogisticModel* init = nullptr) {
    if (samples.empty()) throw std::invalid_argument("empty sample set");
    const std::size_t dim = samples[0].features.size();
    if (dim == 0) throw std::invalid_argument("zero-dimensional features");
    bool any_pos = false;
    bool any_neg = false;
    for (const TrainSample& s : samples) {
        if (s.features.size() != dim)
            throw std::invalid_argument("inconsistent feature dimensions in sample set");
        if (s.label != 0 && s.label != 1) throw std::invalid_argument("labels must be 0 or 1");
        (s.label == 1 ? any_pos : any_neg) = true;
    }
    if (!any_pos || !any_neg)
        throw std::invalid_argument("training set must contain both classes");
    if (cfg.epochs < 0 || cfg.learning_rate <= 0.0 || cfg.l2 < 0.0)
        throw std::invalid_argument("invalid training configuration");

    std::sort(samples.begin(), samples.end(), [](const TrainSample& a, const TrainSample& b) {
        if (a.features != b.features) return a.features < b.features;
        return a.label < b.label;
    });

    LogisticModel m;
    if (init != nullptr) {
        if (init->weights.size() != dim)
            throw std::invalid_argument("initial model dimension does not match samples");
        m = *init;
    } else {
        m.weights.assign(dim, 0.0);
    }

    const double inv_n = 1.0 / static_cast<double>(samples.size());
    std::vector<double> grad(dim);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::fill(grad.begin(), grad.end(), 0.0);
        double grad_bias = 0.0;
        for (const TrainSample& s : samples) {
            const double err = sigmoid(m.raw(s.features)) - static_cast<double>(s.label);
            for (std::size_t i = 0; i < dim; ++i) grad[i] += err * s.features[i];
            grad_bias += err;
        }
        for (std::size_t i = 0; i < dim; ++i)
            m.weights[i] -= cfg.learning_rate * (grad[i] * inv_n + cfg.l2 * m.weights[i]);
        m.bias -= cfg.learning_rate * grad_bias * inv_n;
    }
    return m;
}

// ---- model file: {"weights": [...], "bias": b} ------------------------------

inline LogisticModel read_logistic_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const std::exception& e) {
        throw std::runtime_error(path.string() + ": parse error: " + e.what());
    }
    LogisticModel m;
    try {
        if (!j.contains("weights") || !j.at("weights").is_array())
            throw std::runtime_error("missing 'weights' array");
        for (const auto& w : j.at("weights")) {
            if (!w.is_number() || !std::isfinite(w.get<double>()))
                throw std::runtime_error("non-finite weight");
            m.weights.push_back(w.get<double>());
        }
        if (!j.contains("bias") || !j.at("bias").is_number())
            throw std::runtime_error("missing numeric 'bias'");
        m.bias = j.at("bias").get<double>();
        if (!std::isfinite(m.bias)) throw std::runtime_error("non-finite bias");
    } catch (const std::exception& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
    return m;
}

inline void write_logistic_model(const std::filesystem::path& path, const LogisticModel& m) {
    json j;
    j["weights"] = m.weights;
    j["bias"] = m.bias;
    atomic_write(path, j.dump() + "\n");
}

}  // namespace posetrack
