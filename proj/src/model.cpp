#include "cached_dfl/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cached_dfl/dataset.hpp"
#include "cached_dfl/errors.hpp"
#include "cached_dfl/rng.hpp"

namespace cached_dfl::learning {

std::string to_string(ModelKind kind) {
    return kind == ModelKind::softmax ? "softmax" : "mlp";
}

ModelKind parse_model_kind(const std::string& text) {
    if (text == "softmax") return ModelKind::softmax;
    if (text == "mlp") return ModelKind::mlp;
    throw ConfigError("unknown model '" + text + "' (expected softmax or mlp)");
}

std::size_t Architecture::parameter_count() const noexcept {
    if (kind == ModelKind::softmax) return classes * input_dim + classes;
    return hidden * input_dim + hidden + classes * hidden + classes;
}

void ModelParams::validate() const {
    if (weights.size() != arch.parameter_count()) {
        throw ConfigError("model has " + std::to_string(weights.size()) +
                          " weights, architecture expects " +
                          std::to_string(arch.parameter_count()));
    }
}

ModelParams init_params(const Architecture& arch, std::uint64_t seed) {
    if (arch.input_dim == 0 || arch.classes == 0 ||
        (arch.kind == ModelKind::mlp && arch.hidden == 0)) {
        throw ConfigError("architecture dimensions must be positive");
    }
    ModelParams p{arch, std::vector<double>(arch.parameter_count(), 0.0)};
    if (arch.kind == ModelKind::softmax) return p;

    Rng rng = make_rng(seed, Stream::init);
    const double b1 = std::sqrt(6.0 / static_cast<double>(arch.input_dim));
    const double b2 = std::sqrt(6.0 / static_cast<double>(arch.hidden + arch.classes));
    std::uniform_real_distribution<double> u1(-b1, b1);
    std::uniform_real_distribution<double> u2(-b2, b2);
    const std::size_t w1 = arch.hidden * arch.input_dim;
    const std::size_t w2_start = w1 + arch.hidden;
    for (std::size_t i = 0; i < w1; ++i) p.weights[i] = u1(rng);
    for (std::size_t i = 0; i < arch.classes * arch.hidden; ++i) p.weights[w2_start + i] = u2(rng);
    return p;
}

namespace {

/// Dense layer: out = W in + b, W is (out x in) row-major followed by b.
void affine(const double* layer, std::size_t in_dim, std::size_t out_dim, const double* in,
            double* out) {
    const double* bias = layer + in_dim * out_dim;
    for (std::size_t o = 0; o < out_dim; ++o) {
        const double* w = layer + o * in_dim;
        double s = bias[o];
        for (std::size_t i = 0; i < in_dim; ++i) s += w[i] * in[i];
        out[o] = s;
    }
}

/// Overwrites z with softmax(z) and returns log-sum-exp of the input.
double softmax_inplace(std::span<double> z) {
    const double m = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double& v : z) {
        v = std::exp(v - m);
        sum += v;
    }
    for (double& v : z) v /= sum;
    return m + std::log(sum);
}

void check_pair(const ModelParams& params, const ModelParams& anchor, const Dataset& data,
                std::span<const std::size_t> rows) {
    if (!(params.arch == anchor.arch)) {
        throw std::invalid_argument("model and anchor architectures differ");
    }
    params.validate();
    anchor.validate();
    if (rows.empty()) throw ConfigError("gradient batch is empty");
    if (data.input_dim() != params.arch.input_dim) {
        throw std::invalid_argument("dataset input dimension does not match the model");
    }
}

double proximal(const ModelParams& params, const ModelParams& anchor, double rho) {
    if (rho == 0.0) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < params.weights.size(); ++i) {
        const double d = params.weights[i] - anchor.weights[i];
        s += d * d;
    }
    return 0.5 * rho * s;
}

}  // namespace

void logits(const ModelParams& params, std::span<const double> x, std::span<double> out) {
    const Architecture& a = params.arch;
    const double* w = params.weights.data();
    if (a.kind == ModelKind::softmax) {
        affine(w, a.input_dim, a.classes, x.data(), out.data());
        return;
    }
    std::vector<double> h(a.hidden);
    affine(w, a.input_dim, a.hidden, x.data(), h.data());
    for (double& v : h) v = std::max(v, 0.0);
    affine(w + a.hidden * a.input_dim + a.hidden, a.hidden, a.classes, h.data(), out.data());
}

double loss(const ModelParams& params, const Dataset& data, std::span<const std::size_t> rows,
            const ModelParams& anchor, double rho) {
    check_pair(params, anchor, data, rows);
    std::vector<double> z(params.arch.classes);
    double total = 0.0;
    for (std::size_t r : rows) {
        logits(params, data.row(r), z);
        const double zy = z[static_cast<std::size_t>(data.label(r))];
        total += softmax_inplace(z) - zy;
    }
    return total / static_cast<double>(rows.size()) + proximal(params, anchor, rho);
}

std::vector<double> grad(const ModelParams& params, const Dataset& data,
                         std::span<const std::size_t> rows, const ModelParams& anchor, double rho) {
    check_pair(params, anchor, data, rows);
    const Architecture& a = params.arch;
    const double* w = params.weights.data();
    std::vector<double> g(params.weights.size(), 0.0);
    std::vector<double> z(a.classes);

    if (a.kind == ModelKind::softmax) {
        double* gw = g.data();
        double* gb = gw + a.classes * a.input_dim;
        for (std::size_t r : rows) {
            const auto x = data.row(r);
            affine(w, a.input_dim, a.classes, x.data(), z.data());
            softmax_inplace(z);
            z[static_cast<std::size_t>(data.label(r))] -= 1.0;
            for (std::size_t c = 0; c < a.classes; ++c) {
                double* row = gw + c * a.input_dim;
                for (std::size_t i = 0; i < a.input_dim; ++i) row[i] += z[c] * x[i];
                gb[c] += z[c];
            }
        }
    } else {
        const std::size_t w2_off = a.hidden * a.input_dim + a.hidden;
        const double* w2 = w + w2_off;
        double* gw1 = g.data();
        double* gb1 = gw1 + a.hidden * a.input_dim;
        double* gw2 = g.data() + w2_off;
        double* gb2 = gw2 + a.classes * a.hidden;
        std::vector<double> pre(a.hidden);
        std::vector<double> h(a.hidden);
        std::vector<double> dh(a.hidden);
        for (std::size_t r : rows) {
            const auto x = data.row(r);
            affine(w, a.input_dim, a.hidden, x.data(), pre.data());
            for (std::size_t j = 0; j < a.hidden; ++j) h[j] = std::max(pre[j], 0.0);
            affine(w2, a.hidden, a.classes, h.data(), z.data());
            softmax_inplace(z);
            z[static_cast<std::size_t>(data.label(r))] -= 1.0;

            std::fill(dh.begin(), dh.end(), 0.0);
            for (std::size_t c = 0; c < a.classes; ++c) {
                const double* w2row = w2 + c * a.hidden;
                double* g2row = gw2 + c * a.hidden;
                for (std::size_t j = 0; j < a.hidden; ++j) {
                    g2row[j] += z[c] * h[j];
                    dh[j] += z[c] * w2row[j];
                }
                gb2[c] += z[c];
            }
            for (std::size_t j = 0; j < a.hidden; ++j) {
                if (pre[j] <= 0.0) continue;
                double* g1row = gw1 + j * a.input_dim;
                for (std::size_t i = 0; i < a.input_dim; ++i) g1row[i] += dh[j] * x[i];
                gb1[j] += dh[j];
            }
        }
    }

    const double inv = 1.0 / static_cast<double>(rows.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] = g[i] * inv + rho * (params.weights[i] - anchor.weights[i]);
    }
    return g;
}

int predict(const ModelParams& params, std::span<const double> x) {
    std::vector<double> z(params.arch.classes);
    logits(params, x, z);
    // max_element returns the first maximum.
    return static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
}

double evaluate(const ModelParams& params, const Dataset& data, std::span<const std::size_t> rows) {
    const std::size_t n = rows.empty() ? data.size() : rows.size();
    if (n == 0) throw ConfigError("evaluation set is empty");
    std::size_t correct = 0;
    std::vector<double> z(params.arch.classes);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t r = rows.empty() ? k : rows[k];
        logits(params, data.row(r), z);
        const auto best = static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
        if (best == data.label(r)) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(n);
}

}  // namespace cached_dfl::learning
