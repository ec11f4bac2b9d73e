#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace cached_dfl::learning {

class Dataset;

enum class ModelKind { softmax, mlp };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& text);

/// Shape of a desk-scale classifier.
///
/// Parameter layout is layer-major; each layer stores its weight matrix
/// (outputs x inputs, row-major) followed by its bias vector:
///   softmax: [W (classes x input), b (classes)]
///   mlp:     [W1 (hidden x input), b1 (hidden), W2 (classes x hidden), b2 (classes)]
struct Architecture {
    ModelKind kind = ModelKind::softmax;
    std::size_t input_dim = 0;
    std::size_t hidden = 0;  // mlp only
    std::size_t classes = 0;

    std::size_t parameter_count() const noexcept;

    friend bool operator==(const Architecture&, const Architecture&) = default;
};

struct ModelParams {
    Architecture arch;
    std::vector<double> weights;

    /// Throws ConfigError if the weight count does not match the architecture.
    void validate() const;
};

/// Identical for every agent that uses the same seed. Softmax starts at zero;
/// the MLP uses a uniform fan-in scaled initialisation.
ModelParams init_params(const Architecture& arch, std::uint64_t seed);

/// Mean cross-entropy over the selected rows plus (rho / 2) * ||x - anchor||^2.
double loss(const ModelParams& params, const Dataset& data, std::span<const std::size_t> rows,
            const ModelParams& anchor, double rho);

/// Gradient of `loss` with respect to params.weights. Throws
/// std::invalid_argument when params and anchor disagree on architecture and
/// ConfigError for an empty batch.
std::vector<double> grad(const ModelParams& params, const Dataset& data,
                         std::span<const std::size_t> rows, const ModelParams& anchor, double rho);

/// Unnormalised class scores for one input row.
void logits(const ModelParams& params, std::span<const double> x, std::span<double> out);

/// Argmax class; ties go to the smallest index.
int predict(const ModelParams& params, std::span<const double> x);

/// Fraction of correctly classified rows (all rows when `rows` is empty).
double evaluate(const ModelParams& params, const Dataset& data,
                std::span<const std::size_t> rows = {});

}  // namespace cached_dfl::learning
