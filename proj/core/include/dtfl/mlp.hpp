#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dtfl/rng.hpp"

namespace dtfl {

// Fully connected input x hidden x output network with rectifier hidden
// units. The parameter block is one contiguous vector laid out as
// [W1 (hidden x in, row-major) | b1 | W2 (out x hidden, row-major) | b2],
// which is what training, aggregation and serialization all operate on.
struct ModelParams {
    int input_dim = 0;
    int hidden_dim = 0;
    int output_dim = 0;
    std::vector<double> flat;

    ModelParams() = default;
    ModelParams(int in, int hidden, int out)
        : input_dim(in), hidden_dim(hidden), output_dim(out),
          flat(param_count(in, hidden, out), 0.0) {}

    static std::size_t param_count(int in, int hidden, int out) {
        return static_cast<std::size_t>(hidden) * in + hidden +
               static_cast<std::size_t>(out) * hidden + out;
    }

    bool same_arch(const ModelParams& other) const {
        return input_dim == other.input_dim && hidden_dim == other.hidden_dim &&
               output_dim == other.output_dim;
    }

    // layout offsets
    std::size_t w1_off() const { return 0; }
    std::size_t b1_off() const { return static_cast<std::size_t>(hidden_dim) * input_dim; }
    std::size_t w2_off() const { return b1_off() + hidden_dim; }
    std::size_t b2_off() const { return w2_off() + static_cast<std::size_t>(output_dim) * hidden_dim; }
};

ModelParams random_init(int in, int hidden, int out, Rng& rng);

struct Forward {
    std::vector<double> hidden;  // post-rectifier
    std::vector<double> output;  // pre-activation scores
};

Forward forward(const ModelParams& p, std::span<const double> x);

// Backpropagates an output-side gradient for one input, accumulating the
// parameter gradient into grad (same layout as p.flat).
void backprop(const ModelParams& p, std::span<const double> x,
              const Forward& fwd, std::span<const double> out_grad,
              std::vector<double>& grad);

// log(sum(exp(scores))) with the usual max-shift
double log_sum_exp(std::span<const double> scores);

// softmax probabilities of raw scores
std::vector<double> softmax(std::span<const double> scores);

}  // namespace dtfl
