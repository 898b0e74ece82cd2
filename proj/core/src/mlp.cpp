#include "dtfl/mlp.hpp"

#include <algorithm>
#include <cmath>

namespace dtfl {

ModelParams random_init(int in, int hidden, int out, Rng& rng) {
    ModelParams p(in, hidden, out);
    const double s1 = 1.0 / std::sqrt(static_cast<double>(in));
    const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden));
    std::size_t i = 0;
    for (; i < p.b1_off(); ++i) p.flat[i] = rng.uniform(-s1, s1);
    for (; i < p.w2_off(); ++i) p.flat[i] = 0.0;
    for (; i < p.b2_off(); ++i) p.flat[i] = rng.uniform(-s2, s2);
    for (; i < p.flat.size(); ++i) p.flat[i] = 0.0;
    return p;
}

Forward forward(const ModelParams& p, std::span<const double> x) {
    Forward f;
    f.hidden.resize(p.hidden_dim);
    f.output.resize(p.output_dim);
    const double* w1 = p.flat.data() + p.w1_off();
    const double* b1 = p.flat.data() + p.b1_off();
    const double* w2 = p.flat.data() + p.w2_off();
    const double* b2 = p.flat.data() + p.b2_off();

    for (int h = 0; h < p.hidden_dim; ++h) {
        const double* row = w1 + static_cast<std::size_t>(h) * p.input_dim;
        double acc = b1[h];
        for (int i = 0; i < p.input_dim; ++i) acc += row[i] * x[i];
        f.hidden[h] = acc > 0.0 ? acc : 0.0;
    }
    for (int o = 0; o < p.output_dim; ++o) {
        const double* row = w2 + static_cast<std::size_t>(o) * p.hidden_dim;
        double acc = b2[o];
        for (int h = 0; h < p.hidden_dim; ++h) acc += row[h] * f.hidden[h];
        f.output[o] = acc;
    }
    return f;
}

void backprop(const ModelParams& p, std::span<const double> x,
              const Forward& fwd, std::span<const double> out_grad,
              std::vector<double>& grad) {
    const double* w2 = p.flat.data() + p.w2_off();
    double* gw1 = grad.data() + p.w1_off();
    double* gb1 = grad.data() + p.b1_off();
    double* gw2 = grad.data() + p.w2_off();
    double* gb2 = grad.data() + p.b2_off();

    for (int o = 0; o < p.output_dim; ++o) {
        const double g = out_grad[o];
        if (g == 0.0) continue;
        double* row = gw2 + static_cast<std::size_t>(o) * p.hidden_dim;
        for (int h = 0; h < p.hidden_dim; ++h) row[h] += g * fwd.hidden[h];
        gb2[o] += g;
    }
    for (int h = 0; h < p.hidden_dim; ++h) {
        if (fwd.hidden[h] <= 0.0) continue;  // rectifier gate
        double acc = 0.0;
        for (int o = 0; o < p.output_dim; ++o) {
            acc += out_grad[o] * w2[static_cast<std::size_t>(o) * p.hidden_dim + h];
        }
        if (acc == 0.0) continue;
        double* row = gw1 + static_cast<std::size_t>(h) * p.input_dim;
        for (int i = 0; i < p.input_dim; ++i) row[i] += acc * x[i];
        gb1[h] += acc;
    }
}

double log_sum_exp(std::span<const double> scores) {
    double m = scores[0];
    for (double s : scores) m = std::max(m, s);
    double acc = 0.0;
    for (double s : scores) acc += std::exp(s - m);
    return m + std::log(acc);
}

std::vector<double> softmax(std::span<const double> scores) {
    const double lse = log_sum_exp(scores);
    std::vector<double> probs(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) probs[i] = std::exp(scores[i] - lse);
    return probs;
}

}  // namespace dtfl
