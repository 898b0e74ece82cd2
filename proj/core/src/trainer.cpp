#include "dtfl/trainer.hpp"

#include <algorithm>
#include <cmath>

#include "dtfl/errors.hpp"

namespace dtfl {

double local_loss(const ModelParams& params, const DatasetShard& shard) {
    return shard_stats(params, shard).loss;
}

double hidden_layer_summary(const ModelParams& params, const DatasetShard& shard) {
    return shard_stats(params, shard).hidden_mean;
}

ShardStats shard_stats(const ModelParams& params, const DatasetShard& shard) {
    if (shard.empty()) throw EmptyShard("shard_stats on empty shard");
    ShardStats stats;
    double hidden_acc = 0.0;
    int correct = 0;
    for (const Sample& s : shard.samples) {
        const Forward f = forward(params, s.features);
        stats.loss += log_sum_exp(f.output) - f.output[s.label];
        for (double h : f.hidden) hidden_acc += h;
        int best = 0;
        for (int o = 1; o < params.output_dim; ++o)
            if (f.output[o] > f.output[best]) best = o;
        if (best == s.label) ++correct;
    }
    const double n = static_cast<double>(shard.size());
    stats.loss /= n;
    stats.hidden_mean = hidden_acc / (n * params.hidden_dim);
    stats.accuracy = correct / n;
    return stats;
}

double accuracy(const ModelParams& params, const DatasetShard& shard) {
    return shard_stats(params, shard).accuracy;
}

std::vector<double> gradient(const ModelParams& params,
                             std::span<const Sample> batch) {
    std::vector<double> grad(params.flat.size(), 0.0);
    const double scale = 1.0 / static_cast<double>(batch.size());
    std::vector<double> out_grad(params.output_dim);
    for (const Sample& s : batch) {
        const Forward f = forward(params, s.features);
        std::vector<double> probs = softmax(f.output);
        for (int o = 0; o < params.output_dim; ++o)
            out_grad[o] = scale * (probs[o] - (o == s.label ? 1.0 : 0.0));
        backprop(params, s.features, f, out_grad, grad);
    }
    return grad;
}

void apply_gradient_step(ModelParams& params, std::span<const double> grad, double lr) {
    for (std::size_t i = 0; i < params.flat.size(); ++i) params.flat[i] -= lr * grad[i];
}

std::pair<ModelParams, TrainReport> local_train_steps(const DeviceNode& node,
                                                      const ModelParams& params,
                                                      int steps,
                                                      const TrainerConfig& cfg,
                                                      Rng& rng) {
    TrainReport report;
    if (steps <= 0 || node.malicious == Honesty::Lazy) {
        const ShardStats stats = shard_stats(params, node.shard);
        report.loss_after = stats.loss;
        report.hidden_mean = stats.hidden_mean;
        report.steps_done = 0;
        return {params, report};
    }

    ModelParams current = params;
    const auto& samples = node.shard.samples;
    const int batch = cfg.batch_size > 0
                          ? std::min<int>(cfg.batch_size, static_cast<int>(samples.size()))
                          : static_cast<int>(samples.size());
    std::vector<Sample> scratch(batch);
    for (int step = 0; step < steps; ++step) {
        std::span<const Sample> view;
        if (batch == static_cast<int>(samples.size())) {
            view = samples;
        } else {
            for (int b = 0; b < batch; ++b)
                scratch[b] = samples[rng.below(samples.size())];
            view = scratch;
        }
        const std::vector<double> grad = gradient(current, view);
        apply_gradient_step(current, grad, cfg.lr);
    }

    if (node.malicious == Honesty::Noisy) {
        for (double& v : current.flat) v += rng.normal(0.0, cfg.noisy_sigma);
    }

    const ShardStats stats = shard_stats(current, node.shard);
    if (!std::isfinite(stats.loss))
        throw NonFiniteLoss("loss diverged on node " + std::to_string(node.id));
    report.loss_after = stats.loss;
    report.hidden_mean = stats.hidden_mean;
    report.steps_done = steps;
    return {current, report};
}

}  // namespace dtfl
