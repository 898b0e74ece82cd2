#pragma once

#include <span>
#include <vector>

#include "dtfl/data.hpp"
#include "dtfl/mlp.hpp"
#include "dtfl/rng.hpp"
#include "dtfl/scenario.hpp"

namespace dtfl {

struct TrainReport {
    double loss_after = 0.0;
    double hidden_mean = 0.0;
    int steps_done = 0;
};

struct TrainerConfig {
    double lr = 0.05;
    int batch_size = 0;         // 0 = full batch
    double noisy_sigma = 0.01;  // per-coordinate corruption of a noisy node's update
};

// Mean cross-entropy of the softmax classifier over the shard.
double local_loss(const ModelParams& params, const DatasetShard& shard);

// Mean post-rectifier hidden activation over samples and hidden units.
double hidden_layer_summary(const ModelParams& params, const DatasetShard& shard);

// Both of the above from one forward sweep.
struct ShardStats {
    double loss = 0.0;
    double hidden_mean = 0.0;
    double accuracy = 0.0;
};
ShardStats shard_stats(const ModelParams& params, const DatasetShard& shard);

// Exact gradient of the mean cross-entropy over the batch, same layout as
// params.flat.
std::vector<double> gradient(const ModelParams& params,
                             std::span<const Sample> batch);

void apply_gradient_step(ModelParams& params, std::span<const double> grad, double lr);

// Runs steps mini-batch gradient-descent passes over the node's shard.
// Lazy nodes skip the work and return the parameters unchanged; noisy nodes
// train and then corrupt the resulting update with seeded Gaussian noise.
std::pair<ModelParams, TrainReport> local_train_steps(const DeviceNode& node,
                                                      const ModelParams& params,
                                                      int steps,
                                                      const TrainerConfig& cfg,
                                                      Rng& rng);

double accuracy(const ModelParams& params, const DatasetShard& shard);

}  // namespace dtfl
