#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dtfl/data.hpp"
#include "dtfl/mlp.hpp"
#include "dtfl/rng.hpp"

namespace dtfl {

enum class Honesty { Honest, Lazy, Noisy };

const char* honesty_name(Honesty h);

// A physical trainer.
struct DeviceNode {
    int id = 0;
    double true_cpu_freq = 1.0;  // cycle units / s
    DatasetShard shard;
    ModelParams params;
    double energy_spent = 0.0;
    Honesty malicious = Honesty::Honest;
};

// The device's digital mirror. mapped_cpu_freq underestimates the true
// frequency by `deviation`; calibration adds the empirical deviation back.
struct DigitalTwin {
    int node_id = 0;
    double mapped_loss = 0.0;
    double mapped_cpu_freq = 1.0;
    double mapped_energy = 0.0;
    double deviation = 0.0;
};

double calibrate_twin(const DigitalTwin& twin);

double sample_dt_deviation(Rng& rng, double lo, double hi);

struct DatasetSource {
    enum class Kind { Synthetic, Idx };
    Kind kind = Kind::Synthetic;
    // synthetic Gaussian blobs
    int feature_dim = 10;
    int samples_per_node = 200;
    int test_samples = 1000;
    double center_spread = 2.0;
    double sample_noise = 1.8;
    // IDX files
    std::string idx_images;
    std::string idx_labels;
    std::string idx_test_images;
    std::string idx_test_labels;
};

struct ScenarioConfig {
    int num_nodes = 20;
    int num_clusters = 4;
    std::uint64_t seed = 1;
    double budget_total = 18000.0;   // R_m
    double budget_fraction = 0.8;    // beta
    int num_classes = 10;
    int rounds_max = 50;
    DatasetSource dataset;

    double label_skew = 0.5;         // fraction of a shard from its dominant class
    double cpu_freq_lo = 0.25;
    double cpu_freq_hi = 1.0;
    double deviation_lo = 0.0;
    double deviation_hi = 0.2;
    int num_noisy = 0;               // highest node ids turn noisy
    int num_lazy = 0;                // ids just below the noisy ones turn lazy
    double noisy_sigma = 0.01;       // stddev of a noisy node's update corruption
    int hidden_dim = 200;

    void validate() const;           // throws BadConfig
};

struct Scenario {
    ScenarioConfig config;
    std::vector<DeviceNode> nodes;
    std::vector<DigitalTwin> twins;  // twins[i].node_id == nodes[i].id
    ModelParams initial_params;
    DatasetShard test_set;
    int feature_dim = 0;             // as realized by the dataset source
};

Scenario init_scenario(const ScenarioConfig& config);

// Structured text dump used by golden/determinism tests: fixed field order,
// one field per line, decimal floats.
void serialize_scenario(const Scenario& s, std::ostream& out);
std::string scenario_to_text(const Scenario& s);

}  // namespace dtfl
