#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <set>

#include "dtfl/errors.hpp"
#include "dtfl/scenario.hpp"

using namespace dtfl;

namespace {

ScenarioConfig small_config() {
    ScenarioConfig cfg;
    cfg.num_nodes = 4;
    cfg.num_clusters = 2;
    cfg.seed = 7;
    cfg.num_classes = 4;
    cfg.hidden_dim = 8;
    cfg.dataset.feature_dim = 3;
    cfg.dataset.samples_per_node = 12;
    cfg.dataset.test_samples = 20;
    return cfg;
}

}  // namespace

TEST(Twin, CalibrationAddsDeviation) {
    DigitalTwin t;
    t.mapped_cpu_freq = 1.0;
    t.deviation = 0.15;
    EXPECT_DOUBLE_EQ(calibrate_twin(t), 1.15);
    t.deviation = 0.0;
    EXPECT_DOUBLE_EQ(calibrate_twin(t), t.mapped_cpu_freq);
}

TEST(Twin, CalibratedMinusMappedIsDeviation) {
    Rng rng(3);
    for (int i = 0; i < 100; ++i) {
        DigitalTwin t;
        t.mapped_cpu_freq = rng.uniform(0.5, 2.0);
        t.deviation = rng.uniform(0.0, 0.2);
        EXPECT_NEAR(calibrate_twin(t) - t.mapped_cpu_freq, t.deviation, 1e-12);
    }
}

TEST(Deviation, DegenerateIntervalIsExact) {
    Rng rng(1);
    EXPECT_DOUBLE_EQ(sample_dt_deviation(rng, 0.0, 0.0), 0.0);
}

TEST(Deviation, RejectsInvertedRange) {
    Rng rng(1);
    EXPECT_THROW(sample_dt_deviation(rng, 0.3, 0.2), BadRange);
    EXPECT_THROW(sample_dt_deviation(rng, -0.1, 0.2), BadRange);
}

TEST(Deviation, SupportAndMean) {
    Rng rng(11);
    double sum = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double d = sample_dt_deviation(rng, 0.0, 0.2);
        ASSERT_GE(d, 0.0);
        ASSERT_LE(d, 0.2);
        sum += d;
    }
    EXPECT_NEAR(sum / n, 0.1, 0.005);
}

TEST(Scenario, SingleNodeHoldsFullDataset) {
    ScenarioConfig cfg = small_config();
    cfg.num_nodes = 1;
    cfg.num_clusters = 1;
    const Scenario s = init_scenario(cfg);
    ASSERT_EQ(s.nodes.size(), 1u);
    EXPECT_EQ(s.nodes[0].shard.size(),
              static_cast<std::size_t>(cfg.dataset.samples_per_node));
}

TEST(Scenario, SameSeedIsByteIdentical) {
    const ScenarioConfig cfg = small_config();
    const Scenario a = init_scenario(cfg);
    const Scenario b = init_scenario(cfg);
    EXPECT_EQ(scenario_to_text(a), scenario_to_text(b));
}

TEST(Scenario, DifferentSeedDiffers) {
    ScenarioConfig cfg = small_config();
    const Scenario a = init_scenario(cfg);
    cfg.seed = 8;
    const Scenario b = init_scenario(cfg);
    EXPECT_NE(scenario_to_text(a), scenario_to_text(b));
}

TEST(Scenario, FullSkewGivesOneClassPerNode) {
    ScenarioConfig cfg = small_config();
    cfg.label_skew = 1.0;  // 4 nodes, 4 classes
    const Scenario s = init_scenario(cfg);
    for (int i = 0; i < 4; ++i) {
        std::set<int> labels;
        for (const Sample& sm : s.nodes[i].shard.samples) labels.insert(sm.label);
        EXPECT_EQ(labels.size(), 1u) << "node " << i;
        EXPECT_EQ(*labels.begin(), i % cfg.num_classes);
    }
}

TEST(Scenario, ShardsPartitionTheSource) {
    ScenarioConfig cfg = small_config();
    cfg.label_skew = 0.5;
    const Scenario s = init_scenario(cfg);
    // shard sizes add up and no sample repeats (feature vectors are distinct
    // with probability one under the continuous generator)
    std::size_t total = 0;
    std::set<std::vector<double>> seen;
    for (const DeviceNode& n : s.nodes) {
        total += n.shard.size();
        for (const Sample& sm : n.shard.samples) {
            EXPECT_GE(sm.label, 0);
            EXPECT_LT(sm.label, cfg.num_classes);
            EXPECT_TRUE(seen.insert(sm.features).second) << "duplicate sample";
        }
    }
    EXPECT_EQ(total, static_cast<std::size_t>(cfg.num_nodes * cfg.dataset.samples_per_node));
}

TEST(Scenario, TwinPerNodeBijection) {
    const Scenario s = init_scenario(small_config());
    ASSERT_EQ(s.twins.size(), s.nodes.size());
    std::set<int> twin_ids;
    for (const DigitalTwin& t : s.twins) twin_ids.insert(t.node_id);
    for (const DeviceNode& n : s.nodes) EXPECT_TRUE(twin_ids.count(n.id));
    for (std::size_t i = 0; i < s.nodes.size(); ++i) {
        EXPECT_EQ(s.twins[i].node_id, s.nodes[i].id);
        EXPECT_GT(s.twins[i].mapped_cpu_freq, 0.0);
        EXPECT_GE(s.twins[i].deviation, 0.0);
        EXPECT_NEAR(calibrate_twin(s.twins[i]), s.nodes[i].true_cpu_freq, 1e-12);
    }
}

TEST(Scenario, BroadcastsIdenticalInitialParams) {
    const Scenario s = init_scenario(small_config());
    for (const DeviceNode& n : s.nodes) EXPECT_EQ(n.params.flat, s.initial_params.flat);
}

TEST(Scenario, AttackerTagsAssignedFromHighestIds) {
    ScenarioConfig cfg = small_config();
    cfg.num_noisy = 1;
    cfg.num_lazy = 1;
    const Scenario s = init_scenario(cfg);
    EXPECT_EQ(s.nodes[3].malicious, Honesty::Noisy);
    EXPECT_EQ(s.nodes[2].malicious, Honesty::Lazy);
    EXPECT_EQ(s.nodes[0].malicious, Honesty::Honest);
}

TEST(Scenario, RejectsBadConfigs) {
    ScenarioConfig cfg = small_config();
    cfg.num_clusters = 5;  // more clusters than nodes
    EXPECT_THROW(init_scenario(cfg), BadConfig);

    cfg = small_config();
    cfg.budget_fraction = 0.0;
    EXPECT_THROW(init_scenario(cfg), BadConfig);

    cfg = small_config();
    cfg.dataset.samples_per_node = 0;
    EXPECT_THROW(init_scenario(cfg), EmptyDataset);
}

TEST(Scenario, SerializationGoldenFormat) {
    ScenarioConfig cfg = small_config();
    cfg.num_nodes = 1;
    cfg.num_clusters = 1;
    cfg.dataset.samples_per_node = 1;
    cfg.dataset.test_samples = 0;
    const Scenario s = init_scenario(cfg);
    const std::string text = scenario_to_text(s);
    EXPECT_NE(text.find("format.version 1\n"), std::string::npos);
    EXPECT_NE(text.find("config.num_nodes 1\n"), std::string::npos);
    EXPECT_NE(text.find("node.0.true_cpu_freq "), std::string::npos);
    EXPECT_NE(text.find("node.0.twin.deviation "), std::string::npos);
    EXPECT_NE(text.find("node.0.sample.0.label "), std::string::npos);
    EXPECT_NE(text.find("test_set.size 0\n"), std::string::npos);
}
