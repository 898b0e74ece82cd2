#pragma once

#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "dtfl/budget.hpp"
#include "dtfl/dqn.hpp"
#include "dtfl/energy.hpp"
#include "dtfl/scenario.hpp"
#include "dtfl/trainer.hpp"
#include "dtfl/trust.hpp"

namespace dtfl {

struct Cluster {
    int id = 0;
    std::vector<int> member_node_ids;
};

// Standard K-means with K-means++ seeding on (normalized shard size,
// normalized cpu frequency); empty clusters are repaired by stealing the
// farthest point from the largest cluster. Cluster ids are relabeled by
// smallest member id so output order is stable.
std::vector<Cluster> cluster_nodes(const std::vector<DeviceNode>& nodes, int k, Rng& rng);

struct ToleranceSchedule {
    double alpha0 = 0.5;
    double rho = 0.01;
    double alpha_max = 1.0;
};

double tolerance_schedule(const ToleranceSchedule& sched, int global_round);

// Caps the proposed update count so the cluster's local phase stays within
// alpha_tol * t_min; never returns less than one update.
Action clamp_frequency(Action a, double per_training_time, double alpha_tol, double t_min);

ModelParams trust_weighted_cluster_aggregate(const std::vector<Upload>& uploads,
                                             const std::map<int, double>& reputations);

// Staleness-weighted merge: cluster j gets raw weight (e/2)^-(t - ts_j),
// weights normalized to sum to one.
ModelParams time_weighted_global_aggregate(const std::vector<ModelParams>& cluster_params,
                                           const std::vector<int>& timestamps, int t);

enum class FedMode { AsyncDqn, SyncFixed, AsyncFixed };

const char* fed_mode_name(FedMode m);

struct FederationConfig {
    FedMode mode = FedMode::AsyncFixed;
    int fixed_frequency = 5;  // T for the fixed-frequency modes
    int a_max = 10;
    int global_every = 1;     // global merge every G epochs
    ToleranceSchedule tolerance;
    PenaltyWeights penalty{1.0, 0.02};
    TrainerConfig trainer;
    EnergyModel energy;
    ChannelModel channel;
    double p_good = 0.8;
    double channel_persistence = 0.6;
    std::optional<ChannelQuality> pinned_channel;  // forces a constant state
    bool calibrated = true;
    double diversity_threshold = 0.99;
    double norm_screen_hi = 1.8;
    double norm_screen_lo = 0.05;
    double uncertainty_coeff = 0.5;  // iota
    DqnConfig dqn;
};

struct RoundRow {
    int round = 0;  // global epoch index
    double simulated_time = 0.0;
    int cluster_id = 0;
    int a_i = 0;
    double local_loss = 0.0;
    double global_accuracy = 0.0;
    double queue = 0.0;
    double e_cmp = 0.0;
    double e_com = 0.0;
    ChannelQuality channel_state = ChannelQuality::Good;
};

struct ReputationRow {
    int round = 0;
    int curator = 0;
    int node = 0;
    double alpha = 0, beta = 0, belief = 0, failure = 0, quality = 0, reputation = 0;
};

struct EnergyRow {
    int round = 0;
    ChannelQuality state = ChannelQuality::Good;
    double e_cmp_total = 0.0;
    double e_com_total = 0.0;
};

struct QueueRow {
    int round = 0;
    double q = 0.0;
    double consumed = 0.0;
    double budget_rate = 0.0;
    double penalty_value = 0.0;
};

struct GlobalAggregation {
    int epoch = 0;
    double sim_time = 0.0;
    ChannelQuality curator_state = ChannelQuality::Good;  // lowest-id curator
    double accuracy = 0.0;
};

// Per-decision bookkeeping (not part of the CSV surface): what each cluster
// proposed, what the clamp let through, and the benchmark it was held to.
struct EpochDecision {
    int epoch = 0;
    int cluster_id = 0;
    int proposed = 0;
    int executed = 0;
    double per_training_time = 0.0;
    double t_min = 0.0;
    double alpha_tol = 0.0;
};

// One cluster's curator-side simulation: local training of the members,
// screening, reputation bookkeeping, trust-weighted aggregation, energy
// accounting and the deficit queue. The DQN environment and the federation
// loop both run on this.
class ClusterSim {
public:
    ClusterSim(const Scenario& scenario, const Cluster& cluster,
               const FederationConfig& cfg, double budget_share, int horizon,
               Rng stream);

    void reset();

    struct SlotResult {
        double reward = 0.0;
        double loss_before = 0.0;
        double loss_after = 0.0;
        int waited_ticks = 0;  // idle ticks spent holding the upload for a good state
        double e_cmp_view = 0.0;   // per-update estimate over members (twin view)
        double e_com_view = 0.0;   // per-slot estimate over members (twin view)
        double e_cmp_actual = 0.0; // a * per-update actual
        double e_com_actual = 0.0;
        ChannelQuality upload_state = ChannelQuality::Good;
        double penalty_value = 0.0;
        double queue_after = 0.0;
        bool exhausted = false;
    };
    SlotResult run_slot(int local_updates);

    MdpState state() const;
    int state_dim() const;

    // Longest single-update time across members, in the requested view.
    double per_training_time(bool calibrated_view) const;
    double upload_time() const;  // model transfer time under the current state

    const ModelParams& params() const { return local_params_; }
    void install_params(const ModelParams& p);

    const DeficitQueue& queue() const { return queue_; }
    bool exhausted() const { return budget_exhausted(queue_); }
    int slots_done() const { return slot_index_; }
    int id() const { return cluster_.id; }
    const std::vector<int>& member_ids() const { return cluster_.member_node_ids; }
    const std::vector<DeviceNode>& members() const { return members_; }
    const std::map<int, ReputationRecord>& ledger() const { return ledger_; }
    double reputation_of(int node_id) const;
    ChannelQuality channel_state() const { return channel_.state; }
    int prev_action() const { return prev_action_; }
    const std::vector<ReputationRow>& last_slot_reputation() const { return last_rep_rows_; }

private:
    const Scenario* scenario_;
    Cluster cluster_;
    const FederationConfig* cfg_;
    double budget_share_;
    int horizon_;
    Rng stream_;

    std::vector<DeviceNode> members_;
    std::vector<DigitalTwin> twins_;
    std::vector<double> deviation_estimate_;  // running mean of observed deviations
    int deviation_samples_ = 0;
    ModelParams local_params_;
    DeficitQueue queue_;
    ChannelState channel_;
    std::map<int, ReputationRecord> ledger_;
    std::vector<double> member_losses_;
    std::vector<double> member_hidden_;
    std::vector<ReputationRow> last_rep_rows_;
    double cluster_loss_ = 0.0;
    int prev_action_ = 1;
    int slot_index_ = 0;
    TrainerConfig trainer_cfg_;
    Rng train_rng_;
    Rng channel_rng_;
    Rng deviation_rng_;

    void refresh_member_stats();
    double freq_view(std::size_t member_idx) const;
};

// Adapter exposing one cluster as a DQN training environment; episodes end
// when the budget is exhausted or the slot horizon is reached.
class FlClusterEnv : public DqnEnv {
public:
    FlClusterEnv(const Scenario& scenario, const Cluster& cluster,
                 const FederationConfig& cfg, double budget_share, int horizon,
                 Rng stream)
        : sim_(scenario, cluster, cfg, budget_share, horizon, stream),
          horizon_(horizon), a_max_(cfg.a_max) {}

    MdpState reset() override;
    StepResult step(const Action& action) override;
    int state_dim() const override { return sim_.state_dim(); }
    int a_max() const override { return a_max_; }
    ClusterSim& sim() { return sim_; }

private:
    ClusterSim sim_;
    int horizon_;
    int a_max_;
};

struct MetricsTrace {
    std::vector<RoundRow> rounds;
    std::vector<ReputationRow> reputation;
    std::vector<EnergyRow> energy;
    std::vector<QueueRow> queue;
    std::vector<GlobalAggregation> aggregations;
    std::vector<EpochDecision> decisions;
    std::vector<DqnStepRecord> dqn_steps;  // concatenated over clusters (async_dqn)
    double final_accuracy = 0.0;
    double final_loss = 0.0;
    double total_e_cmp = 0.0;
    double total_e_com = 0.0;
    double max_queue = 0.0;
    double total_sim_time = 0.0;
    std::vector<double> cluster_consumed;
    std::vector<double> cluster_budget;  // beta * R_m share per cluster
};

MetricsTrace run_federation(const Scenario& scenario, const FederationConfig& cfg,
                            int rounds);

}  // namespace dtfl
