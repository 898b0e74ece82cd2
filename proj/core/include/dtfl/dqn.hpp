#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dtfl/mlp.hpp"
#include "dtfl/rng.hpp"

namespace dtfl {

// Encoded layout: [node losses | hidden means | previous action one-hot |
// scaled queue level]. The queue level arrives already scaled by the
// per-slot budget so it stays comparable to the loss entries.
struct MdpState {
    std::vector<double> encoded;
    int num_nodes = 0;
    int a_max = 0;
};

struct Action {
    int a = 1;  // local updates, in {1, ..., a_max}
};

struct Experience {
    MdpState state;
    Action action;
    double reward = 0.0;
    MdpState next_state;
    bool terminal = false;
};

class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {}

    void push(Experience e);
    std::size_t size() const { return entries_.size(); }
    std::size_t capacity() const { return capacity_; }
    bool full() const { return entries_.size() == capacity_; }
    const Experience& operator[](std::size_t i) const { return entries_[i]; }

private:
    std::size_t capacity_;
    std::size_t next_ = 0;  // overwrite cursor once full
    std::vector<Experience> entries_;
};

// state_dim x hidden x a_max net with linear outputs, one per action.
struct QNetwork {
    ModelParams net;

    QNetwork() = default;
    QNetwork(int state_dim, int hidden_dim, int a_max, Rng& rng)
        : net(random_init(state_dim, hidden_dim, a_max, rng)) {}

    std::vector<double> q_values(const MdpState& state) const {
        return forward(net, state.encoded).output;
    }
    int a_max() const { return net.output_dim; }
};

struct DqnConfig {
    double gamma = 0.9;
    double epsilon0 = 0.1;          // probability of acting greedily (grows)
    double epsilon_growth = 0.002;  // additive, per episode
    int target_update_every = 100;  // F_u, in training steps
    int batch_size = 32;
    double lr = 1e-3;
    std::size_t capacity = 2000;
    int episodes = 100;
    int hidden_dim = 200;
    bool normalize_rewards = false;
};

MdpState encode_state(std::span<const double> losses,
                      std::span<const double> hidden_means,
                      double queue_scaled, Action prev_action, int a_max);

// Greedy with probability epsilon, uniform otherwise; greedy ties resolve
// to the smallest action.
Action select_action(const QNetwork& net, const MdpState& state, double epsilon,
                     Rng& rng);

double q_target(const QNetwork& target_net, const Experience& exp, double gamma);

double td_loss(const QNetwork& eval_net, std::span<const Experience> batch,
               std::span<const double> targets);

// One SGD step of the squared TD error on a uniformly sampled batch;
// returns the pre-step loss.
double train_step(QNetwork& eval_net, const QNetwork& target_net,
                  const ReplayBuffer& buffer, const DqnConfig& cfg, Rng& rng);

void sync_target(const QNetwork& eval_net, QNetwork& target_net);

// Environment surface for the training loop: one step is one local
// aggregation of the federated cluster.
class DqnEnv {
public:
    virtual ~DqnEnv() = default;
    virtual MdpState reset() = 0;
    struct StepResult {
        double reward = 0.0;
        MdpState next;
        bool terminal = false;
    };
    virtual StepResult step(const Action& action) = 0;
    virtual int state_dim() const = 0;
    virtual int a_max() const = 0;
};

struct DqnStepRecord {
    int episode = 0;
    int step = 0;       // global environment step
    double epsilon = 0.0;
    double td_loss = 0.0;
    bool trained = false;
    double reward = 0.0;
};

struct DqnTrainingResult {
    QNetwork eval_net;
    QNetwork target_net;
    std::vector<double> loss_trace;       // one entry per training step
    std::vector<DqnStepRecord> steps;
    std::vector<double> episode_rewards;  // summed raw rewards
};

DqnTrainingResult run_dqn_training(DqnEnv& env, const DqnConfig& cfg, Rng& rng);

// Flat binary serialization: "DQN1", three little-endian int32 dims,
// then the parameter block as little-endian float64.
void save_qnetwork(const QNetwork& net, const std::string& path);
QNetwork load_qnetwork(const std::string& path);

}  // namespace dtfl
