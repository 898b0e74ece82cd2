#include "dtfl/dqn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "dtfl/errors.hpp"

namespace dtfl {

void ReplayBuffer::push(Experience e) {
    if (entries_.size() < capacity_) {
        entries_.push_back(std::move(e));
    } else {
        entries_[next_] = std::move(e);
        next_ = (next_ + 1) % capacity_;
    }
}

MdpState encode_state(std::span<const double> losses,
                      std::span<const double> hidden_means,
                      double queue_scaled, Action prev_action, int a_max) {
    if (losses.size() != hidden_means.size())
        throw LengthMismatch("losses and hidden means differ in length");
    if (prev_action.a < 1 || prev_action.a > a_max)
        throw LengthMismatch("previous action outside {1..a_max}");
    MdpState s;
    s.num_nodes = static_cast<int>(losses.size());
    s.a_max = a_max;
    s.encoded.reserve(losses.size() * 2 + a_max + 1);
    s.encoded.insert(s.encoded.end(), losses.begin(), losses.end());
    s.encoded.insert(s.encoded.end(), hidden_means.begin(), hidden_means.end());
    for (int k = 1; k <= a_max; ++k) s.encoded.push_back(k == prev_action.a ? 1.0 : 0.0);
    s.encoded.push_back(queue_scaled);
    return s;
}

Action select_action(const QNetwork& net, const MdpState& state, double epsilon,
                     Rng& rng) {
    const int n = net.a_max();
    if (rng.uniform() < epsilon) {
        const std::vector<double> q = net.q_values(state);
        int best = 0;
        for (int k = 1; k < n; ++k)
            if (q[k] > q[best]) best = k;
        return {best + 1};
    }
    return {static_cast<int>(rng.below(static_cast<std::uint64_t>(n))) + 1};
}

double q_target(const QNetwork& target_net, const Experience& exp, double gamma) {
    if (exp.terminal) return exp.reward;
    const std::vector<double> q = target_net.q_values(exp.next_state);
    double best = q[0];
    for (double v : q) best = std::max(best, v);
    return exp.reward + gamma * best;
}

double td_loss(const QNetwork& eval_net, std::span<const Experience> batch,
               std::span<const double> targets) {
    double acc = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const std::vector<double> q = eval_net.q_values(batch[i].state);
        const double err = targets[i] - q[batch[i].action.a - 1];
        acc += err * err;
    }
    return acc / static_cast<double>(batch.size());
}

double train_step(QNetwork& eval_net, const QNetwork& target_net,
                  const ReplayBuffer& buffer, const DqnConfig& cfg, Rng& rng) {
    if (buffer.size() < static_cast<std::size_t>(cfg.batch_size))
        throw BufferTooSmall("replay holds fewer entries than one batch");

    // uniform sample without replacement (partial Fisher-Yates)
    std::vector<std::size_t> index(buffer.size());
    for (std::size_t i = 0; i < index.size(); ++i) index[i] = i;
    const std::size_t batch_n = static_cast<std::size_t>(cfg.batch_size);
    for (std::size_t i = 0; i < batch_n; ++i)
        std::swap(index[i], index[i + rng.below(index.size() - i)]);

    std::vector<double> targets(batch_n);
    for (std::size_t i = 0; i < batch_n; ++i)
        targets[i] = q_target(target_net, buffer[index[i]], cfg.gamma);

    double loss = 0.0;
    std::vector<double> grad(eval_net.net.flat.size(), 0.0);
    std::vector<double> out_grad(eval_net.net.output_dim);
    const double scale = 1.0 / static_cast<double>(batch_n);
    for (std::size_t i = 0; i < batch_n; ++i) {
        const Experience& exp = buffer[index[i]];
        const Forward f = forward(eval_net.net, exp.state.encoded);
        const double pred = f.output[exp.action.a - 1];
        const double err = targets[i] - pred;
        loss += err * err;
        std::fill(out_grad.begin(), out_grad.end(), 0.0);
        out_grad[exp.action.a - 1] = -2.0 * err * scale;
        backprop(eval_net.net, exp.state.encoded, f, out_grad, grad);
    }
    loss *= scale;
    for (std::size_t i = 0; i < grad.size(); ++i) eval_net.net.flat[i] -= cfg.lr * grad[i];
    return loss;
}

void sync_target(const QNetwork& eval_net, QNetwork& target_net) {
    if (!eval_net.net.same_arch(target_net.net))
        throw ArchMismatch("eval/target architecture differs");
    target_net.net.flat = eval_net.net.flat;
}

namespace {

// Welford running statistics for the optional reward standardization.
struct RunningStat {
    std::size_t n = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void push(double x) {
        ++n;
        const double d = x - mean;
        mean += d / static_cast<double>(n);
        m2 += d * (x - mean);
    }
    double stddev() const {
        return n > 1 ? std::sqrt(m2 / static_cast<double>(n - 1)) : 0.0;
    }
};

}  // namespace

DqnTrainingResult run_dqn_training(DqnEnv& env, const DqnConfig& cfg, Rng& rng) {
    Rng init_rng = rng.substream("dqn-init");
    Rng action_rng = rng.substream("dqn-action");
    Rng sample_rng = rng.substream("dqn-sample");

    DqnTrainingResult result;
    result.eval_net = QNetwork(env.state_dim(), cfg.hidden_dim, env.a_max(), init_rng);
    result.target_net = result.eval_net;

    ReplayBuffer buffer(cfg.capacity);
    RunningStat reward_stat;
    double epsilon = cfg.epsilon0;
    int global_step = 0;
    int train_count = 0;

    for (int episode = 0; episode < cfg.episodes; ++episode) {
        MdpState state = env.reset();
        double episode_reward = 0.0;
        bool terminal = false;
        while (!terminal) {
            // Greedy behavior is only available once the replay is full;
            // until then every action is drawn uniformly.
            const double eps_now = buffer.full() ? epsilon : 0.0;
            const Action action = select_action(result.eval_net, state, eps_now, action_rng);
            DqnEnv::StepResult sr = env.step(action);
            episode_reward += sr.reward;
            double stored_reward = sr.reward;
            if (cfg.normalize_rewards) {
                reward_stat.push(sr.reward);
                const double sd = reward_stat.stddev();
                stored_reward = (sr.reward - reward_stat.mean) / (sd > 1e-9 ? sd : 1.0);
            }
            buffer.push({state, action, stored_reward, sr.next, sr.terminal});
            state = std::move(sr.next);
            terminal = sr.terminal;
            ++global_step;

            DqnStepRecord rec;
            rec.episode = episode;
            rec.step = global_step;
            rec.epsilon = eps_now;
            rec.reward = sr.reward;
            if (buffer.full()) {
                ++train_count;
                if (cfg.target_update_every <= 1 || train_count % cfg.target_update_every == 1)
                    sync_target(result.eval_net, result.target_net);
                const double loss =
                    train_step(result.eval_net, result.target_net, buffer, cfg, sample_rng);
                result.loss_trace.push_back(loss);
                rec.td_loss = loss;
                rec.trained = true;
            }
            result.steps.push_back(rec);
        }
        result.episode_rewards.push_back(episode_reward);
        epsilon = std::min(1.0, epsilon + cfg.epsilon_growth);
    }
    return result;
}

void save_qnetwork(const QNetwork& net, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path + " for writing");
    out.write("DQN1", 4);
    const std::int32_t dims[3] = {net.net.input_dim, net.net.hidden_dim, net.net.output_dim};
    out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
    out.write(reinterpret_cast<const char*>(net.net.flat.data()),
              static_cast<std::streamsize>(net.net.flat.size() * sizeof(double)));
    if (!out) throw Error("short write to " + path);
}

QNetwork load_qnetwork(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw TruncatedFile("cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "DQN1", 4) != 0) throw BadMagic("bad magic in " + path);
    std::int32_t dims[3];
    in.read(reinterpret_cast<char*>(dims), sizeof(dims));
    if (!in) throw TruncatedFile("truncated dims in " + path);
    QNetwork q;
    q.net = ModelParams(dims[0], dims[1], dims[2]);
    in.read(reinterpret_cast<char*>(q.net.flat.data()),
            static_cast<std::streamsize>(q.net.flat.size() * sizeof(double)));
    if (!in) throw TruncatedFile("truncated weights in " + path);
    return q;
}

}  // namespace dtfl
