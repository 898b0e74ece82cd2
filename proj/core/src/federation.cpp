#include "dtfl/federation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dtfl/errors.hpp"

namespace dtfl {

const char* fed_mode_name(FedMode m) {
    switch (m) {
        case FedMode::AsyncDqn: return "async_dqn";
        case FedMode::SyncFixed: return "sync_fixed";
        default: return "async_fixed";
    }
}

namespace {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

double dist2(const Point& a, const Point& b) {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    return dx * dx + dy * dy;
}

std::vector<Point> node_features(const std::vector<DeviceNode>& nodes) {
    double size_lo = std::numeric_limits<double>::max(), size_hi = 0.0;
    double freq_lo = std::numeric_limits<double>::max(), freq_hi = 0.0;
    for (const DeviceNode& n : nodes) {
        size_lo = std::min(size_lo, static_cast<double>(n.shard.size()));
        size_hi = std::max(size_hi, static_cast<double>(n.shard.size()));
        freq_lo = std::min(freq_lo, n.true_cpu_freq);
        freq_hi = std::max(freq_hi, n.true_cpu_freq);
    }
    std::vector<Point> pts(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        pts[i].x = size_hi > size_lo
                       ? (nodes[i].shard.size() - size_lo) / (size_hi - size_lo)
                       : 0.5;
        pts[i].y = freq_hi > freq_lo
                       ? (nodes[i].true_cpu_freq - freq_lo) / (freq_hi - freq_lo)
                       : 0.5;
    }
    return pts;
}

}  // namespace

std::vector<Cluster> cluster_nodes(const std::vector<DeviceNode>& nodes, int k, Rng& rng) {
    const int n = static_cast<int>(nodes.size());
    if (k < 1 || k > n) throw BadK("k must be in [1, node count]");

    const std::vector<Point> pts = node_features(nodes);

    // K-means++ seeding
    std::vector<Point> centroids;
    std::vector<bool> chosen(n, false);
    const int first = static_cast<int>(rng.below(n));
    centroids.push_back(pts[first]);
    chosen[first] = true;
    while (static_cast<int>(centroids.size()) < k) {
        std::vector<double> d2(n);
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::max();
            for (const Point& c : centroids) best = std::min(best, dist2(pts[i], c));
            d2[i] = best;
            total += best;
        }
        int pick = -1;
        if (total > 0.0) {
            const double r = rng.uniform() * total;
            double acc = 0.0;
            for (int i = 0; i < n; ++i) {
                acc += d2[i];
                if (r < acc) { pick = i; break; }
            }
            if (pick < 0) pick = n - 1;
        } else {
            for (int i = 0; i < n; ++i)
                if (!chosen[i]) { pick = i; break; }
            if (pick < 0) pick = 0;  // all points coincide
        }
        centroids.push_back(pts[pick]);
        chosen[pick] = true;
    }

    std::vector<int> assign(n, 0);
    for (int iter = 0; iter < 100; ++iter) {
        for (int i = 0; i < n; ++i) {
            int best = 0;
            double bd = dist2(pts[i], centroids[0]);
            for (int c = 1; c < k; ++c) {
                const double d = dist2(pts[i], centroids[c]);
                if (d < bd) { bd = d; best = c; }
            }
            assign[i] = best;
        }
        double shift = 0.0;
        for (int c = 0; c < k; ++c) {
            Point mean{0.0, 0.0};
            int count = 0;
            for (int i = 0; i < n; ++i)
                if (assign[i] == c) { mean.x += pts[i].x; mean.y += pts[i].y; ++count; }
            if (count == 0) continue;
            mean.x /= count;
            mean.y /= count;
            shift = std::max(shift, std::sqrt(dist2(mean, centroids[c])));
            centroids[c] = mean;
        }
        if (shift < 1e-6) break;
    }

    // repair empties by stealing the farthest point from the largest cluster
    std::vector<int> counts(k, 0);
    for (int i = 0; i < n; ++i) ++counts[assign[i]];
    for (int c = 0; c < k; ++c) {
        while (counts[c] == 0) {
            int largest = 0;
            for (int j = 1; j < k; ++j)
                if (counts[j] > counts[largest]) largest = j;
            int far = -1;
            double fd = -1.0;
            for (int i = 0; i < n; ++i) {
                if (assign[i] != largest) continue;
                const double d = dist2(pts[i], centroids[largest]);
                if (d > fd) { fd = d; far = i; }
            }
            assign[far] = c;
            centroids[c] = pts[far];
            --counts[largest];
            ++counts[c];
        }
    }

    std::vector<Cluster> clusters(k);
    for (int c = 0; c < k; ++c) clusters[c].id = c;
    for (int i = 0; i < n; ++i) clusters[assign[i]].member_node_ids.push_back(nodes[i].id);
    std::sort(clusters.begin(), clusters.end(), [](const Cluster& a, const Cluster& b) {
        return a.member_node_ids.front() < b.member_node_ids.front();
    });
    for (int c = 0; c < k; ++c) clusters[c].id = c;
    return clusters;
}

double tolerance_schedule(const ToleranceSchedule& sched, int global_round) {
    return std::min(sched.alpha_max, sched.alpha0 + sched.rho * global_round);
}

Action clamp_frequency(Action a, double per_training_time, double alpha_tol, double t_min) {
    if (a.a * per_training_time > alpha_tol * t_min) {
        const int capped =
            static_cast<int>(std::floor(alpha_tol * t_min / per_training_time));
        return {std::max(1, capped)};
    }
    return a;
}

ModelParams trust_weighted_cluster_aggregate(const std::vector<Upload>& uploads,
                                             const std::map<int, double>& reputations) {
    return trust_weighted_aggregate(uploads, reputations);
}

ModelParams time_weighted_global_aggregate(const std::vector<ModelParams>& cluster_params,
                                           const std::vector<int>& timestamps, int t) {
    if (cluster_params.empty()) throw BadRange("no clusters to aggregate");
    if (cluster_params.size() != timestamps.size())
        throw LengthMismatch("cluster params/timestamp count mismatch");

    std::vector<double> weights(cluster_params.size());
    double total = 0.0;
    for (std::size_t j = 0; j < weights.size(); ++j) {
        if (timestamps[j] > t) throw BadRange("timestamp beyond current round");
        weights[j] = std::pow(M_E / 2.0, -static_cast<double>(t - timestamps[j]));
        total += weights[j];
    }
    ModelParams out = cluster_params[0];
    std::fill(out.flat.begin(), out.flat.end(), 0.0);
    for (std::size_t j = 0; j < weights.size(); ++j) {
        const double w = weights[j] / total;
        for (std::size_t i = 0; i < out.flat.size(); ++i)
            out.flat[i] += w * cluster_params[j].flat[i];
    }
    return out;
}

// ---------------------------------------------------------------------------
// ClusterSim

ClusterSim::ClusterSim(const Scenario& scenario, const Cluster& cluster,
                       const FederationConfig& cfg, double budget_share, int horizon,
                       Rng stream)
    : scenario_(&scenario), cluster_(cluster), cfg_(&cfg), budget_share_(budget_share),
      horizon_(horizon), stream_(stream), trainer_cfg_(cfg.trainer),
      train_rng_(stream.substream("train")),
      channel_rng_(stream.substream("channel")),
      deviation_rng_(stream.substream("twin-deviation")) {
    trainer_cfg_.noisy_sigma = scenario.config.noisy_sigma;
    reset();
}

void ClusterSim::reset() {
    members_.clear();
    twins_.clear();
    for (int id : cluster_.member_node_ids) {
        members_.push_back(scenario_->nodes[id]);
        twins_.push_back(scenario_->twins[id]);
    }
    local_params_ = scenario_->initial_params;
    for (DeviceNode& m : members_) {
        m.params = local_params_;
        m.energy_spent = 0.0;
    }
    queue_ = DeficitQueue{0.0, budget_share_, scenario_->config.budget_fraction, horizon_, 0.0};
    channel_ = cfg_->pinned_channel
                   ? ChannelState::pinned(*cfg_->pinned_channel)
                   : ChannelState::from_stationary_good(cfg_->p_good, cfg_->channel_persistence);
    deviation_estimate_.assign(members_.size(),
                               0.5 * (scenario_->config.deviation_lo +
                                      scenario_->config.deviation_hi));
    deviation_samples_ = 1;  // the prior counts as one observation
    ledger_.clear();
    for (int id : cluster_.member_node_ids) {
        ReputationRecord rec;
        rec.curator_id = cluster_.id;
        rec.node_id = id;
        rec.uncertainty_coeff = cfg_->uncertainty_coeff;
        ledger_[id] = rec;
    }
    prev_action_ = 1;
    slot_index_ = 0;
    refresh_member_stats();
}

double ClusterSim::freq_view(std::size_t member_idx) const {
    const DigitalTwin& twin = twins_[member_idx];
    return cfg_->calibrated ? calibrate_twin(twin) : twin.mapped_cpu_freq;
}

double ClusterSim::per_training_time(bool calibrated_view) const {
    double worst = 0.0;
    for (std::size_t i = 0; i < members_.size(); ++i) {
        const DigitalTwin& twin = twins_[i];
        const double f = calibrated_view ? calibrate_twin(twin) : twin.mapped_cpu_freq;
        worst = std::max(worst, cfg_->energy.cycles_per_training / f);
    }
    return worst;
}

double ClusterSim::upload_time() const {
    const ChannelParams cp = channel_params_for(channel_, cfg_->channel);
    return cfg_->energy.model_bits / channel_capacity(cp.alloc);
}

void ClusterSim::refresh_member_stats() {
    member_losses_.resize(members_.size());
    member_hidden_.resize(members_.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < members_.size(); ++i) {
        const ShardStats s = shard_stats(local_params_, members_[i].shard);
        member_losses_[i] = s.loss;
        member_hidden_[i] = s.hidden_mean;
        acc += s.loss;
    }
    cluster_loss_ = acc / static_cast<double>(members_.size());
}

void ClusterSim::install_params(const ModelParams& p) {
    local_params_ = p;
    for (DeviceNode& m : members_) m.params = p;
    refresh_member_stats();
}

double ClusterSim::reputation_of(int node_id) const {
    const auto it = ledger_.find(node_id);
    return it == ledger_.end() ? 0.0 : reputation(it->second);
}

MdpState ClusterSim::state() const {
    return encode_state(member_losses_, member_hidden_,
                        queue_.q / queue_.slot_budget(), {prev_action_}, cfg_->a_max);
}

int ClusterSim::state_dim() const {
    return 2 * static_cast<int>(members_.size()) + cfg_->a_max + 1;
}

ClusterSim::SlotResult ClusterSim::run_slot(int local_updates) {
    SlotResult res;
    res.loss_before = cluster_loss_;

    // twins re-estimate their instantaneous mapping deviation every slot and
    // fold it into the empirical (running mean) estimate used by the curator
    for (std::size_t i = 0; i < members_.size(); ++i) {
        DigitalTwin& twin = twins_[i];
        twin.deviation = sample_dt_deviation(deviation_rng_, scenario_->config.deviation_lo,
                                             scenario_->config.deviation_hi);
        twin.mapped_cpu_freq = members_[i].true_cpu_freq - twin.deviation;
        deviation_estimate_[i] =
            (deviation_estimate_[i] * deviation_samples_ + twin.deviation) /
            (deviation_samples_ + 1);
    }
    ++deviation_samples_;

    const double v = v_schedule(cfg_->penalty, slot_index_);

    // the channel evolves with training time: one step per local update
    for (int tick = 0; tick < local_updates; ++tick) step_channel(channel_, channel_rng_);
    // opportunistic transmit scheduling: hold the upload briefly if the
    // channel is poor right now
    while (channel_.state != ChannelQuality::Good &&
           res.waited_ticks < cfg_->channel.upload_patience) {
        step_channel(channel_, channel_rng_);
        ++res.waited_ticks;
    }
    res.upload_state = channel_.state;

    std::vector<Upload> uploads;
    uploads.reserve(members_.size());
    double e_cmp_view_per_update = 0.0;
    double e_com_view = 0.0;
    double e_cmp_actual = 0.0;
    double e_com_actual = 0.0;
    std::vector<TrainReport> reports(members_.size());
    for (std::size_t i = 0; i < members_.size(); ++i) {
        DeviceNode& m = members_[i];
        auto [trained, report] =
            local_train_steps(m, local_params_, local_updates, trainer_cfg_, train_rng_);
        m.params = std::move(trained);
        reports[i] = report;

        const ChannelParams cp = sample_channel_params(channel_, cfg_->channel, channel_rng_);
        const double e_com_i = comm_energy(cp.alloc, cfg_->energy);
        const double e_cmp_true_i =
            compute_energy(local_updates, cfg_->energy, m.true_cpu_freq);
        e_cmp_view_per_update += compute_energy(1, cfg_->energy, freq_view(i));
        e_com_view += e_com_i;
        e_cmp_actual += e_cmp_true_i;
        e_com_actual += e_com_i;
        m.energy_spent += e_cmp_true_i + e_com_i;

        Upload up;
        up.node_id = m.id;
        up.params = m.params;
        up.timestamp = slot_index_;
        up.failure_prob = cp.failure_prob;
        uploads.push_back(std::move(up));
    }

    std::set<int> flagged =
        gradient_diversity_flags(uploads, local_params_, cfg_->diversity_threshold);
    const std::set<int> norm_flagged = update_norm_flags(
        uploads, local_params_, cfg_->norm_screen_hi, cfg_->norm_screen_lo);
    flagged.insert(norm_flagged.begin(), norm_flagged.end());

    const std::map<int, double> quality = learning_quality(uploads);
    std::map<int, double> reputations;
    last_rep_rows_.clear();
    for (std::size_t i = 0; i < members_.size(); ++i) {
        const int id = members_[i].id;
        ReputationRecord& rec = ledger_[id];
        const double dev = cfg_->calibrated ? deviation_estimate_[i] : 1.0;
        const double u = uploads[i].failure_prob;
        const double q = quality.at(id);
        const bool is_flagged = flagged.count(id) > 0;
        // the slot's belief reflects the slot's own interaction verdict
        const double b = belief(u, q, dev, rec.alpha + (is_flagged ? 0.0 : 1.0),
                                rec.beta + (is_flagged ? 1.0 : 0.0));
        record_interaction(rec, is_flagged, b, u, q);
        const double t = reputation(rec);
        reputations[id] = t;
        last_rep_rows_.push_back(
            {slot_index_, cluster_.id, id, rec.alpha, rec.beta, b, u, q, t});
    }

    local_params_ = trust_weighted_aggregate(uploads, reputations);
    for (std::size_t i = 0; i < members_.size(); ++i) {
        members_[i].params = local_params_;
        twins_[i].mapped_loss = reports[i].loss_after;
        twins_[i].mapped_energy = members_[i].energy_spent;
    }
    refresh_member_stats();
    res.loss_after = cluster_loss_;

    res.reward = drift_penalty_value(v, res.loss_before, res.loss_after, queue_,
                                     local_updates, e_cmp_view_per_update, e_com_view);
    res.penalty_value = res.reward;
    queue_update(queue_, local_updates, e_cmp_view_per_update, e_com_view);

    res.e_cmp_view = e_cmp_view_per_update;
    res.e_com_view = e_com_view;
    res.e_cmp_actual = e_cmp_actual;
    res.e_com_actual = e_com_actual;
    res.queue_after = queue_.q;
    res.exhausted = budget_exhausted(queue_);

    prev_action_ = local_updates;
    ++slot_index_;
    return res;
}

// ---------------------------------------------------------------------------
// FlClusterEnv

MdpState FlClusterEnv::reset() {
    sim_.reset();
    return sim_.state();
}

DqnEnv::StepResult FlClusterEnv::step(const Action& action) {
    const ClusterSim::SlotResult sr = sim_.run_slot(action.a);
    StepResult out;
    out.reward = sr.reward;
    out.next = sim_.state();
    out.terminal = sr.exhausted || sim_.slots_done() >= horizon_;
    return out;
}

// ---------------------------------------------------------------------------
// run_federation

namespace {

int fixed_action(const FederationConfig& cfg) {
    return std::clamp(cfg.fixed_frequency, 1, cfg.a_max);
}

}  // namespace

MetricsTrace run_federation(const Scenario& scenario, const FederationConfig& cfg,
                            int rounds) {
    const int k = cfg.mode == FedMode::SyncFixed ? 1 : scenario.config.num_clusters;
    Rng fed_root = Rng(scenario.config.seed).substream("federation");

    Rng cluster_rng = fed_root.substream("cluster");
    const std::vector<Cluster> clusters = cluster_nodes(scenario.nodes, k, cluster_rng);
    const double budget_share = scenario.config.budget_total / k;

    std::vector<std::unique_ptr<ClusterSim>> sims;
    sims.reserve(clusters.size());
    for (const Cluster& c : clusters)
        sims.push_back(std::make_unique<ClusterSim>(scenario, c, cfg, budget_share, rounds,
                                                    fed_root.substream("sim", c.id)));

    MetricsTrace trace;

    // Train one agent per cluster before the run; training happens against a
    // sandboxed copy of the cluster so the run starts from a fresh state.
    std::vector<QNetwork> agents(clusters.size());
    if (cfg.mode == FedMode::AsyncDqn) {
        for (std::size_t j = 0; j < clusters.size(); ++j) {
            FlClusterEnv env(scenario, clusters[j], cfg, budget_share, rounds,
                             fed_root.substream("dqn-env", clusters[j].id));
            Rng train_rng = fed_root.substream("dqn-train", clusters[j].id);
            DqnTrainingResult result = run_dqn_training(env, cfg.dqn, train_rng);
            agents[j] = std::move(result.eval_net);
            trace.dqn_steps.insert(trace.dqn_steps.end(), result.steps.begin(),
                                   result.steps.end());
        }
    }

    Rng greedy_rng = fed_root.substream("greedy");
    const bool has_test = !scenario.test_set.empty();
    double global_acc = has_test ? accuracy(scenario.initial_params, scenario.test_set) : 0.0;
    double sim_time = 0.0;
    std::vector<int> rounds_since_merge(clusters.size(), 0);

    auto propose = [&](std::size_t j) -> int {
        if (cfg.mode == FedMode::AsyncDqn)
            return select_action(agents[j], sims[j]->state(), 1.0, greedy_rng).a;
        return fixed_action(cfg);
    };

    for (int epoch = 0; epoch < rounds; ++epoch) {
        std::vector<std::size_t> active;
        for (std::size_t j = 0; j < sims.size(); ++j)
            if (!sims[j]->exhausted()) active.push_back(j);
        if (active.empty()) break;

        const double alpha = tolerance_schedule(cfg.tolerance, epoch);

        std::vector<int> proposal(sims.size(), 0);
        std::vector<double> t_est(sims.size(), 0.0);
        double t_min = std::numeric_limits<double>::max();
        for (std::size_t j : active) {
            proposal[j] = propose(j);
            t_est[j] = sims[j]->per_training_time(cfg.calibrated);
            t_min = std::min(t_min, proposal[j] * t_est[j]);
        }

        auto decide = [&](std::size_t j, int raw) {
            const int executed = cfg.mode == FedMode::AsyncDqn
                                     ? clamp_frequency({raw}, t_est[j], alpha, t_min).a
                                     : raw;
            trace.decisions.push_back(
                {epoch, sims[j]->id(), raw, executed, t_est[j], t_min, alpha});
            return executed;
        };

        double epoch_e_cmp = 0.0;
        double epoch_e_com = 0.0;
        std::vector<double> time_used(sims.size(), 0.0);

        auto run_one = [&](std::size_t j, int a) {
            const ClusterSim::SlotResult sr = sims[j]->run_slot(a);
            const double phase = (a + sr.waited_ticks) * sims[j]->per_training_time(true) +
                                 sims[j]->upload_time();
            time_used[j] += phase;
            ++rounds_since_merge[j];

            RoundRow row;
            row.round = epoch;
            row.simulated_time = sim_time + time_used[j];
            row.cluster_id = sims[j]->id();
            row.a_i = a;
            row.local_loss = sr.loss_after;
            row.global_accuracy = global_acc;
            row.queue = sr.queue_after;
            row.e_cmp = sr.e_cmp_actual;
            row.e_com = sr.e_com_actual;
            row.channel_state = sr.upload_state;
            trace.rounds.push_back(row);

            for (ReputationRow rep : sims[j]->last_slot_reputation()) {
                rep.round = epoch;
                trace.reputation.push_back(rep);
            }
            trace.queue.push_back({epoch, sr.queue_after, sims[j]->queue().consumed,
                                   sims[j]->queue().slot_budget(), sr.penalty_value});

            epoch_e_cmp += sr.e_cmp_actual;
            epoch_e_com += sr.e_com_actual;
            trace.total_e_cmp += sr.e_cmp_actual;
            trace.total_e_com += sr.e_com_actual;
            trace.max_queue = std::max(trace.max_queue, sr.queue_after);
        };

        // first local round of the epoch fixes the epoch duration
        for (std::size_t j : active) run_one(j, decide(j, proposal[j]));
        double epoch_duration = 0.0;
        for (std::size_t j : active) epoch_duration = std::max(epoch_duration, time_used[j]);

        // faster clusters keep training until the epoch window closes
        for (std::size_t j : active) {
            while (!sims[j]->exhausted()) {
                const int a = decide(j, propose(j));
                const double est =
                    a * sims[j]->per_training_time(true) + sims[j]->upload_time();
                if (time_used[j] + est > epoch_duration + 1e-9) break;
                run_one(j, a);
            }
        }

        sim_time += epoch_duration;

        if ((epoch + 1) % cfg.global_every == 0 || epoch == rounds - 1) {
            std::vector<ModelParams> params;
            std::vector<int> stamps;
            int t_now = 0;
            for (std::size_t j = 0; j < sims.size(); ++j)
                t_now = std::max(t_now, rounds_since_merge[j]);
            for (std::size_t j = 0; j < sims.size(); ++j) {
                if (rounds_since_merge[j] == 0) continue;  // nothing new to offer
                params.push_back(sims[j]->params());
                stamps.push_back(rounds_since_merge[j]);
            }
            if (!params.empty()) {
                const ModelParams merged =
                    time_weighted_global_aggregate(params, stamps, t_now);
                for (auto& sim : sims) sim->install_params(merged);
                if (has_test) global_acc = accuracy(merged, scenario.test_set);
                std::fill(rounds_since_merge.begin(), rounds_since_merge.end(), 0);
                GlobalAggregation agg;
                agg.epoch = epoch;
                agg.sim_time = sim_time;
                agg.curator_state = sims[0]->channel_state();
                agg.accuracy = global_acc;
                trace.aggregations.push_back(agg);
            }
        }

        trace.energy.push_back({epoch, sims[0]->channel_state(), epoch_e_cmp, epoch_e_com});
    }

    trace.final_accuracy = global_acc;
    // mean per-member loss of the installed global model
    double total = 0.0;
    int count = 0;
    for (const auto& sim : sims) {
        for (const DeviceNode& m : sim->members()) {
            total += local_loss(sim->params(), m.shard);
            ++count;
        }
    }
    trace.final_loss = count > 0 ? total / count : 0.0;
    trace.total_sim_time = sim_time;
    for (const auto& sim : sims) {
        trace.cluster_consumed.push_back(sim->queue().consumed);
        trace.cluster_budget.push_back(sim->queue().budget_fraction *
                                       sim->queue().budget_total);
    }
    return trace;
}

}  // namespace dtfl
