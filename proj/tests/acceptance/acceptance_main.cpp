// Acceptance suite: one check per shipped claim, each printing a single
// PASS/FAIL line. Run all with no arguments, or a single check with
// --criterion N.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <thread>
#include <vector>

#include "dtfl/experiment.hpp"
#include "dtfl/text.hpp"
#include "dtfl/trainer.hpp"
#include "dtfl/trust.hpp"

using namespace dtfl;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double median_of(std::vector<double> v) { return quantile(std::move(v), 0.5); }

// Seeds spread across a small pool of worker threads; results land in
// pre-sized slots so ordering never depends on scheduling.
void for_each_seed(int repeats, const std::function<void(int)>& fn) {
    const int threads = std::min<int>(repeats, 2);
    if (threads <= 1) {
        for (int r = 0; r < repeats; ++r) fn(r);
        return;
    }
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            while (true) {
                const int r = next.fetch_add(1);
                if (r >= repeats) return;
                fn(r);
            }
        });
    }
    for (auto& th : pool) th.join();
}

constexpr std::uint64_t kSeedBase = 1000;

ExperimentSpec default_spec() {
    ExperimentSpec spec;
    spec.scenario.seed = kSeedBase;
    return spec;
}

MetricsTrace run_with(const ScenarioConfig& sc, const FederationConfig& fed) {
    const Scenario scenario = init_scenario(sc);
    FederationConfig cfg = fed;
    if (cfg.energy.model_bits <= 0.0) {
        cfg.energy.model_bits =
            64.0 * static_cast<double>(ModelParams::param_count(
                       scenario.feature_dim, sc.hidden_dim, sc.num_classes));
    }
    return run_federation(scenario, cfg, sc.rounds_max);
}

// ---------------------------------------------------------------------------
// 1. closed-form oracle suite

Outcome criterion1() {
    std::ostringstream log;
    const bool ok = run_formula_selftest(log);
    Outcome out;
    out.pass = ok;
    out.detail = ok ? "all hand-computed formula checks matched (rel 1e-9)"
                    : "formula mismatches:\n" + log.str();
    return out;
}

// ---------------------------------------------------------------------------
// 2. gradient correctness against central finite differences

double fl_gradient_worst_error(Rng& rng) {
    const int in = 2 + static_cast<int>(rng.below(2));
    const int hidden = 2 + static_cast<int>(rng.below(2));
    const int classes = 2 + static_cast<int>(rng.below(2));
    ModelParams p(in, hidden, classes);
    for (double& v : p.flat) v = rng.uniform(-0.8, 0.8);
    DatasetShard shard;
    for (int i = 0; i < 5; ++i) {
        Sample s;
        s.features.resize(in);
        for (double& v : s.features) v = rng.uniform(-1.0, 1.0);
        s.label = static_cast<int>(rng.below(classes));
        shard.samples.push_back(std::move(s));
    }
    const std::vector<double> g = gradient(p, shard.samples);
    const double h = 1e-5;
    double worst = 0.0;
    for (std::size_t k = 0; k < p.flat.size(); ++k) {
        ModelParams lo = p, hi = p;
        lo.flat[k] -= h;
        hi.flat[k] += h;
        const double fd = (local_loss(hi, shard) - local_loss(lo, shard)) / (2 * h);
        worst = std::max(worst, std::abs(g[k] - fd) / std::max(1.0, std::abs(fd)));
    }
    return worst;
}

double td_gradient_worst_error(Rng& rng) {
    const int state_dim = 3;
    const int a_max = 2;
    ReplayBuffer buf(4);
    for (int i = 0; i < 4; ++i) {
        Experience e;
        e.state.encoded = {rng.uniform(), rng.uniform(), rng.uniform()};
        e.next_state.encoded = {rng.uniform(), rng.uniform(), rng.uniform()};
        e.action = {1 + static_cast<int>(rng.below(a_max))};
        e.reward = rng.uniform(-1.0, 1.0);
        buf.push(e);
    }
    QNetwork eval;
    eval.net = ModelParams(state_dim, 2, a_max);
    for (double& v : eval.net.flat) v = rng.uniform(-0.5, 0.5);
    const QNetwork target = eval;

    DqnConfig cfg;
    cfg.batch_size = 4;
    cfg.lr = 1e-3;
    cfg.gamma = 0.9;

    std::vector<Experience> all;
    std::vector<double> targets;
    for (std::size_t i = 0; i < buf.size(); ++i) {
        all.push_back(buf[i]);
        targets.push_back(q_target(target, buf[i], cfg.gamma));
    }
    QNetwork stepped = eval;
    Rng step_rng(1);
    train_step(stepped, target, buf, cfg, step_rng);

    const double h = 1e-5;
    double worst = 0.0;
    for (std::size_t k = 0; k < eval.net.flat.size(); ++k) {
        QNetwork lo = eval, hi = eval;
        lo.net.flat[k] -= h;
        hi.net.flat[k] += h;
        const double fd = (td_loss(hi, all, targets) - td_loss(lo, all, targets)) / (2 * h);
        const double applied = (eval.net.flat[k] - stepped.net.flat[k]) / cfg.lr;
        worst = std::max(worst, std::abs(applied - fd) / std::max(1.0, std::abs(fd)));
    }
    return worst;
}

Outcome criterion2() {
    Rng rng(2024);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial)
        worst = std::max(worst, fl_gradient_worst_error(rng));
    for (int trial = 0; trial < 50; ++trial)
        worst = std::max(worst, td_gradient_worst_error(rng));
    Outcome out;
    out.pass = worst < 1e-4;
    out.detail = "max relative error " + fmt_double(worst, 6) + " over 100 trials (< 1e-4)";
    return out;
}

// ---------------------------------------------------------------------------
// 3. DQN training loss settles (loss at step 1200 <= 50% of step 200)

DqnTrainingResult train_default_dqn(std::uint64_t seed) {
    ExperimentSpec spec = default_spec();
    spec.scenario.seed = seed;
    const Scenario scenario = init_scenario(spec.scenario);
    FederationConfig cfg = spec.fed;
    cfg.energy.model_bits = 64.0 * static_cast<double>(ModelParams::param_count(
                                       scenario.feature_dim, spec.scenario.hidden_dim,
                                       spec.scenario.num_classes));
    Cluster all;
    all.id = 0;
    for (const DeviceNode& n : scenario.nodes) all.member_node_ids.push_back(n.id);
    Rng fed_root = Rng(seed).substream("federation");
    FlClusterEnv env(scenario, all, cfg, spec.scenario.budget_total,
                     spec.scenario.rounds_max, fed_root.substream("dqn-env", 0));
    Rng train_rng = fed_root.substream("dqn-train", 0);
    return run_dqn_training(env, cfg.dqn, train_rng);
}

double window_mean(const std::vector<double>& trace, std::size_t end, std::size_t window) {
    double acc = 0.0;
    for (std::size_t i = end - window; i < end; ++i) acc += trace[i];
    return acc / static_cast<double>(window);
}

Outcome criterion3() {
    const int repeats = 3;
    std::vector<double> ratios(repeats);
    std::vector<std::size_t> lengths(repeats);
    for_each_seed(repeats, [&](int r) {
        const DqnTrainingResult result = train_default_dqn(kSeedBase + r);
        lengths[r] = result.loss_trace.size();
        if (result.loss_trace.size() >= 1200) {
            const double early = window_mean(result.loss_trace, 200, 100);
            const double late = window_mean(result.loss_trace, 1200, 100);
            ratios[r] = late / early;
        } else {
            ratios[r] = 1e9;
        }
    });
    Outcome out;
    std::size_t min_len = *std::min_element(lengths.begin(), lengths.end());
    const double med = median_of(ratios);
    out.pass = min_len >= 1200 && med <= 0.5;
    out.detail = "median smoothed-loss ratio step1200/step200 = " + fmt_double(med, 4) +
                 " (<= 0.5), min trace length " + std::to_string(min_len);
    return out;
}

// ---------------------------------------------------------------------------
// 4. twin calibration A/B: calibrated accuracy >= uncalibrated

Outcome criterion4() {
    const int repeats = 3;
    std::vector<double> calibrated(repeats), uncalibrated(repeats);
    for_each_seed(repeats, [&](int r) {
        ExperimentSpec spec = default_spec();
        spec.scenario.seed = kSeedBase + r;
        FederationConfig fed = spec.fed;
        fed.mode = FedMode::AsyncFixed;
        fed.fixed_frequency = 5;
        fed.calibrated = true;
        calibrated[r] = run_with(spec.scenario, fed).final_accuracy;
        fed.calibrated = false;
        uncalibrated[r] = run_with(spec.scenario, fed).final_accuracy;
    });
    Outcome out;
    const double cal = median_of(calibrated), uncal = median_of(uncalibrated);
    out.pass = cal >= uncal;
    out.detail = "median final accuracy calibrated " + fmt_double(cal, 4) +
                 " vs uncalibrated " + fmt_double(uncal, 4);
    return out;
}

// ---------------------------------------------------------------------------
// 5. per-channel energy ordering good < medium < bad, every seed

Outcome criterion5() {
    const int repeats = 3;
    std::vector<std::array<double, 3>> totals(repeats);
    for_each_seed(repeats, [&](int r) {
        ExperimentSpec spec = default_spec();
        spec.scenario.seed = kSeedBase + r;
        spec.scenario.budget_total = 1e12;  // fixed round count, not budget-halted
        for (int s = 0; s < 3; ++s) {
            FederationConfig fed = spec.fed;
            fed.mode = FedMode::AsyncFixed;
            fed.pinned_channel = static_cast<ChannelQuality>(s);
            const MetricsTrace t = run_with(spec.scenario, fed);
            totals[r][s] = t.total_e_cmp + t.total_e_com;
        }
    });
    bool ok = true;
    std::string detail;
    for (int r = 0; r < repeats; ++r) {
        ok = ok && totals[r][0] < totals[r][1] && totals[r][1] < totals[r][2];
        detail += "seed" + std::to_string(r) + " good/medium/bad = " +
                  fmt_double(totals[r][0], 6) + "/" + fmt_double(totals[r][1], 6) + "/" +
                  fmt_double(totals[r][2], 6) + (r + 1 < repeats ? "; " : "");
    }
    return {ok, detail};
}

// ---------------------------------------------------------------------------
// 6. the trained agent aggregates in good channel states more often than
//    the stationary share

Outcome criterion6() {
    const std::vector<double> p_goods{0.4, 0.6, 0.8};
    const int repeats = 3;
    std::vector<std::vector<double>> fracs(p_goods.size(),
                                           std::vector<double>(repeats, 0.0));
    std::vector<std::pair<std::size_t, int>> jobs;
    for (std::size_t p = 0; p < p_goods.size(); ++p)
        for (int r = 0; r < repeats; ++r) jobs.push_back({p, r});
    for_each_seed(static_cast<int>(jobs.size()), [&](int j) {
        const auto [p, r] = jobs[j];
        ExperimentSpec spec = default_spec();
        spec.scenario.seed = kSeedBase + r;
        spec.scenario.num_nodes = 10;
        spec.scenario.num_clusters = 1;
        spec.scenario.dataset.samples_per_node = 100;
        spec.scenario.budget_total = 9000.0;
        FederationConfig fed = spec.fed;
        fed.mode = FedMode::AsyncDqn;
        fed.p_good = p_goods[p];
        fed.channel_persistence = 0.7;
        fed.tolerance.alpha0 = 1.0;
        fed.dqn.episodes = 30;
        fed.dqn.capacity = 300;
        const MetricsTrace t = run_with(spec.scenario, fed);
        double good = 0.0;
        for (const GlobalAggregation& a : t.aggregations)
            if (a.curator_state == ChannelQuality::Good) good += 1.0;
        fracs[p][r] = t.aggregations.empty()
                          ? 0.0
                          : good / static_cast<double>(t.aggregations.size());
    });
    bool ok = true;
    std::string detail;
    for (std::size_t p = 0; p < p_goods.size(); ++p) {
        const double med = median_of(fracs[p]);
        ok = ok && med > p_goods[p];
        detail += "p_good " + fmt_double(p_goods[p], 3) + ": median frac " +
                  fmt_double(med, 4) + (p + 1 < p_goods.size() ? "; " : "");
    }
    return {ok, detail};
}

// ---------------------------------------------------------------------------
// 7. clustering shortens time-to-accuracy on heterogeneous hardware

double time_to_accuracy(const MetricsTrace& trace, double target) {
    for (const GlobalAggregation& a : trace.aggregations)
        if (a.accuracy >= target) return a.sim_time;
    return std::numeric_limits<double>::infinity();
}

Outcome criterion7() {
    const int repeats = 3;
    std::vector<double> t_k1(repeats), t_k4(repeats);
    for_each_seed(repeats, [&](int r) {
        ExperimentSpec spec = default_spec();
        spec.scenario.seed = kSeedBase + r;
        spec.scenario.budget_total = 1e12;  // isolate the time effect
        FederationConfig fed = spec.fed;
        fed.mode = FedMode::AsyncFixed;
        fed.fixed_frequency = 5;
        ScenarioConfig sc = spec.scenario;
        sc.num_clusters = 1;
        t_k1[r] = time_to_accuracy(run_with(sc, fed), 0.85);
        sc.num_clusters = 4;
        t_k4[r] = time_to_accuracy(run_with(sc, fed), 0.85);
    });
    Outcome out;
    const double m1 = median_of(t_k1), m4 = median_of(t_k4);
    out.pass = m4 < m1;
    out.detail = "median time to 85% accuracy: k=4 " + fmt_double(m4, 6) + " vs k=1 " +
                 fmt_double(m1, 6);
    return out;
}

// ---------------------------------------------------------------------------
// 8/9. adaptive frequency control vs fixed baselines, plus budget discipline

struct AdaptiveRun {
    std::vector<double> dqn_final;
    std::vector<std::vector<double>> fixed_final;  // [t_index][seed]
    std::vector<MetricsTrace> dqn_traces;
    std::vector<int> fixed_ts;
};

AdaptiveRun run_adaptive_vs_fixed() {
    AdaptiveRun out;
    out.fixed_ts = {1, 5, 10};
    const int repeats = 3;
    out.dqn_final.resize(repeats);
    out.dqn_traces.resize(repeats);
    out.fixed_final.assign(out.fixed_ts.size(), std::vector<double>(repeats, 0.0));

    std::vector<std::pair<int, int>> jobs;  // (arm, seed): arm 0 = dqn
    for (int arm = 0; arm <= static_cast<int>(out.fixed_ts.size()); ++arm)
        for (int r = 0; r < repeats; ++r) jobs.push_back({arm, r});
    for_each_seed(static_cast<int>(jobs.size()), [&](int j) {
        const auto [arm, r] = jobs[j];
        ExperimentSpec spec = default_spec();
        spec.scenario.seed = kSeedBase + r;
        FederationConfig fed = spec.fed;
        if (arm == 0) {
            fed.mode = FedMode::AsyncDqn;
            const MetricsTrace t = run_with(spec.scenario, fed);
            out.dqn_final[r] = t.final_accuracy;
            out.dqn_traces[r] = t;
        } else {
            fed.mode = FedMode::AsyncFixed;
            fed.fixed_frequency = out.fixed_ts[arm - 1];
            out.fixed_final[arm - 1][r] = run_with(spec.scenario, fed).final_accuracy;
        }
    });
    return out;
}

Outcome criterion8() {
    const AdaptiveRun run = run_adaptive_vs_fixed();
    double best_fixed = 0.0;
    std::string per_arm;
    for (std::size_t t = 0; t < run.fixed_ts.size(); ++t) {
        const double med = median_of(run.fixed_final[t]);
        best_fixed = std::max(best_fixed, med);
        per_arm += "T=" + std::to_string(run.fixed_ts[t]) + ": " + fmt_double(med, 4) + " ";
    }
    const double dqn = median_of(run.dqn_final);
    Outcome out;
    out.pass = dqn >= best_fixed - 0.01;
    out.detail = "median final accuracy adaptive " + fmt_double(dqn, 4) +
                 " vs best fixed " + fmt_double(best_fixed, 4) + " (" + per_arm + ")";
    return out;
}

Outcome criterion9() {
    const AdaptiveRun run = run_adaptive_vs_fixed();
    bool ok = true;
    double worst_ratio = 0.0;
    double worst_queue = 0.0;
    for (const MetricsTrace& t : run.dqn_traces) {
        for (std::size_t c = 0; c < t.cluster_consumed.size(); ++c) {
            const double ratio = t.cluster_consumed[c] / t.cluster_budget[c];
            worst_ratio = std::max(worst_ratio, ratio);
            if (ratio > 1.05) ok = false;
        }
        const double slot = t.cluster_budget.empty()
                                ? 1.0
                                : t.cluster_budget[0] / default_spec().scenario.rounds_max;
        const double qratio = t.max_queue / slot;
        worst_queue = std::max(worst_queue, qratio);
        if (qratio >= 10.0) ok = false;
    }
    Outcome out;
    out.pass = ok;
    out.detail = "worst consumption/budget " + fmt_double(worst_ratio, 4) +
                 " (<= 1.05), worst queue/slot-budget " + fmt_double(worst_queue, 4) +
                 " (< 10)";
    return out;
}

// ---------------------------------------------------------------------------
// 10. repeated experiments are byte-identical

Outcome criterion10() {
    const fs::path base = fs::temp_directory_path() / "dtfl_acceptance_det";
    const fs::path out_a = base / "a";
    const fs::path out_b = base / "b";
    fs::remove_all(base);

    ExperimentSpec spec = default_spec();
    spec.scenario.num_nodes = 6;
    spec.scenario.num_clusters = 2;
    spec.scenario.rounds_max = 6;
    spec.scenario.dataset.samples_per_node = 40;
    spec.scenario.dataset.test_samples = 100;
    spec.repeats = 2;
    spec.figures = {"fig5_energy", "fig3_dt_calibration"};

    spec.output_dir = out_a.string();
    run_experiment(spec, 2);
    spec.output_dir = out_b.string();
    run_experiment(spec, 1);

    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(out_a))
        if (entry.is_regular_file()) files.push_back(fs::relative(entry.path(), out_a));
    std::sort(files.begin(), files.end());
    bool ok = !files.empty();
    std::string first_diff;
    for (const fs::path& rel : files) {
        std::ifstream fa(out_a / rel, std::ios::binary);
        std::ifstream fb(out_b / rel, std::ios::binary);
        std::ostringstream sa, sb;
        sa << fa.rdbuf();
        sb << fb.rdbuf();
        if (sa.str() != sb.str()) {
            ok = false;
            if (first_diff.empty()) first_diff = rel.string();
        }
    }
    fs::remove_all(base);
    Outcome out;
    out.pass = ok;
    out.detail = ok ? std::to_string(files.size()) + " files byte-identical across runs"
                    : "first differing file: " + first_diff;
    return out;
}

// ---------------------------------------------------------------------------
// 11. trust isolates a noisy attacker

Outcome criterion11() {
    const int repeats = 3;
    std::vector<double> rep_gap(repeats);       // honest median T - attacker T
    std::vector<double> clean_acc(repeats), attacked_acc(repeats);
    for_each_seed(repeats, [&](int r) {
        ExperimentSpec spec = default_spec();
        spec.scenario.seed = kSeedBase + r;
        spec.scenario.num_clusters = 1;  // reputations comparable across all nodes
        spec.scenario.budget_total = 1e12;
        FederationConfig fed = spec.fed;
        fed.mode = FedMode::AsyncFixed;
        fed.fixed_frequency = 5;

        ScenarioConfig clean = spec.scenario;
        clean_acc[r] = run_with(clean, fed).final_accuracy;

        ScenarioConfig attacked = spec.scenario;
        attacked.num_noisy = 1;
        const MetricsTrace t = run_with(attacked, fed);
        attacked_acc[r] = t.final_accuracy;

        const int attacker_id = attacked.num_nodes - 1;
        double attacker_T = 0.0;
        std::vector<double> honest_T;
        for (const ReputationRow& row : t.reputation) {
            if (row.round != 9) continue;  // after 10 rounds
            if (row.node == attacker_id) attacker_T = row.reputation;
            else honest_T.push_back(row.reputation);
        }
        rep_gap[r] = median_of(honest_T) - attacker_T;
    });
    const double gap = median_of(rep_gap);
    const double degradation = median_of(clean_acc) - median_of(attacked_acc);
    Outcome out;
    out.pass = gap > 0.0 && degradation < 0.02;
    out.detail = "median honest-median-minus-attacker reputation gap " +
                 fmt_double(gap, 4) + " (> 0), accuracy degradation " +
                 fmt_double(degradation, 4) + " (< 0.02)";
    return out;
}

struct Criterion {
    int id;
    const char* name;
    double time_limit_s;  // 0 = none stated
    std::function<Outcome()> fn;
};

const std::vector<Criterion>& criteria() {
    static const std::vector<Criterion> list = {
        {1, "formula oracle suite", 1.0, criterion1},
        {2, "gradient correctness vs finite differences", 10.0, criterion2},
        {3, "dqn training loss settles", 300.0, criterion3},
        {4, "twin calibration improves accuracy", 180.0, criterion4},
        {5, "energy ordering across channel states", 180.0, criterion5},
        {6, "agent favors good-channel aggregation", 0.0, criterion6},
        {7, "clustering shortens time to accuracy", 300.0, criterion7},
        {8, "adaptive frequency matches best fixed", 0.0, criterion8},
        {9, "budget and deficit queue stay bounded", 0.0, criterion9},
        {10, "experiments are byte-deterministic", 0.0, criterion10},
        {11, "noisy attacker isolated by trust", 0.0, criterion11},
    };
    return list;
}

}  // namespace

int main(int argc, char** argv) {
    int only = 0;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) {
            only = std::atoi(argv[++i]);
        } else if (std::strcmp(argv[i], "--list") == 0) {
            for (const Criterion& c : criteria())
                std::cout << c.id << ": " << c.name << "\n";
            return 0;
        }
    }

    bool all_pass = true;
    for (const Criterion& c : criteria()) {
        if (only != 0 && c.id != only) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = c.fn();
        } catch (const std::exception& e) {
            out.pass = false;
            out.detail = std::string("exception: ") + e.what();
        }
        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        bool pass = out.pass;
        std::string timing = fmt_double(seconds, 3) + "s";
        if (c.time_limit_s > 0.0) {
            timing += " (limit " + fmt_double(c.time_limit_s, 3) + "s)";
            if (seconds > c.time_limit_s) pass = false;
        }
        std::cout << (pass ? "PASS" : "FAIL") << " criterion " << c.id << ": " << c.name
                  << " -- " << out.detail << " [" << timing << "]\n";
        all_pass = all_pass && pass;
    }
    return all_pass ? 0 : 1;
}
