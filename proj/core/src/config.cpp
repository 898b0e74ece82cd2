#include <charconv>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>

#include "dtfl/errors.hpp"
#include "dtfl/experiment.hpp"
#include "dtfl/text.hpp"

namespace dtfl {

namespace {

struct KeyEntry {
    const char* key;
    const char* doc;
    std::function<void(ExperimentSpec&, const std::string&)> set;
    std::function<std::string(const ExperimentSpec&)> get;
};

int to_int(const std::string& s) {
    int v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw ParseError("expected integer, got '" + s + "'");
    return v;
}

std::uint64_t to_u64(const std::string& s) {
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw ParseError("expected unsigned integer, got '" + s + "'");
    return v;
}

double to_double(const std::string& s) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw ParseError("");
        return v;
    } catch (...) {
        throw ParseError("expected number, got '" + s + "'");
    }
}

bool to_bool(const std::string& s) {
    if (s == "1" || s == "true" || s == "on") return true;
    if (s == "0" || s == "false" || s == "off") return false;
    throw ParseError("expected boolean (0/1/true/false/on/off), got '" + s + "'");
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else if (!isspace(static_cast<unsigned char>(c))) {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

std::string join_doubles(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += fmt_double(v[i]);
    }
    return out;
}

std::string join_ints(const std::vector<int>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(v[i]);
    }
    return out;
}

FedMode mode_from(const std::string& s) {
    if (s == "async_dqn") return FedMode::AsyncDqn;
    if (s == "sync_fixed") return FedMode::SyncFixed;
    if (s == "async_fixed") return FedMode::AsyncFixed;
    throw ParseError("unknown mode '" + s + "'");
}

#define INT_KEY(key, doc, field)                                                   \
    {key, doc, [](ExperimentSpec& s, const std::string& v) { s.field = to_int(v); }, \
     [](const ExperimentSpec& s) { return std::to_string(s.field); }}
#define DBL_KEY(key, doc, field)                                                      \
    {key, doc, [](ExperimentSpec& s, const std::string& v) { s.field = to_double(v); }, \
     [](const ExperimentSpec& s) { return fmt_double(s.field); }}
#define BOOL_KEY(key, doc, field)                                                   \
    {key, doc, [](ExperimentSpec& s, const std::string& v) { s.field = to_bool(v); }, \
     [](const ExperimentSpec& s) { return std::string(s.field ? "1" : "0"); }}
#define STR_KEY(key, doc, field)                                           \
    {key, doc, [](ExperimentSpec& s, const std::string& v) { s.field = v; }, \
     [](const ExperimentSpec& s) { return s.field; }}

const std::vector<KeyEntry>& key_table() {
    static const std::vector<KeyEntry> table = {
        INT_KEY("scenario.num_nodes", "number of training devices", scenario.num_nodes),
        INT_KEY("scenario.num_clusters", "number of clusters / curators", scenario.num_clusters),
        {"scenario.seed", "base seed; repeat r uses seed+r",
         [](ExperimentSpec& s, const std::string& v) { s.scenario.seed = to_u64(v); },
         [](const ExperimentSpec& s) { return std::to_string(s.scenario.seed); }},
        DBL_KEY("scenario.budget_total", "total resource budget R_m", scenario.budget_total),
        DBL_KEY("scenario.budget_fraction", "usable fraction beta of R_m", scenario.budget_fraction),
        INT_KEY("scenario.num_classes", "label count", scenario.num_classes),
        INT_KEY("scenario.rounds_max", "global rounds (also the queue horizon)", scenario.rounds_max),
        DBL_KEY("scenario.label_skew", "fraction of a shard from its dominant class", scenario.label_skew),
        DBL_KEY("scenario.cpu_freq_lo", "slowest device frequency", scenario.cpu_freq_lo),
        DBL_KEY("scenario.cpu_freq_hi", "fastest device frequency", scenario.cpu_freq_hi),
        DBL_KEY("scenario.deviation_lo", "twin frequency deviation lower bound", scenario.deviation_lo),
        DBL_KEY("scenario.deviation_hi", "twin frequency deviation upper bound", scenario.deviation_hi),
        INT_KEY("scenario.num_noisy", "noisy attackers (highest node ids)", scenario.num_noisy),
        INT_KEY("scenario.num_lazy", "lazy attackers (ids below the noisy block)", scenario.num_lazy),
        DBL_KEY("scenario.noisy_sigma", "stddev of a noisy node's update corruption", scenario.noisy_sigma),
        INT_KEY("scenario.hidden_dim", "hidden units of the task network", scenario.hidden_dim),
        {"dataset.source", "synthetic | idx",
         [](ExperimentSpec& s, const std::string& v) {
             if (v == "synthetic") s.scenario.dataset.kind = DatasetSource::Kind::Synthetic;
             else if (v == "idx") s.scenario.dataset.kind = DatasetSource::Kind::Idx;
             else throw ParseError("unknown dataset source '" + v + "'");
         },
         [](const ExperimentSpec& s) {
             return std::string(s.scenario.dataset.kind == DatasetSource::Kind::Synthetic
                                    ? "synthetic" : "idx");
         }},
        INT_KEY("dataset.feature_dim", "synthetic feature dimension", scenario.dataset.feature_dim),
        INT_KEY("dataset.samples_per_node", "training samples per device", scenario.dataset.samples_per_node),
        INT_KEY("dataset.test_samples", "held-out evaluation samples", scenario.dataset.test_samples),
        DBL_KEY("dataset.center_spread", "blob center scale", scenario.dataset.center_spread),
        DBL_KEY("dataset.sample_noise", "blob sample noise", scenario.dataset.sample_noise),
        STR_KEY("dataset.idx_images", "IDX training image file", scenario.dataset.idx_images),
        STR_KEY("dataset.idx_labels", "IDX training label file", scenario.dataset.idx_labels),
        STR_KEY("dataset.idx_test_images", "IDX test image file", scenario.dataset.idx_test_images),
        STR_KEY("dataset.idx_test_labels", "IDX test label file", scenario.dataset.idx_test_labels),
        DBL_KEY("trainer.lr", "local learning rate", fed.trainer.lr),
        INT_KEY("trainer.batch_size", "local mini-batch size (0 = full batch)", fed.trainer.batch_size),
        DBL_KEY("trust.uncertainty_coeff", "iota weight of failure probability", fed.uncertainty_coeff),
        DBL_KEY("trust.diversity_threshold", "cosine similarity flag threshold", fed.diversity_threshold),
        DBL_KEY("trust.norm_screen_hi", "update-norm outlier factor (high side)", fed.norm_screen_hi),
        DBL_KEY("trust.norm_screen_lo", "update-norm outlier factor (low side)", fed.norm_screen_lo),
        DBL_KEY("energy.cycles_per_training", "cycles for one local update", fed.energy.cycles_per_training),
        DBL_KEY("energy.n_cmp", "computation energy normalization", fed.energy.n_cmp),
        DBL_KEY("energy.n_com", "communication energy normalization", fed.energy.n_com),
        DBL_KEY("energy.model_bits", "model size in bits (0 = 64 * parameter count)", fed.energy.model_bits),
        DBL_KEY("channel.p_good", "stationary probability of the good state", fed.p_good),
        DBL_KEY("channel.persistence", "probability of keeping the current state", fed.channel_persistence),
        DBL_KEY("channel.noise_floor", "linear reference noise", fed.channel.noise_floor),
        DBL_KEY("channel.bandwidth", "subchannel bandwidth W", fed.channel.bandwidth),
        DBL_KEY("channel.tx_power", "uplink transmit power p", fed.channel.tx_power),
        DBL_KEY("channel.gain", "uplink channel gain h", fed.channel.gain),
        BOOL_KEY("channel.poisson_jitter", "draw noise around the state mean", fed.channel.poisson_jitter),
        INT_KEY("channel.upload_patience", "ticks a curator may hold an upload for a good state", fed.channel.upload_patience),
        DBL_KEY("channel.failure_good", "packet failure probability (good)", fed.channel.failure_prob[0]),
        DBL_KEY("channel.failure_medium", "packet failure probability (medium)", fed.channel.failure_prob[1]),
        DBL_KEY("channel.failure_bad", "packet failure probability (bad)", fed.channel.failure_prob[2]),
        DBL_KEY("budget.v0", "drift-penalty base weight", fed.penalty.v0),
        DBL_KEY("budget.v_growth", "drift-penalty growth per aggregation", fed.penalty.v_growth),
        {"federation.mode", "async_dqn | sync_fixed | async_fixed",
         [](ExperimentSpec& s, const std::string& v) { s.fed.mode = mode_from(v); },
         [](const ExperimentSpec& s) { return std::string(fed_mode_name(s.fed.mode)); }},
        INT_KEY("federation.fixed_frequency", "local updates per round in fixed modes", fed.fixed_frequency),
        INT_KEY("federation.a_max", "largest selectable update count", fed.a_max),
        INT_KEY("federation.global_every", "global merge every G epochs", fed.global_every),
        DBL_KEY("federation.alpha0", "initial straggler tolerance", fed.tolerance.alpha0),
        DBL_KEY("federation.rho", "tolerance increment per round", fed.tolerance.rho),
        DBL_KEY("federation.alpha_max", "tolerance cap", fed.tolerance.alpha_max),
        BOOL_KEY("federation.calibrated", "use twin self-calibration", fed.calibrated),
        DBL_KEY("dqn.gamma", "discount factor", fed.dqn.gamma),
        DBL_KEY("dqn.epsilon0", "initial greedy probability", fed.dqn.epsilon0),
        DBL_KEY("dqn.epsilon_growth", "greedy growth per episode", fed.dqn.epsilon_growth),
        INT_KEY("dqn.target_update_every", "target sync period F_u (training steps)", fed.dqn.target_update_every),
        INT_KEY("dqn.batch_size", "replay batch size", fed.dqn.batch_size),
        DBL_KEY("dqn.lr", "Q-network learning rate", fed.dqn.lr),
        {"dqn.capacity", "replay buffer capacity",
         [](ExperimentSpec& s, const std::string& v) { s.fed.dqn.capacity = to_u64(v); },
         [](const ExperimentSpec& s) { return std::to_string(s.fed.dqn.capacity); }},
        INT_KEY("dqn.episodes", "training episodes", fed.dqn.episodes),
        INT_KEY("dqn.hidden_dim", "Q-network hidden units", fed.dqn.hidden_dim),
        BOOL_KEY("dqn.normalize_rewards", "standardize rewards by running stats", fed.dqn.normalize_rewards),
        {"experiment.figures", "comma list of figure analogs, or 'all'",
         [](ExperimentSpec& s, const std::string& v) { s.figures = split_list(v); },
         [](const ExperimentSpec& s) {
             std::string out;
             for (std::size_t i = 0; i < s.figures.size(); ++i) {
                 if (i) out += ',';
                 out += s.figures[i];
             }
             return out;
         }},
        INT_KEY("experiment.repeats", "seeds per arm", repeats),
        STR_KEY("experiment.output_dir", "output directory", output_dir),
        DBL_KEY("experiment.target_accuracy", "time-to-accuracy target", target_accuracy),
        {"experiment.channel_sweep", "p_good sweep for the channel figure",
         [](ExperimentSpec& s, const std::string& v) {
             s.channel_sweep.clear();
             for (const std::string& item : split_list(v)) s.channel_sweep.push_back(to_double(item));
         },
         [](const ExperimentSpec& s) { return join_doubles(s.channel_sweep); }},
        {"experiment.cluster_sweep", "cluster-count sweep",
         [](ExperimentSpec& s, const std::string& v) {
             s.cluster_sweep.clear();
             for (const std::string& item : split_list(v)) s.cluster_sweep.push_back(to_int(item));
         },
         [](const ExperimentSpec& s) { return join_ints(s.cluster_sweep); }},
        {"experiment.fixed_t_sweep", "fixed-frequency baselines for the adaptive comparison",
         [](ExperimentSpec& s, const std::string& v) {
             s.fixed_t_sweep.clear();
             for (const std::string& item : split_list(v)) s.fixed_t_sweep.push_back(to_int(item));
         },
         [](const ExperimentSpec& s) { return join_ints(s.fixed_t_sweep); }},
    };
    return table;
}

#undef INT_KEY
#undef DBL_KEY
#undef BOOL_KEY
#undef STR_KEY

}  // namespace

ExperimentSpec parse_config_text(const std::string& text) {
    ExperimentSpec spec;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto last = line.find_last_not_of(" \t\r");
        line = line.substr(first, last - first + 1);

        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError("line " + std::to_string(lineno) + ": expected 'key = value'");
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        const auto kend = key.find_last_not_of(" \t");
        key = kend == std::string::npos ? "" : key.substr(0, kend + 1);
        const auto vstart = value.find_first_not_of(" \t");
        value = vstart == std::string::npos ? "" : value.substr(vstart);

        bool found = false;
        for (const KeyEntry& entry : key_table()) {
            if (key == entry.key) {
                try {
                    entry.set(spec, value);
                } catch (const ParseError& e) {
                    throw ParseError("line " + std::to_string(lineno) + ": " +
                                     std::string(e.what()));
                }
                found = true;
                break;
            }
        }
        if (!found) throw UnknownKey("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    return spec;
}

ExperimentSpec parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config file " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

void print_defaults(std::ostream& out) {
    const ExperimentSpec defaults;
    for (const KeyEntry& entry : key_table()) {
        out << entry.key << " = " << entry.get(defaults) << "  # " << entry.doc << "\n";
    }
}

}  // namespace dtfl
