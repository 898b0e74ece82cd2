#include "dtfl/scenario.hpp"

#include <cmath>
#include <ostream>
#include <sstream>

#include "dtfl/errors.hpp"
#include "dtfl/idx.hpp"
#include "dtfl/text.hpp"

namespace dtfl {

const char* honesty_name(Honesty h) {
    switch (h) {
        case Honesty::Lazy: return "lazy";
        case Honesty::Noisy: return "noisy";
        default: return "honest";
    }
}

double calibrate_twin(const DigitalTwin& twin) {
    return twin.mapped_cpu_freq + twin.deviation;
}

double sample_dt_deviation(Rng& rng, double lo, double hi) {
    if (lo > hi) throw BadRange("deviation range: lo > hi");
    if (lo < 0.0) throw BadRange("deviation range: lo < 0");
    if (lo == hi) return lo;
    return rng.uniform(lo, hi);
}

void ScenarioConfig::validate() const {
    if (num_nodes < 1) throw BadConfig("num_nodes must be >= 1");
    if (num_clusters < 1 || num_clusters > num_nodes)
        throw BadConfig("num_clusters must be in [1, num_nodes]");
    if (budget_fraction <= 0.0 || budget_fraction > 1.0)
        throw BadConfig("budget_fraction must be in (0, 1]");
    if (budget_total <= 0.0) throw BadConfig("budget_total must be > 0");
    if (num_classes < 2) throw BadConfig("num_classes must be >= 2");
    if (rounds_max < 1) throw BadConfig("rounds_max must be >= 1");
    if (label_skew < 0.0 || label_skew > 1.0) throw BadConfig("label_skew must be in [0, 1]");
    if (cpu_freq_lo <= 0.0 || cpu_freq_hi < cpu_freq_lo)
        throw BadConfig("cpu frequency range invalid");
    if (deviation_lo < 0.0 || deviation_hi < deviation_lo)
        throw BadConfig("deviation range invalid");
    if (cpu_freq_lo - deviation_hi <= 0.0)
        throw BadConfig("deviation_hi must stay below cpu_freq_lo so twin frequencies remain positive");
    if (num_noisy < 0 || num_lazy < 0 || num_noisy + num_lazy > num_nodes)
        throw BadConfig("attacker counts exceed node count");
    if (hidden_dim < 1) throw BadConfig("hidden_dim must be >= 1");
    if (dataset.kind == DatasetSource::Kind::Synthetic) {
        if (dataset.feature_dim < 1) throw BadConfig("feature_dim must be >= 1");
        if (dataset.samples_per_node < 1) throw EmptyDataset("samples_per_node must be >= 1");
        if (dataset.sample_noise <= 0.0) throw BadConfig("sample_noise must be > 0");
    } else {
        if (dataset.idx_images.empty() || dataset.idx_labels.empty())
            throw BadConfig("idx dataset requires image and label paths");
        if (dataset.samples_per_node < 1) throw EmptyDataset("samples_per_node must be >= 1");
    }
}

namespace {

// Per-node class composition under the label-skew knob: a round(skew * n)
// slice from the node's dominant class (id mod C), the rest spread evenly.
std::vector<std::vector<int>> label_demand(const ScenarioConfig& cfg) {
    const int C = cfg.num_classes;
    const int per_node = cfg.dataset.samples_per_node;
    std::vector<std::vector<int>> demand(cfg.num_nodes, std::vector<int>(C, 0));
    for (int i = 0; i < cfg.num_nodes; ++i) {
        const int dominant = i % C;
        const int d = static_cast<int>(std::lround(cfg.label_skew * per_node));
        demand[i][dominant] += d;
        const int rest = per_node - d;
        const int base = rest / C;
        int extra = rest % C;
        for (int c = 0; c < C; ++c) demand[i][c] += base;
        for (int k = 1; extra > 0; ++k, --extra) demand[i][(dominant + k) % C] += 1;
    }
    return demand;
}

Sample draw_blob_sample(const std::vector<std::vector<double>>& centers, int label,
                        double noise, int dim, Rng& rng) {
    Sample s;
    s.label = label;
    s.features.resize(dim);
    for (int k = 0; k < dim; ++k) s.features[k] = centers[label][k] + noise * rng.normal();
    return s;
}

void build_synthetic(const ScenarioConfig& cfg,
                     const std::vector<std::vector<int>>& demand,
                     Rng& root, Scenario& scenario) {
    const int C = cfg.num_classes;
    const int dim = cfg.dataset.feature_dim;
    scenario.feature_dim = dim;

    Rng center_rng = root.substream("centers");
    std::vector<std::vector<double>> centers(C, std::vector<double>(dim));
    for (int c = 0; c < C; ++c)
        for (int k = 0; k < dim; ++k)
            centers[c][k] = cfg.dataset.center_spread * center_rng.normal();

    std::vector<int> counts(C, 0);
    for (const auto& d : demand)
        for (int c = 0; c < C; ++c) counts[c] += d[c];

    Rng data_rng = root.substream("dataset");
    std::vector<std::vector<Sample>> pools(C);
    for (int c = 0; c < C; ++c) {
        pools[c].reserve(counts[c]);
        for (int n = 0; n < counts[c]; ++n)
            pools[c].push_back(draw_blob_sample(centers, c, cfg.dataset.sample_noise, dim, data_rng));
    }

    std::vector<std::size_t> heads(C, 0);
    for (int i = 0; i < cfg.num_nodes; ++i) {
        auto& shard = scenario.nodes[i].shard;
        shard.samples.reserve(cfg.dataset.samples_per_node);
        for (int c = 0; c < C; ++c)
            for (int n = 0; n < demand[i][c]; ++n) shard.samples.push_back(pools[c][heads[c]++]);
    }

    Rng test_rng = root.substream("testset");
    scenario.test_set.samples.reserve(cfg.dataset.test_samples);
    for (int t = 0; t < cfg.dataset.test_samples; ++t)
        scenario.test_set.samples.push_back(
            draw_blob_sample(centers, t % C, cfg.dataset.sample_noise, dim, test_rng));
}

void build_from_idx(const ScenarioConfig& cfg,
                    const std::vector<std::vector<int>>& demand, Scenario& scenario) {
    const IdxDataset data = load_idx_dataset(cfg.dataset.idx_images, cfg.dataset.idx_labels);
    scenario.feature_dim = data.rows * data.cols;

    const std::size_t need =
        static_cast<std::size_t>(cfg.num_nodes) * cfg.dataset.samples_per_node;
    if (data.samples.size() < need)
        throw EmptyDataset("idx dataset holds " + std::to_string(data.samples.size()) +
                           " samples, need " + std::to_string(need));

    const int C = cfg.num_classes;
    std::vector<std::vector<std::size_t>> pools(C);
    for (std::size_t idx = 0; idx < need; ++idx) {
        const int label = data.samples[idx].label;
        if (label < 0 || label >= C)
            throw BadConfig("idx label " + std::to_string(label) + " outside [0, num_classes)");
        pools[label].push_back(idx);
    }

    // First honor per-class demands while stock lasts, then deal leftovers.
    std::vector<std::size_t> heads(C, 0);
    std::vector<std::vector<std::size_t>> assigned(cfg.num_nodes);
    for (int i = 0; i < cfg.num_nodes; ++i)
        for (int c = 0; c < C; ++c) {
            const std::size_t avail = pools[c].size() - heads[c];
            const std::size_t take = std::min<std::size_t>(demand[i][c], avail);
            for (std::size_t n = 0; n < take; ++n) assigned[i].push_back(pools[c][heads[c]++]);
        }
    std::vector<std::size_t> leftovers;
    for (int c = 0; c < C; ++c)
        for (std::size_t k = heads[c]; k < pools[c].size(); ++k) leftovers.push_back(pools[c][k]);
    std::size_t cursor = 0;
    for (int i = 0; i < cfg.num_nodes; ++i)
        while (assigned[i].size() < static_cast<std::size_t>(cfg.dataset.samples_per_node))
            assigned[i].push_back(leftovers[cursor++]);

    for (int i = 0; i < cfg.num_nodes; ++i) {
        auto& shard = scenario.nodes[i].shard;
        shard.samples.reserve(assigned[i].size());
        for (std::size_t idx : assigned[i]) shard.samples.push_back(data.samples[idx]);
    }

    if (!cfg.dataset.idx_test_images.empty()) {
        const IdxDataset test = load_idx_dataset(cfg.dataset.idx_test_images,
                                                 cfg.dataset.idx_test_labels);
        const std::size_t n = std::min<std::size_t>(test.samples.size(), cfg.dataset.test_samples);
        scenario.test_set.samples.assign(test.samples.begin(), test.samples.begin() + n);
    } else {
        const std::size_t n =
            std::min<std::size_t>(data.samples.size() - need, cfg.dataset.test_samples);
        scenario.test_set.samples.assign(data.samples.begin() + need,
                                         data.samples.begin() + need + n);
    }
}

}  // namespace

Scenario init_scenario(const ScenarioConfig& config) {
    config.validate();

    Scenario scenario;
    scenario.config = config;
    scenario.nodes.resize(config.num_nodes);
    scenario.twins.resize(config.num_nodes);

    Rng root(config.seed);
    const auto demand = label_demand(config);
    if (config.dataset.kind == DatasetSource::Kind::Synthetic) {
        build_synthetic(config, demand, root, scenario);
    } else {
        build_from_idx(config, demand, scenario);
    }

    Rng freq_rng = root.substream("freq");
    Rng dev_rng = root.substream("deviation");
    for (int i = 0; i < config.num_nodes; ++i) {
        DeviceNode& node = scenario.nodes[i];
        node.id = i;
        node.true_cpu_freq = freq_rng.uniform(config.cpu_freq_lo, config.cpu_freq_hi);
        if (node.shard.empty()) throw EmptyDataset("node " + std::to_string(i) + " shard is empty");

        const int lazy_from = config.num_nodes - config.num_noisy - config.num_lazy;
        const int noisy_from = config.num_nodes - config.num_noisy;
        if (i >= noisy_from) node.malicious = Honesty::Noisy;
        else if (i >= lazy_from) node.malicious = Honesty::Lazy;

        DigitalTwin& twin = scenario.twins[i];
        twin.node_id = i;
        twin.deviation = sample_dt_deviation(dev_rng, config.deviation_lo, config.deviation_hi);
        twin.mapped_cpu_freq = node.true_cpu_freq - twin.deviation;
    }

    Rng init_rng = root.substream("init");
    scenario.initial_params =
        random_init(scenario.feature_dim, config.hidden_dim, config.num_classes, init_rng);
    for (auto& node : scenario.nodes) node.params = scenario.initial_params;
    return scenario;
}

void serialize_scenario(const Scenario& s, std::ostream& out) {
    const ScenarioConfig& c = s.config;
    out << "format.version 1\n";
    out << "config.num_nodes " << c.num_nodes << "\n";
    out << "config.num_clusters " << c.num_clusters << "\n";
    out << "config.seed " << c.seed << "\n";
    out << "config.budget_total " << fmt_double(c.budget_total) << "\n";
    out << "config.budget_fraction " << fmt_double(c.budget_fraction) << "\n";
    out << "config.num_classes " << c.num_classes << "\n";
    out << "config.rounds_max " << c.rounds_max << "\n";
    out << "config.label_skew " << fmt_double(c.label_skew) << "\n";
    out << "config.hidden_dim " << c.hidden_dim << "\n";
    out << "config.feature_dim " << s.feature_dim << "\n";
    for (std::size_t i = 0; i < s.nodes.size(); ++i) {
        const DeviceNode& n = s.nodes[i];
        const std::string p = "node." + std::to_string(n.id) + ".";
        out << p << "true_cpu_freq " << fmt_double(n.true_cpu_freq) << "\n";
        out << p << "energy_spent " << fmt_double(n.energy_spent) << "\n";
        out << p << "malicious " << honesty_name(n.malicious) << "\n";
        out << p << "shard_size " << n.shard.size() << "\n";
        const DigitalTwin& t = s.twins[i];
        out << p << "twin.mapped_cpu_freq " << fmt_double(t.mapped_cpu_freq) << "\n";
        out << p << "twin.deviation " << fmt_double(t.deviation) << "\n";
        out << p << "twin.mapped_loss " << fmt_double(t.mapped_loss) << "\n";
        out << p << "twin.mapped_energy " << fmt_double(t.mapped_energy) << "\n";
        for (std::size_t j = 0; j < n.shard.samples.size(); ++j) {
            const Sample& sm = n.shard.samples[j];
            out << p << "sample." << j << ".label " << sm.label << "\n";
            out << p << "sample." << j << ".x";
            for (double v : sm.features) out << ' ' << fmt_double(v);
            out << "\n";
        }
    }
    out << "initial_params.dims " << s.initial_params.input_dim << ' '
        << s.initial_params.hidden_dim << ' ' << s.initial_params.output_dim << "\n";
    out << "initial_params.flat";
    for (double v : s.initial_params.flat) out << ' ' << fmt_double(v);
    out << "\n";
    out << "test_set.size " << s.test_set.size() << "\n";
}

std::string scenario_to_text(const Scenario& s) {
    std::ostringstream os;
    serialize_scenario(s, os);
    return os.str();
}

}  // namespace dtfl
