#include "dtfl/trust.hpp"

#include <algorithm>
#include <cmath>

#include "dtfl/errors.hpp"

namespace dtfl {
namespace {

std::vector<double> mean_params(const std::vector<Upload>& uploads) {
    std::vector<double> mean(uploads[0].params.flat.size(), 0.0);
    for (const Upload& u : uploads)
        for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += u.params.flat[i];
    const double inv = 1.0 / static_cast<double>(uploads.size());
    for (double& v : mean) v *= inv;
    return mean;
}

double l2_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

std::vector<std::vector<double>> update_vectors(const std::vector<Upload>& uploads,
                                                const ModelParams& prev_global) {
    std::vector<std::vector<double>> deltas(uploads.size());
    for (std::size_t k = 0; k < uploads.size(); ++k) {
        const auto& flat = uploads[k].params.flat;
        deltas[k].resize(flat.size());
        for (std::size_t i = 0; i < flat.size(); ++i)
            deltas[k][i] = flat[i] - prev_global.flat[i];
    }
    return deltas;
}

}  // namespace

std::map<int, double> learning_quality(const std::vector<Upload>& uploads) {
    const std::vector<double> mean = mean_params(uploads);
    std::vector<double> dist(uploads.size());
    double total = 0.0;
    for (std::size_t k = 0; k < uploads.size(); ++k) {
        dist[k] = l2_distance(uploads[k].params.flat, mean);
        total += dist[k];
    }
    std::map<int, double> q;
    if (total <= 0.0) {
        const double uniform = 1.0 / static_cast<double>(uploads.size());
        for (const Upload& u : uploads) q[u.node_id] = uniform;
    } else {
        for (std::size_t k = 0; k < uploads.size(); ++k)
            q[uploads[k].node_id] = dist[k] / total;
    }
    return q;
}

double belief(double failure_prob, double quality, double deviation,
              double alpha, double beta) {
    const double dev = std::max(deviation, kDeviationFloor);
    return (1.0 - failure_prob) * quality / dev * (alpha / (alpha + beta));
}

double reputation(const ReputationRecord& record) {
    double t = 0.0;
    for (const TrustSlot& slot : record.history)
        t += slot.belief + record.uncertainty_coeff * slot.failure_prob;
    return t;
}

ModelParams trust_weighted_aggregate(const std::vector<Upload>& uploads,
                                     const std::map<int, double>& reputations) {
    double total = 0.0;
    for (const Upload& u : uploads) {
        const auto it = reputations.find(u.node_id);
        if (it != reputations.end()) total += std::max(it->second, 0.0);
    }
    if (total <= 0.0) throw AllUntrusted("no upload carries positive reputation");

    ModelParams out = uploads[0].params;
    std::fill(out.flat.begin(), out.flat.end(), 0.0);
    for (const Upload& u : uploads) {
        const auto it = reputations.find(u.node_id);
        const double raw = it == reputations.end() ? 0.0 : std::max(it->second, 0.0);
        if (raw <= 0.0) continue;
        const double w = raw / total;  // normalize first: a lone upload passes through exactly
        for (std::size_t i = 0; i < out.flat.size(); ++i)
            out.flat[i] += w * u.params.flat[i];
    }
    return out;
}

std::set<int> gradient_diversity_flags(const std::vector<Upload>& uploads,
                                       const ModelParams& prev_global,
                                       double threshold) {
    std::set<int> flagged;
    if (uploads.size() < 2) return flagged;
    const auto deltas = update_vectors(uploads, prev_global);
    std::vector<double> norms(deltas.size());
    for (std::size_t k = 0; k < deltas.size(); ++k) {
        double acc = 0.0;
        for (double v : deltas[k]) acc += v * v;
        norms[k] = std::sqrt(acc);
    }
    for (std::size_t a = 0; a < deltas.size(); ++a) {
        for (std::size_t b = a + 1; b < deltas.size(); ++b) {
            if (norms[a] <= 1e-12 || norms[b] <= 1e-12) continue;
            double dot = 0.0;
            for (std::size_t i = 0; i < deltas[a].size(); ++i) dot += deltas[a][i] * deltas[b][i];
            const double cosine = dot / (norms[a] * norms[b]);
            if (cosine > threshold) {
                flagged.insert(uploads[a].node_id);
                flagged.insert(uploads[b].node_id);
            }
        }
    }
    return flagged;
}

std::set<int> update_norm_flags(const std::vector<Upload>& uploads,
                                const ModelParams& prev_global,
                                double hi_factor, double lo_factor) {
    std::set<int> flagged;
    if (uploads.size() < 2) return flagged;
    const auto deltas = update_vectors(uploads, prev_global);
    const std::size_t dim = deltas[0].size();

    std::vector<double> center(dim, 0.0);
    for (const auto& d : deltas)
        for (std::size_t i = 0; i < dim; ++i) center[i] += d[i];
    for (double& v : center) v /= static_cast<double>(deltas.size());

    std::vector<double> norms(deltas.size());
    std::vector<double> spreads(deltas.size());
    for (std::size_t k = 0; k < deltas.size(); ++k) {
        double n2 = 0.0, s2 = 0.0;
        for (std::size_t i = 0; i < dim; ++i) {
            n2 += deltas[k][i] * deltas[k][i];
            const double c = deltas[k][i] - center[i];
            s2 += c * c;
        }
        norms[k] = std::sqrt(n2);
        spreads[k] = std::sqrt(s2);
    }
    auto median_of = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        return v[v.size() / 2];
    };
    const double norm_med = median_of(norms);
    const double spread_med = median_of(spreads);
    if (norm_med <= 1e-15) return flagged;  // cohort did no work; nothing to compare
    for (std::size_t k = 0; k < norms.size(); ++k) {
        const bool oversized = norms[k] > hi_factor * norm_med;
        const bool off_center = spread_med > 1e-15 && spreads[k] > hi_factor * spread_med;
        const bool vanishing = norms[k] < lo_factor * norm_med;
        if (oversized || off_center || vanishing) flagged.insert(uploads[k].node_id);
    }
    return flagged;
}

void record_interaction(ReputationRecord& record, bool flagged, double b,
                        double u, double q) {
    if (flagged) record.beta += 1.0;
    else record.alpha += 1.0;
    record.history.push_back({b, u, q});
}

}  // namespace dtfl
