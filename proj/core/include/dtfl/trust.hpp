#pragma once

#include <map>
#include <set>
#include <vector>

#include "dtfl/mlp.hpp"

namespace dtfl {

// One subjective-logic interaction slot.
struct TrustSlot {
    double belief = 0.0;
    double failure_prob = 0.0;
    double quality = 0.0;
};

struct ReputationRecord {
    int curator_id = 0;
    int node_id = 0;
    double alpha = 1.0;  // positive interactions, Laplace prior
    double beta = 1.0;   // malicious actions, Laplace prior
    double uncertainty_coeff = 0.5;  // iota
    std::vector<TrustSlot> history;
};

struct Upload {
    int node_id = 0;
    ModelParams params;
    int timestamp = 0;
    double failure_prob = 0.0;
};

inline constexpr double kDeviationFloor = 1e-3;

// Normalized distance of each upload from the elementwise mean; identical
// uploads fall back to the uniform split.
std::map<int, double> learning_quality(const std::vector<Upload>& uploads);

double belief(double failure_prob, double quality, double deviation,
              double alpha, double beta);

double reputation(const ReputationRecord& record);

ModelParams trust_weighted_aggregate(const std::vector<Upload>& uploads,
                                     const std::map<int, double>& reputations);

// Flags every node whose update direction nearly duplicates another's.
std::set<int> gradient_diversity_flags(const std::vector<Upload>& uploads,
                                       const ModelParams& prev_global,
                                       double threshold = 0.99);

// Flags updates whose magnitude is far off the cohort median. Oversized
// updates (noise injection) and near-zero ones (skipped training) both slip
// past the cosine screen, so curators also screen norms.
std::set<int> update_norm_flags(const std::vector<Upload>& uploads,
                                const ModelParams& prev_global,
                                double hi_factor = 1.8, double lo_factor = 0.05);

void record_interaction(ReputationRecord& record, bool flagged, double b,
                        double u, double q);

}  // namespace dtfl
