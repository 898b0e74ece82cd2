#pragma once

#include <vector>

namespace dtfl {

// Virtual resource-deficit queue: consumption beyond the per-slot budget
// budget_fraction * budget_total / horizon accumulates in q and is drained
// by under-consumption; q never goes negative.
struct DeficitQueue {
    double q = 0.0;
    double budget_total = 0.0;     // R_m
    double budget_fraction = 1.0;  // beta
    int horizon = 1;               // planned number of aggregations
    double consumed = 0.0;

    double slot_budget() const { return budget_fraction * budget_total / horizon; }
};

struct PenaltyWeights {
    double v0 = 1.0;
    double v_growth = 0.0;  // per-aggregation increment factor
};

void queue_update(DeficitQueue& queue, int local_updates, double e_cmp, double e_com);

// v * (loss_prev - loss_cur) - Q * (a * e_cmp + e_com), with the pre-update Q.
double drift_penalty_value(double v, double loss_prev, double loss_cur,
                           const DeficitQueue& queue, int local_updates,
                           double e_cmp, double e_com);

bool budget_exhausted(const DeficitQueue& queue);

double v_schedule(const PenaltyWeights& weights, int aggregation_index);

// Per-aggregation loss drops; sums telescope to first - last.
std::vector<double> decompose_training_gain(const std::vector<double>& loss_trace);

}  // namespace dtfl
