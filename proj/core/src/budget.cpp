#include "dtfl/budget.hpp"

#include <algorithm>

#include "dtfl/errors.hpp"

namespace dtfl {

void queue_update(DeficitQueue& queue, int local_updates, double e_cmp, double e_com) {
    const double used = local_updates * e_cmp + e_com;
    queue.q = std::max(queue.q + used - queue.slot_budget(), 0.0);
    queue.consumed += used;
}

double drift_penalty_value(double v, double loss_prev, double loss_cur,
                           const DeficitQueue& queue, int local_updates,
                           double e_cmp, double e_com) {
    const double used = local_updates * e_cmp + e_com;
    return v * (loss_prev - loss_cur) - queue.q * used;
}

bool budget_exhausted(const DeficitQueue& queue) {
    return queue.consumed > queue.budget_fraction * queue.budget_total;
}

double v_schedule(const PenaltyWeights& weights, int aggregation_index) {
    return weights.v0 * (1.0 + weights.v_growth * aggregation_index);
}

std::vector<double> decompose_training_gain(const std::vector<double>& loss_trace) {
    if (loss_trace.size() < 2) throw BadRange("loss trace needs at least two entries");
    std::vector<double> drops(loss_trace.size() - 1);
    for (std::size_t i = 1; i < loss_trace.size(); ++i)
        drops[i - 1] = loss_trace[i - 1] - loss_trace[i];
    return drops;
}

}  // namespace dtfl
