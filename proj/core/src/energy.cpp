#include "dtfl/energy.hpp"

#include <cmath>

#include "dtfl/errors.hpp"

namespace dtfl {

const char* channel_quality_name(ChannelQuality q) {
    switch (q) {
        case ChannelQuality::Good: return "good";
        case ChannelQuality::Medium: return "medium";
        default: return "bad";
    }
}

ChannelState ChannelState::from_stationary_good(double p_good, double persistence) {
    if (p_good < 0.0 || p_good > 1.0) throw BadConfig("p_good must be in [0, 1]");
    if (persistence < 0.0 || persistence >= 1.0)
        throw BadConfig("persistence must be in [0, 1)");
    const std::array<double, 3> pi{p_good, (1.0 - p_good) / 2.0, (1.0 - p_good) / 2.0};
    ChannelState cs;
    cs.p_good = p_good;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            cs.transition[r][c] = (r == c ? persistence : 0.0) + (1.0 - persistence) * pi[c];
    // start from the stationary mode
    cs.state = p_good >= 0.5 ? ChannelQuality::Good
                             : (p_good > 0.0 ? ChannelQuality::Medium : ChannelQuality::Bad);
    return cs;
}

ChannelState ChannelState::pinned(ChannelQuality q) {
    ChannelState cs;
    cs.state = q;
    cs.p_good = q == ChannelQuality::Good ? 1.0 : 0.0;
    return cs;  // identity transition: the state never changes
}

double compute_energy(int local_updates, const EnergyModel& model, double cpu_freq) {
    return local_updates * model.n_cmp * model.cycles_per_training / cpu_freq;
}

double channel_capacity(const ChannelAllocation& alloc) {
    double capacity = 0.0;
    for (const SubChannel& c : alloc.channels) {
        capacity += c.time_fraction * c.bandwidth *
                    std::log2(1.0 + c.tx_power * c.gain / c.noise);
    }
    return capacity;
}

double comm_energy(const ChannelAllocation& alloc, const EnergyModel& model) {
    const double capacity = channel_capacity(alloc);
    if (capacity <= 1e-12) throw DegenerateChannel("zero uplink capacity");
    return model.n_com * model.model_bits / capacity;
}

void step_channel(ChannelState& state, Rng& rng) {
    const auto& row = state.transition[static_cast<int>(state.state)];
    const double u = rng.uniform();
    if (u < row[0]) state.state = ChannelQuality::Good;
    else if (u < row[0] + row[1]) state.state = ChannelQuality::Medium;
    else state.state = ChannelQuality::Bad;
}

namespace {

ChannelParams make_params(double noise_db, double failure_prob, const ChannelModel& model) {
    ChannelParams p;
    SubChannel c;
    // failed packets burn airtime: only the surviving fraction carries bits
    c.time_fraction = 1.0 - failure_prob;
    c.bandwidth = model.bandwidth;
    c.tx_power = model.tx_power;
    c.gain = model.gain;
    c.noise = std::pow(10.0, noise_db / 10.0) * model.noise_floor;
    p.alloc.channels.push_back(c);
    p.failure_prob = failure_prob;
    return p;
}

}  // namespace

ChannelParams channel_params_for(const ChannelState& state, const ChannelModel& model) {
    const int idx = static_cast<int>(state.state);
    return make_params(model.noise_db[idx], model.failure_prob[idx], model);
}

ChannelParams sample_channel_params(const ChannelState& state, const ChannelModel& model,
                                    Rng& rng) {
    const int idx = static_cast<int>(state.state);
    double db = model.noise_db[idx];
    if (model.poisson_jitter) db = rng.poisson(db * 10.0) / 10.0;
    return make_params(db, model.failure_prob[idx], model);
}

}  // namespace dtfl
