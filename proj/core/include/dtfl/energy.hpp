#pragma once

#include <array>
#include <vector>

#include "dtfl/rng.hpp"

namespace dtfl {

struct EnergyModel {
    double cycles_per_training = 1.0;  // in the same cycle units as cpu freq
    double n_cmp = 1.0;
    double n_com = 5.0;
    double model_bits = 269440.0;
};

struct SubChannel {
    double time_fraction = 1.0;  // l
    double bandwidth = 1e6;      // W, Hz
    double tx_power = 1.0;       // p
    double gain = 0.25;          // h
    double noise = 1.0;          // I
};

struct ChannelAllocation {
    std::vector<SubChannel> channels;
};

enum class ChannelQuality { Good = 0, Medium = 1, Bad = 2 };

const char* channel_quality_name(ChannelQuality q);

// Three-state channel chain. Rows of the transition matrix are stochastic;
// from_stationary_good builds a lazy chain whose stationary distribution puts
// p_good on Good and splits the remainder equally between Medium and Bad.
struct ChannelState {
    ChannelQuality state = ChannelQuality::Good;
    std::array<std::array<double, 3>, 3> transition{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
    double p_good = 1.0;

    static ChannelState from_stationary_good(double p_good, double persistence = 0.6);
    static ChannelState pinned(ChannelQuality q);
};

struct ChannelModel {
    // mean noise per state, dB
    std::array<double, 3> noise_db{0.1, 0.3, 0.5};
    // packet failure probability per state
    std::array<double, 3> failure_prob{0.05, 0.15, 0.30};
    double noise_floor = 1.0;   // linear reference multiplying 10^(dB/10)
    double bandwidth = 1e6;
    double tx_power = 1.0;
    double gain = 0.25;
    bool poisson_jitter = true;
    // curator-side transmit scheduling: before uploading, wait up to this
    // many channel ticks for a good state
    int upload_patience = 8;
};

double compute_energy(int local_updates, const EnergyModel& model, double cpu_freq);

double comm_energy(const ChannelAllocation& alloc, const EnergyModel& model);

// Channel capacity in bits/s for an allocation; shared by energy and
// transfer-time accounting.
double channel_capacity(const ChannelAllocation& alloc);

void step_channel(ChannelState& state, Rng& rng);

struct ChannelParams {
    ChannelAllocation alloc;
    double failure_prob = 0.0;
};

// Deterministic per-state template: mean noise converted to linear units.
ChannelParams channel_params_for(const ChannelState& state, const ChannelModel& model);

// Template with the state's noise drawn around its mean (Poisson in tenths
// of a dB, so small means still jitter).
ChannelParams sample_channel_params(const ChannelState& state, const ChannelModel& model,
                                    Rng& rng);

}  // namespace dtfl
