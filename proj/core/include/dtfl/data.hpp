#pragma once

#include <cstddef>
#include <vector>

namespace dtfl {

struct Sample {
    std::vector<double> features;
    int label = 0;
};

// One node's slice of the training data.
struct DatasetShard {
    std::vector<Sample> samples;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }
};

}  // namespace dtfl
