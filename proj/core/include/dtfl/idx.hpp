#pragma once

#include <string>
#include <vector>

#include "dtfl/data.hpp"

namespace dtfl {

struct IdxDataset {
    int rows = 0;
    int cols = 0;
    std::vector<Sample> samples;  // pixels scaled to [0, 1]
};

// Parses the big-endian IDX image/label pair (magic 0x00000803 / 0x00000801).
IdxDataset load_idx_dataset(const std::string& images_path,
                            const std::string& labels_path);

}  // namespace dtfl
