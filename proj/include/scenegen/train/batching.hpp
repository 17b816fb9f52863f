#pragma once

#include <vector>

#include "scenegen/numerics/rng.hpp"

namespace scenegen {

// Indices into a corpus, all referring to scenes with the same asset count.
struct Batch {
    int n_assets = 0;
    std::vector<int> indices;
};

// Splits a corpus into same-asset-count batches. Every index appears exactly
// once per epoch; sample order within a count group and the final batch order
// are shuffled through `rng`, so one seed fixes the whole sequence.
std::vector<Batch> make_batches(const std::vector<int>& asset_counts, int batch_size, Rng& rng);

}  // namespace scenegen
