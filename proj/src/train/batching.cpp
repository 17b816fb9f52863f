#include "scenegen/train/batching.hpp"

#include <map>

#include "scenegen/common.hpp"

namespace scenegen {

namespace {

template <typename T>
void shuffle_inplace(std::vector<T>& v, Rng& rng) {
    for (size_t i = v.size(); i > 1; --i)
        std::swap(v[i - 1], v[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(i) - 1))]);
}

}  // namespace

std::vector<Batch> make_batches(const std::vector<int>& asset_counts, int batch_size, Rng& rng) {
    SG_CHECK(!asset_counts.empty(), "make_batches: empty corpus");
    SG_CHECK(batch_size >= 1, "make_batches: batch size must be positive");

    std::map<int, std::vector<int>> groups;  // asset count -> corpus indices
    for (size_t i = 0; i < asset_counts.size(); ++i)
        groups[asset_counts[i]].push_back(static_cast<int>(i));

    std::vector<Batch> batches;
    for (auto& [n, idx] : groups) {
        shuffle_inplace(idx, rng);
        for (size_t at = 0; at < idx.size(); at += static_cast<size_t>(batch_size)) {
            Batch b;
            b.n_assets = n;
            const size_t end = std::min(idx.size(), at + static_cast<size_t>(batch_size));
            b.indices.assign(idx.begin() + static_cast<long>(at),
                             idx.begin() + static_cast<long>(end));
            batches.push_back(std::move(b));
        }
    }
    shuffle_inplace(batches, rng);
    return batches;
}

}  // namespace scenegen
