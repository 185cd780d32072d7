#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "fedclip/errors.hpp"
#include "fedclip/rng.hpp"

namespace fedclip {

/// Similarity-s client split: s% of each client's share is drawn i.i.d. from
/// the full dataset, the remaining (100-s)% comes from the label-sorted
/// remainder dealt out in contiguous blocks.
struct PartitionSpec {
    int similarity_percent = 100; // s in [0, 100]
    std::size_t n_clients = 1;
    std::uint64_t seed = 0;

    void validate() const {
        if (similarity_percent < 0 || similarity_percent > 100)
            throw ConfigError("PartitionSpec: similarity must be in [0, 100]");
        if (n_clients == 0) throw ConfigError("PartitionSpec: need at least one client");
    }
};

struct Partition {
    std::vector<std::vector<int>> clients; // per-client sample indices
    std::vector<std::size_t> iid_counts;   // how many of each client's samples came from the i.i.d. part
};

inline Partition partition_by_similarity(const std::vector<int>& labels, const PartitionSpec& spec) {
    spec.validate();
    const std::size_t n = labels.size();
    if (n == 0) throw ConfigError("partition_by_similarity: empty dataset");
    if (n < spec.n_clients)
        throw ConfigError("partition_by_similarity: fewer samples than clients");

    // Per-client quota: floor(n/N), the first n mod N clients get one extra.
    std::vector<std::size_t> quota(spec.n_clients, n / spec.n_clients);
    for (std::size_t i = 0; i < n % spec.n_clients; ++i) ++quota[i];

    std::vector<int> shuffled(n);
    std::iota(shuffled.begin(), shuffled.end(), 0);
    RngStream rng(spec.seed, 0, 0, 0, DrawPurpose::kPartition);
    for (std::size_t i = n - 1; i > 0; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.below(i + 1));
        std::swap(shuffled[i], shuffled[j]);
    }

    Partition out;
    out.clients.resize(spec.n_clients);
    out.iid_counts.resize(spec.n_clients);

    std::size_t cursor = 0;
    for (std::size_t c = 0; c < spec.n_clients; ++c) {
        const std::size_t take = quota[c] * static_cast<std::size_t>(spec.similarity_percent) / 100;
        out.iid_counts[c] = take;
        out.clients[c].assign(shuffled.begin() + static_cast<std::ptrdiff_t>(cursor),
                              shuffled.begin() + static_cast<std::ptrdiff_t>(cursor + take));
        cursor += take;
    }

    // Remainder, sorted by label (ties broken by index for determinism),
    // handed out in contiguous blocks in client order.
    std::vector<int> rest(shuffled.begin() + static_cast<std::ptrdiff_t>(cursor), shuffled.end());
    std::sort(rest.begin(), rest.end(), [&](int a, int b) {
        if (labels[static_cast<std::size_t>(a)] != labels[static_cast<std::size_t>(b)])
            return labels[static_cast<std::size_t>(a)] < labels[static_cast<std::size_t>(b)];
        return a < b;
    });
    std::size_t rest_cursor = 0;
    for (std::size_t c = 0; c < spec.n_clients; ++c) {
        const std::size_t need = quota[c] - out.iid_counts[c];
        for (std::size_t i = 0; i < need; ++i)
            out.clients[c].push_back(rest[rest_cursor++]);
    }
    return out;
}

} // namespace fedclip
