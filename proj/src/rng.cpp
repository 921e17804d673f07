#include "phenoscreen/rng.hpp"

#include <algorithm>
#include <unordered_set>

#include "phenoscreen/error.hpp"

namespace phenoscreen {

std::vector<std::size_t> CounterRng::sample_without_replacement(std::size_t n,
                                                                std::size_t k) {
    if (k > n) fail("rng", "cannot sample " + std::to_string(k) + " items from " +
                               std::to_string(n));
    // Floyd's algorithm: exactly k membership draws regardless of n.
    std::vector<std::size_t> out;
    out.reserve(k);
    std::unordered_set<std::size_t> chosen;
    chosen.reserve(k * 2);
    for (std::size_t j = n - k; j < n; ++j) {
        const auto t = static_cast<std::size_t>(bounded(j + 1));
        if (chosen.insert(t).second) {
            out.push_back(t);
        } else {
            chosen.insert(j);
            out.push_back(j);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace phenoscreen
