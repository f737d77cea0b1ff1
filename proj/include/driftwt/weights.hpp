#pragma once

#include <cstdio>
#include <ostream>
#include <unordered_set>

#include "driftwt/numerics.hpp"

namespace driftwt {

// Global per-sample weight vector with index-based retrieval and write-back.
// Batches gather their slice, update it and scatter it back, so later batches
// warm-start from the most recently written values.
class WeightStore {
public:
    explicit WeightStore(std::size_t n_tr) : values_(n_tr, 1.0) {
        require(n_tr >= 1, "WeightStore: need at least one sample");
    }

    std::size_t size() const { return values_.size(); }
    const Vec& values() const { return values_; }

    Vec gather(const std::vector<std::size_t>& indices) const {
        check_indices(indices);
        Vec out(indices.size());
        for (std::size_t i = 0; i < indices.size(); ++i) out[i] = values_[indices[i]];
        return out;
    }

    void scatter(const std::vector<std::size_t>& indices, const Vec& new_values) {
        require(indices.size() == new_values.size(), "WeightStore::scatter: length mismatch");
        check_indices(indices);
        for (double v : new_values) {
            require(v >= 0, "WeightStore::scatter: negative weight (project before scatter)");
            require(std::isfinite(v), "WeightStore::scatter: non-finite weight");
        }
        for (std::size_t i = 0; i < indices.size(); ++i) values_[indices[i]] = new_values[i];
    }

    // One row per sample: index, weight, noisy flag (flag column is 0 when no
    // flags are given).
    void write_csv(std::ostream& os, const std::vector<bool>* is_noisy = nullptr) const {
        os << "index,weight,is_noisy\n";
        char buf[40];
        for (std::size_t i = 0; i < values_.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.17g", values_[i]);
            const int flag = (is_noisy && i < is_noisy->size() && (*is_noisy)[i]) ? 1 : 0;
            os << i << ',' << buf << ',' << flag << '\n';
        }
    }

private:
    void check_indices(const std::vector<std::size_t>& indices) const {
        std::unordered_set<std::size_t> seen;
        seen.reserve(indices.size());
        for (std::size_t idx : indices) {
            require(idx < values_.size(), "WeightStore: index out of range");
            require(seen.insert(idx).second, "WeightStore: duplicate index in one batch");
        }
    }

    Vec values_;
};

}  // namespace driftwt
