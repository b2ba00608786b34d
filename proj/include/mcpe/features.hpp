#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mcpe/error.hpp"
#include "mcpe/mrp.hpp"
#include "mcpe/rng.hpp"

namespace mcpe {

/// Feature map Phi: state index -> length-k row. Rows are pure functions of
/// the state index, either stored explicitly or generated on demand.
class FeatureMatrix {
public:
    using RowFn = std::function<void(StateIndex, std::span<double>)>;

    FeatureMatrix(std::size_t k, RowFn fn) : k_(k), fn_(std::move(fn)) {
        if (k_ == 0) throw ValidationError("feature matrix needs at least one column");
    }

    /// Explicit rows; querying a state without a row is a ValidationError.
    static FeatureMatrix from_rows(std::size_t k, std::unordered_map<StateIndex, std::vector<double>> rows) {
        for (const auto& [s, r] : rows)
            if (r.size() != k) {
                std::ostringstream msg;
                msg << "feature row for state " << s << " has " << r.size() << " entries, expected " << k;
                throw ValidationError(msg.str());
            }
        auto shared = std::make_shared<const std::unordered_map<StateIndex, std::vector<double>>>(std::move(rows));
        return FeatureMatrix(k, [shared](StateIndex s, std::span<double> out) {
            auto it = shared->find(s);
            if (it == shared->end()) throw ValidationError("no feature row for state " + std::to_string(s));
            std::copy(it->second.begin(), it->second.end(), out.begin());
        });
    }

    /// Phi = I over n states (k = n).
    static FeatureMatrix identity(std::size_t n) {
        return FeatureMatrix(n, [n](StateIndex s, std::span<double> out) {
            if (s >= n) throw ValidationError("identity features: state out of range");
            std::fill(out.begin(), out.end(), 0.0);
            out[s] = 1.0;
        });
    }

    /// A single all-ones column.
    static FeatureMatrix constant() {
        return FeatureMatrix(1, [](StateIndex, std::span<double> out) { out[0] = 1.0; });
    }

    /// Rows of i.i.d. standard normals; row s is drawn from seed.substream(s).
    /// Generated rows are cached, so memory grows with the states queried.
    static FeatureMatrix gaussian(std::size_t k, RngStream seed) {
        struct Cache {
            std::mutex mutex;
            std::unordered_map<StateIndex, std::vector<double>> rows;
        };
        auto cache = std::make_shared<Cache>();
        return FeatureMatrix(k, [k, seed, cache](StateIndex s, std::span<double> out) {
            std::lock_guard lock(cache->mutex);
            auto it = cache->rows.find(s);
            if (it == cache->rows.end()) {
                Rng rng(seed.substream(s));
                std::vector<double> row(k);
                for (auto& x : row) x = rng.normal();
                it = cache->rows.emplace(s, std::move(row)).first;
            }
            std::copy(it->second.begin(), it->second.end(), out.begin());
        });
    }

    std::size_t k() const noexcept { return k_; }

    void row(StateIndex s, std::span<double> out) const {
        if (out.size() != k_) throw ValidationError("feature row buffer has wrong length");
        fn_(s, out);
    }

    std::vector<double> row(StateIndex s) const {
        std::vector<double> out(k_);
        fn_(s, out);
        return out;
    }

private:
    std::size_t k_;
    RowFn fn_;
};

/// Feature weights w; values are Phi w.
struct WeightVector {
    std::vector<double> w;

    double value(const FeatureMatrix& phi, StateIndex s) const {
        const auto r = phi.row(s);
        double acc = 0.0;
        for (std::size_t j = 0; j < r.size(); ++j) acc += r[j] * w[j];
        return acc;
    }
};

} // namespace mcpe
