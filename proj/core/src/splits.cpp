// SPDX-License-Identifier: Apache-2.0

#include "gdistill/splits.hpp"

#include "gdistill/error.hpp"
#include "gdistill/random.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace gdistill {

namespace {

std::vector<int> sorted(std::vector<int> v) {
    std::sort(v.begin(), v.end());
    return v;
}

} // namespace

Split make_transductive_split(const std::vector<int>& labels, int num_classes,
                              int per_class_train, int val_size, int test_size, uint64_t seed) {
    int64_t n = static_cast<int64_t>(labels.size());
    if (per_class_train <= 0 || val_size < 0 || test_size < 0) {
        throw ConfigError("transductive split: sizes must be positive");
    }
    std::vector<std::vector<int>> by_class(static_cast<size_t>(num_classes));
    for (int64_t i = 0; i < n; ++i) by_class[static_cast<size_t>(labels[static_cast<size_t>(i)])].push_back(static_cast<int>(i));

    RandomStream rng(derive_seed(seed, "split.transductive"));
    Split s;
    std::unordered_set<int> taken;
    for (int c = 0; c < num_classes; ++c) {
        auto& pool = by_class[static_cast<size_t>(c)];
        if (static_cast<int>(pool.size()) < per_class_train) {
            throw ConfigError("transductive split: class " + std::to_string(c) + " has only " +
                              std::to_string(pool.size()) + " nodes, need " +
                              std::to_string(per_class_train));
        }
        rng.shuffle(pool);
        for (int i = 0; i < per_class_train; ++i) {
            s.train.push_back(pool[static_cast<size_t>(i)]);
            taken.insert(pool[static_cast<size_t>(i)]);
        }
    }
    std::vector<int> rest;
    for (int64_t i = 0; i < n; ++i) {
        if (!taken.count(static_cast<int>(i))) rest.push_back(static_cast<int>(i));
    }
    if (static_cast<int>(rest.size()) < val_size + test_size) {
        throw ConfigError("transductive split: not enough nodes for val+test");
    }
    rng.shuffle(rest);
    s.val.assign(rest.begin(), rest.begin() + val_size);
    s.test.assign(rest.begin() + val_size, rest.begin() + val_size + test_size);
    s.train = sorted(std::move(s.train));
    s.val = sorted(std::move(s.val));
    s.test = sorted(std::move(s.test));
    return s;
}

Split make_label_rate_split(const std::vector<int>& labels, double rate, int val_size,
                            uint64_t seed) {
    int64_t n = static_cast<int64_t>(labels.size());
    if (!(rate > 0.0 && rate < 1.0)) {
        throw ConfigError("label rate must lie in (0, 1)");
    }
    int train_size = static_cast<int>(std::llround(rate * static_cast<double>(n)));
    if (train_size <= 0) throw ConfigError("label rate yields an empty train set");

    RandomStream rng(derive_seed(seed, "split.label_rate"));
    std::vector<int> order(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) order[static_cast<size_t>(i)] = static_cast<int>(i);
    rng.shuffle(order);

    Split s;
    s.train.assign(order.begin(), order.begin() + train_size);
    int val_take = std::min<int>(val_size, static_cast<int>(n) - train_size);
    s.val.assign(order.begin() + train_size, order.begin() + train_size + val_take);
    s.test.assign(order.begin() + train_size + val_take, order.end());
    if (s.val.empty() || s.test.empty()) {
        throw ConfigError("label rate split leaves an empty val or test set");
    }
    s.train = sorted(std::move(s.train));
    s.val = sorted(std::move(s.val));
    s.test = sorted(std::move(s.test));
    return s;
}

Split make_inductive_split(const std::vector<int>& labels, int num_classes,
                           double unseen_fraction, int per_class_train, int val_size,
                           uint64_t seed) {
    int64_t n = static_cast<int64_t>(labels.size());
    if (!(unseen_fraction > 0.0 && unseen_fraction < 1.0)) {
        throw ConfigError("unseen fraction must lie in (0, 1)");
    }
    int unseen_size = static_cast<int>(std::llround(unseen_fraction * static_cast<double>(n)));
    if (unseen_size <= 0 || unseen_size >= n) {
        throw ConfigError("inductive split: degenerate unseen size");
    }

    RandomStream rng(derive_seed(seed, "split.inductive"));
    std::vector<int> order(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) order[static_cast<size_t>(i)] = static_cast<int>(i);
    rng.shuffle(order);

    Split s;
    s.unseen = sorted(std::vector<int>(order.begin(), order.begin() + unseen_size));
    s.observed = sorted(std::vector<int>(order.begin() + unseen_size, order.end()));
    s.test = *s.unseen;

    // train/val inside the observed part, class-balanced like the
    // transductive convention
    std::vector<std::vector<int>> by_class(static_cast<size_t>(num_classes));
    for (int v : *s.observed) by_class[static_cast<size_t>(labels[static_cast<size_t>(v)])].push_back(v);
    std::unordered_set<int> taken;
    for (int c = 0; c < num_classes; ++c) {
        auto& pool = by_class[static_cast<size_t>(c)];
        if (static_cast<int>(pool.size()) < per_class_train) {
            throw ConfigError("inductive split: class " + std::to_string(c) +
                              " too small in observed part");
        }
        rng.shuffle(pool);
        for (int i = 0; i < per_class_train; ++i) {
            s.train.push_back(pool[static_cast<size_t>(i)]);
            taken.insert(pool[static_cast<size_t>(i)]);
        }
    }
    std::vector<int> rest;
    for (int v : *s.observed) {
        if (!taken.count(v)) rest.push_back(v);
    }
    if (static_cast<int>(rest.size()) < val_size || val_size <= 0) {
        throw ConfigError("inductive split: not enough observed nodes for val");
    }
    rng.shuffle(rest);
    s.val.assign(rest.begin(), rest.begin() + val_size);
    s.train = sorted(std::move(s.train));
    s.val = sorted(std::move(s.val));
    return s;
}

} // namespace gdistill
