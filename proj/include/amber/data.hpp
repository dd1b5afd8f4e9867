#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "amber/error.hpp"
#include "amber/rng.hpp"

namespace amber {

struct Dataset {
    std::vector<std::vector<double>> inputs;
    std::vector<std::size_t> labels;
    std::size_t d = 0;
    std::size_t num_classes = 0;
    std::vector<std::vector<std::size_t>> by_class; // class -> sample indices

    std::size_t size() const { return inputs.size(); }

    void rebuild_index() {
        by_class.assign(num_classes, {});
        for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
    }
};

// --------------------------------------------------------------------------
// CIFAR binary readers. CIFAR-10 records are 3073 bytes (label + 3072
// channel-planar pixels); CIFAR-100 records are 3074 bytes (coarse label,
// fine label, pixels). Pixels are scaled to [0,1] by /255, which keeps the
// readers bijective: round(255 * pixel) reproduces the source byte.
// --------------------------------------------------------------------------

inline Dataset read_cifar10(const std::vector<std::uint8_t>& bytes) {
    constexpr std::size_t record = 3073;
    constexpr std::size_t dim = 3072;
    if (bytes.size() % record != 0)
        throw FormatError("cifar10: file size " + std::to_string(bytes.size()) +
                          " is not a multiple of " + std::to_string(record));
    Dataset ds;
    ds.d = dim;
    ds.num_classes = 10;
    const std::size_t n = bytes.size() / record;
    ds.inputs.reserve(n);
    ds.labels.reserve(n);
    for (std::size_t r = 0; r < n; ++r) {
        const std::uint8_t label = bytes[r * record];
        if (label > 9)
            throw FormatError("cifar10: label byte " + std::to_string(label) +
                              " out of range at record " + std::to_string(r));
        std::vector<double> px(dim);
        for (std::size_t i = 0; i < dim; ++i)
            px[i] = static_cast<double>(bytes[r * record + 1 + i]) / 255.0;
        ds.inputs.push_back(std::move(px));
        ds.labels.push_back(label);
    }
    ds.rebuild_index();
    return ds;
}

enum class LabelGranularity { fine, coarse };

inline Dataset read_cifar100(const std::vector<std::uint8_t>& bytes,
                             LabelGranularity granularity = LabelGranularity::fine) {
    constexpr std::size_t record = 3074;
    constexpr std::size_t dim = 3072;
    if (bytes.size() % record != 0)
        throw FormatError("cifar100: file size " + std::to_string(bytes.size()) +
                          " is not a multiple of " + std::to_string(record));
    Dataset ds;
    ds.d = dim;
    ds.num_classes = (granularity == LabelGranularity::fine) ? 100 : 20;
    const std::size_t n = bytes.size() / record;
    ds.inputs.reserve(n);
    ds.labels.reserve(n);
    for (std::size_t r = 0; r < n; ++r) {
        const std::uint8_t coarse = bytes[r * record];
        const std::uint8_t fine = bytes[r * record + 1];
        if (coarse > 19)
            throw FormatError("cifar100: coarse label " + std::to_string(coarse) +
                              " out of range at record " + std::to_string(r));
        if (fine > 99)
            throw FormatError("cifar100: fine label " + std::to_string(fine) +
                              " out of range at record " + std::to_string(r));
        std::vector<double> px(dim);
        for (std::size_t i = 0; i < dim; ++i)
            px[i] = static_cast<double>(bytes[r * record + 2 + i]) / 255.0;
        ds.inputs.push_back(std::move(px));
        ds.labels.push_back(granularity == LabelGranularity::fine ? fine : coarse);
    }
    ds.rebuild_index();
    return ds;
}

// Serialize a dataset into the same record layout (label byte + quantized
// values); round-trips through the readers when d matches.
inline std::vector<std::uint8_t> export_records(const Dataset& ds) {
    std::vector<std::uint8_t> bytes;
    bytes.reserve(ds.size() * (1 + ds.d));
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (ds.labels[i] > 255)
            throw DataError("export: label " + std::to_string(ds.labels[i]) +
                            " does not fit a label byte");
        bytes.push_back(static_cast<std::uint8_t>(ds.labels[i]));
        for (double v : ds.inputs[i]) {
            const double clamped = std::min(1.0, std::max(0.0, v));
            bytes.push_back(static_cast<std::uint8_t>(std::lround(clamped * 255.0)));
        }
    }
    return bytes;
}

// --------------------------------------------------------------------------
// Synthetic streams: deterministic Gaussian blobs, one mean per class, with
// pairwise mean distance >= separation. An 80/20 per-class split yields the
// train and test sets.
// --------------------------------------------------------------------------

struct SyntheticSpec {
    std::size_t num_classes = 10;
    std::size_t d = 16;
    std::size_t samples_per_class = 200;
    double separation = 6.0;
    double stddev = 1.0;
    std::uint64_t seed = 1;

    void validate() const {
        if (num_classes == 0 || d == 0 || samples_per_class == 0)
            throw ParameterError("synthetic: counts must be positive");
        if (separation <= 0.0) throw ParameterError("synthetic: separation must be positive");
        if (stddev <= 0.0) throw ParameterError("synthetic: stddev must be positive");
    }
};

namespace detail {

inline double dist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

inline std::vector<double> random_unit(std::size_t d, Rng& rng) {
    std::vector<double> v(d);
    double norm = 0.0;
    while (true) {
        norm = 0.0;
        for (auto& x : v) {
            x = rng.normal();
            norm += x * x;
        }
        norm = std::sqrt(norm);
        if (norm >= 1e-12) break;
    }
    for (auto& x : v) x /= norm;
    return v;
}

// Class means, deterministic from the seed. Classes come in near-pairs:
// classes 2j and 2j+1 sit exactly `separation` apart on either side of a
// shared anchor, while the anchors themselves stay >= 2.2 * separation
// apart (rejection sampling on a sphere whose radius grows if placement
// gets tight). Every dataset therefore has the same confusion topology:
// each class has one genuinely close neighbour and the rest far away.
inline std::vector<std::vector<double>> place_means(const SyntheticSpec& spec, Rng& rng) {
    const std::size_t K = spec.num_classes, d = spec.d;
    const std::size_t num_anchors = (K + 1) / 2;
    const double anchor_gap = 2.2 * spec.separation;

    std::vector<std::vector<double>> anchors;
    anchors.reserve(num_anchors);
    double radius = 2.0 * spec.separation;
    std::size_t rejects = 0;
    while (anchors.size() < num_anchors) {
        std::vector<double> cand = random_unit(d, rng);
        for (auto& v : cand) v *= radius;
        bool ok = true;
        for (const auto& a : anchors) {
            if (dist(cand, a) < anchor_gap) {
                ok = false;
                break;
            }
        }
        if (ok) {
            anchors.push_back(std::move(cand));
        } else if (++rejects % 128 == 0) {
            radius *= 1.25;
        }
    }

    std::vector<std::vector<double>> means;
    means.reserve(K);
    for (std::size_t j = 0; j < num_anchors; ++j) {
        const std::vector<double> offset = random_unit(d, rng);
        for (int side = 0; side < 2 && means.size() < K; ++side) {
            std::vector<double> m = anchors[j];
            const double shift = (side == 0 ? 0.5 : -0.5) * spec.separation;
            for (std::size_t i = 0; i < d; ++i) m[i] += shift * offset[i];
            means.push_back(std::move(m));
        }
    }
    return means;
}

} // namespace detail

inline std::pair<Dataset, Dataset> gen_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    Rng base(spec.seed);
    Rng mean_rng = base.split(101);
    const auto means = detail::place_means(spec, mean_rng);

    Dataset train, test;
    for (Dataset* ds : {&train, &test}) {
        ds->d = spec.d;
        ds->num_classes = spec.num_classes;
    }
    const std::size_t train_n = spec.samples_per_class * 4 / 5;
    for (std::size_t k = 0; k < spec.num_classes; ++k) {
        Rng class_rng = base.split(1000 + k);
        for (std::size_t s = 0; s < spec.samples_per_class; ++s) {
            std::vector<double> x(spec.d);
            for (std::size_t i = 0; i < spec.d; ++i)
                x[i] = means[k][i] + spec.stddev * class_rng.normal();
            Dataset& dst = (s < train_n) ? train : test;
            dst.inputs.push_back(std::move(x));
            dst.labels.push_back(k);
        }
    }
    train.rebuild_index();
    test.rebuild_index();
    return {std::move(train), std::move(test)};
}

// All sample indices whose label is in `classes`, in a deterministic
// shuffled order. Every class must contribute at least one sample.
inline std::vector<std::size_t> task_view(const Dataset& ds,
                                          const std::vector<std::size_t>& classes,
                                          std::uint64_t shuffle_seed) {
    std::vector<std::size_t> stream;
    for (std::size_t c : classes) {
        if (c >= ds.num_classes || ds.by_class[c].empty())
            throw DataError("task_view: no samples for class " + std::to_string(c));
        stream.insert(stream.end(), ds.by_class[c].begin(), ds.by_class[c].end());
    }
    std::sort(stream.begin(), stream.end());
    Rng rng(shuffle_seed);
    rng.shuffle(stream);
    return stream;
}

// --------------------------------------------------------------------------
// Optional standardization (off by default): per-dimension mean/std from a
// reference split, applied to any dataset.
// --------------------------------------------------------------------------

struct Standardization {
    std::vector<double> mean;
    std::vector<double> std;
};

inline Standardization compute_standardization(const Dataset& ds) {
    Standardization st;
    st.mean.assign(ds.d, 0.0);
    st.std.assign(ds.d, 0.0);
    if (ds.size() == 0) return st;
    for (const auto& x : ds.inputs)
        for (std::size_t i = 0; i < ds.d; ++i) st.mean[i] += x[i];
    for (auto& m : st.mean) m /= static_cast<double>(ds.size());
    for (const auto& x : ds.inputs)
        for (std::size_t i = 0; i < ds.d; ++i) {
            const double c = x[i] - st.mean[i];
            st.std[i] += c * c;
        }
    for (auto& s : st.std) s = std::max(std::sqrt(s / static_cast<double>(ds.size())), 1e-8);
    return st;
}

inline void apply_standardization(Dataset& ds, const Standardization& st) {
    for (auto& x : ds.inputs)
        for (std::size_t i = 0; i < ds.d; ++i) x[i] = (x[i] - st.mean[i]) / st.std[i];
}

} // namespace amber
