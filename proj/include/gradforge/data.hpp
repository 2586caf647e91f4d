#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gradforge/conv.hpp"
#include "gradforge/errors.hpp"
#include "gradforge/linalg.hpp"
#include "gradforge/network.hpp"
#include "gradforge/rng.hpp"
#include "gradforge/util.hpp"

namespace gradforge {

/// Inputs with integer class labels in [0, num_classes); one-hot targets are
/// derived on demand.
struct LabeledDataset {
    std::vector<Vector> inputs;
    std::vector<std::size_t> labels;
    std::size_t num_classes = 0;

    std::size_t size() const { return inputs.size(); }
    bool empty() const { return inputs.empty(); }
    std::size_t input_dim() const { return inputs.empty() ? 0 : inputs.front().size(); }

    Vector one_hot(std::size_t i) const {
        Vector t(num_classes, 0.0);
        t[labels[i]] = 1.0;
        return t;
    }

    void append(Vector x, std::size_t label) {
        if (label >= num_classes)
            throw DomainError("dataset: label " + std::to_string(label) +
                              " out of range for " + std::to_string(num_classes) + " classes");
        if (!inputs.empty() && x.size() != input_dim())
            throw ShapeError("dataset: input of length " + std::to_string(x.size()) +
                             " added to dataset with dimension " + std::to_string(input_dim()));
        inputs.push_back(std::move(x));
        labels.push_back(label);
    }
};

struct Split {
    LabeledDataset train;
    LabeledDataset validation;
};

/// The canonical ten points of the two-class toy problem: five circles
/// (class 0) and five crosses (class 1) in the unit square, not linearly
/// separable.
inline LabeledDataset toy_dataset() {
    LabeledDataset d;
    d.num_classes = 2;
    d.append({0.1, 0.1}, 0);
    d.append({0.3, 0.4}, 0);
    d.append({0.1, 0.5}, 0);
    d.append({0.6, 0.9}, 0);
    d.append({0.4, 0.2}, 0);
    d.append({0.6, 0.3}, 1);
    d.append({0.5, 0.6}, 1);
    d.append({0.9, 0.2}, 1);
    d.append({0.4, 0.4}, 1);
    d.append({0.7, 0.6}, 1);
    return d;
}

/// Toy problem plus one extra cross at (0.3, 0.7).
inline LabeledDataset toy_dataset_extended() {
    LabeledDataset d = toy_dataset();
    d.append({0.3, 0.7}, 1);
    return d;
}

/// CSV rows: n_features comma-separated reals then one integer label.
/// Decimal-point reals, '#' starts a comment line, blank lines skipped.
inline LabeledDataset load_csv(std::istream& in, std::size_t n_features, std::size_t K) {
    LabeledDataset d;
    d.num_classes = K;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() != n_features + 1)
            throw ParseError("csv line " + std::to_string(line_no) + ": expected " +
                             std::to_string(n_features + 1) + " fields, got " +
                             std::to_string(fields.size()));
        Vector x(n_features);
        for (std::size_t i = 0; i < n_features; ++i) {
            std::size_t pos = 0;
            try {
                x[i] = std::stod(fields[i], &pos);
            } catch (const std::exception&) {
                throw ParseError("csv line " + std::to_string(line_no) + ": bad real '" +
                                 fields[i] + "'");
            }
            if (pos != fields[i].size())
                throw ParseError("csv line " + std::to_string(line_no) + ": bad real '" +
                                 fields[i] + "'");
        }
        long label = 0;
        try {
            std::size_t pos = 0;
            label = std::stol(fields.back(), &pos);
            if (pos != fields.back().size()) throw std::invalid_argument("");
        } catch (const std::exception&) {
            throw ParseError("csv line " + std::to_string(line_no) + ": bad label '" +
                             fields.back() + "'");
        }
        if (label < 0 || static_cast<std::size_t>(label) >= K)
            throw DomainError("csv line " + std::to_string(line_no) + ": label " +
                              std::to_string(label) + " out of range for " + std::to_string(K) +
                              " classes");
        d.append(std::move(x), static_cast<std::size_t>(label));
    }
    if (d.empty()) throw DomainError("csv: no data rows");
    return d;
}

inline LabeledDataset load_csv(const std::string& path, std::size_t n_features,
                               std::size_t K) {
    std::ifstream f(path);
    if (!f) throw DomainError("csv: cannot open '" + path + "'");
    return load_csv(f, n_features, K);
}

/// Writes the CSV schema load_csv reads; reals carry 17 significant digits
/// so a load/save/load cycle reproduces every value bit for bit.
inline void save_csv(const LabeledDataset& data, std::ostream& out) {
    for (std::size_t i = 0; i < data.size(); ++i) {
        write_csv_reals(out, data.inputs[i]);
        out << ',' << data.labels[i] << '\n';
    }
}

/// Seeded Fisher-Yates permutation of 0..n-1.
inline std::vector<std::size_t> shuffled_indices(std::size_t n, Pcg32& rng) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = rng.uniform_below(static_cast<std::uint32_t>(i));
        std::swap(idx[i - 1], idx[j]);
    }
    return idx;
}

/// Disjoint, exhaustive train/validation split. Validation takes
/// round(val_fraction * N) points chosen by a seeded shuffle; both halves
/// keep the source row order.
inline Split split(const LabeledDataset& data, double val_fraction, std::uint64_t seed) {
    if (!(val_fraction >= 0.0 && val_fraction < 1.0))
        throw DomainError("split: val_fraction must be in [0,1), got " +
                          std::to_string(val_fraction));
    const std::size_t n = data.size();
    const std::size_t val_n =
        static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(n)));
    Pcg32 rng = make_rng(seed, RngStream::DataSplit);
    std::vector<std::size_t> idx = shuffled_indices(n, rng);
    std::vector<bool> is_val(n, false);
    for (std::size_t i = 0; i < val_n; ++i) is_val[idx[i]] = true;

    Split s;
    s.train.num_classes = data.num_classes;
    s.validation.num_classes = data.num_classes;
    for (std::size_t i = 0; i < n; ++i) {
        LabeledDataset& dst = is_val[i] ? s.validation : s.train;
        dst.append(data.inputs[i], data.labels[i]);
    }
    return s;
}

struct GridPoint {
    double x = 0.0;
    double y = 0.0;
    std::size_t predicted = 0;
    Vector outputs;
};

/// resolution x resolution lattice over the unit square, each node carrying
/// the predicted class and the raw network outputs. Row-major with x varying
/// fastest.
inline std::vector<GridPoint> boundary_grid(const NetworkSpec& net, std::size_t resolution) {
    if (net.input_dim() != 2)
        throw DomainError("boundary_grid: network takes " + std::to_string(net.input_dim()) +
                          " inputs, need exactly 2");
    if (resolution < 2)
        throw DomainError("boundary_grid: resolution must be at least 2, got " +
                          std::to_string(resolution));
    std::vector<GridPoint> grid;
    grid.reserve(resolution * resolution);
    const double h = 1.0 / static_cast<double>(resolution - 1);
    ForwardTrace trace;
    for (std::size_t iy = 0; iy < resolution; ++iy) {
        for (std::size_t ix = 0; ix < resolution; ++ix) {
            GridPoint p;
            p.x = static_cast<double>(ix) * h;
            p.y = static_cast<double>(iy) * h;
            forward_into(net, {p.x, p.y}, trace);
            p.outputs = trace.output();
            p.predicted = 0;
            for (std::size_t i = 1; i < p.outputs.size(); ++i)
                if (p.outputs[i] > p.outputs[p.predicted]) p.predicted = i;
            grid.push_back(std::move(p));
        }
    }
    return grid;
}

/// Synthetic image-classification data for capacity tests: each class gets a
/// fixed random pattern in [0,1] and samples are the pattern plus uniform
/// noise, clamped to [0,1]. Deterministic given seed.
inline LabeledDataset synthetic_images(std::size_t n, std::size_t K, Shape3 shape,
                                       double noise, std::uint64_t seed) {
    if (K == 0 || n == 0) throw DomainError("synthetic_images: need n > 0 and K > 0");
    Pcg32 rng(seed, /*stream=*/7);
    std::vector<Vector> means(K);
    for (std::size_t k = 0; k < K; ++k) {
        means[k].resize(shape.volume());
        for (double& v : means[k]) v = rng.uniform_double();
    }
    LabeledDataset d;
    d.num_classes = K;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t k = i % K;
        Vector x = means[k];
        for (double& v : x)
            v = std::clamp(v + noise * (2.0 * rng.uniform_double() - 1.0), 0.0, 1.0);
        d.append(std::move(x), k);
    }
    return d;
}

} // namespace gradforge
