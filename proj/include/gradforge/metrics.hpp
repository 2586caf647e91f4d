#pragma once

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "gradforge/data.hpp"
#include "gradforge/errors.hpp"
#include "gradforge/network.hpp"

namespace gradforge {

/// counts(i, j) = number of class-j samples the network predicted as i.
struct ConfusionMatrix {
    std::size_t num_classes = 0;
    std::vector<std::size_t> counts; // row-major, row = predicted, col = true

    explicit ConfusionMatrix(std::size_t k = 0) : num_classes(k), counts(k * k, 0) {}

    std::size_t& at(std::size_t predicted, std::size_t truth) {
        return counts[predicted * num_classes + truth];
    }
    std::size_t at(std::size_t predicted, std::size_t truth) const {
        return counts[predicted * num_classes + truth];
    }

    std::size_t total() const {
        return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
    }
    std::size_t diagonal() const {
        std::size_t d = 0;
        for (std::size_t i = 0; i < num_classes; ++i) d += at(i, i);
        return d;
    }
    std::size_t row_sum(std::size_t i) const {
        std::size_t s = 0;
        for (std::size_t j = 0; j < num_classes; ++j) s += at(i, j);
        return s;
    }
    std::size_t col_sum(std::size_t j) const {
        std::size_t s = 0;
        for (std::size_t i = 0; i < num_classes; ++i) s += at(i, j);
        return s;
    }
};

inline ConfusionMatrix evaluate(const NetworkSpec& net, const LabeledDataset& data) {
    if (data.empty()) throw DomainError("evaluate: empty dataset");
    if (output_dim(net) != data.num_classes)
        throw ShapeError("evaluate: network has " + std::to_string(output_dim(net)) +
                         " outputs but dataset has " + std::to_string(data.num_classes) +
                         " classes");
    ConfusionMatrix cm(data.num_classes);
    for (std::size_t i = 0; i < data.size(); ++i)
        ++cm.at(predict_class(net, data.inputs[i]), data.labels[i]);
    return cm;
}

/// Fraction of samples whose true label is not among the k largest outputs.
/// Ranking sorts by value, ties by lowest index, matching predict_class.
inline double top_k_error(const NetworkSpec& net, const LabeledDataset& data, std::size_t k) {
    if (data.empty()) throw DomainError("top_k_error: empty dataset");
    if (k < 1 || k > data.num_classes)
        throw DomainError("top_k_error: k = " + std::to_string(k) + " out of range [1, " +
                          std::to_string(data.num_classes) + "]");
    std::size_t misses = 0;
    ForwardTrace trace;
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < data.size(); ++i) {
        forward_into(net, data.inputs[i], trace);
        const Vector& out = trace.output();
        order.resize(out.size());
        for (std::size_t j = 0; j < out.size(); ++j) order[j] = j;
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return out[a] > out[b]; });
        bool hit = false;
        for (std::size_t j = 0; j < k; ++j)
            if (order[j] == data.labels[i]) {
                hit = true;
                break;
            }
        if (!hit) ++misses;
    }
    return static_cast<double>(misses) / static_cast<double>(data.size());
}

/// Column j: fraction of true-class-j samples classified correctly. Row i:
/// fraction of class-i predictions that were correct. Rows or columns with
/// no samples report no value at all instead of 0 or NaN.
struct ConfusionSummary {
    std::vector<std::optional<double>> column_accuracy;
    std::vector<std::optional<double>> row_precision;
    double overall = 0.0;
};

inline ConfusionSummary summarize(const ConfusionMatrix& cm) {
    const std::size_t total = cm.total();
    if (total == 0) throw DomainError("summarize: empty confusion matrix");
    ConfusionSummary s;
    s.column_accuracy.resize(cm.num_classes);
    s.row_precision.resize(cm.num_classes);
    for (std::size_t j = 0; j < cm.num_classes; ++j) {
        const std::size_t cs = cm.col_sum(j);
        if (cs > 0)
            s.column_accuracy[j] = static_cast<double>(cm.at(j, j)) / static_cast<double>(cs);
    }
    for (std::size_t i = 0; i < cm.num_classes; ++i) {
        const std::size_t rs = cm.row_sum(i);
        if (rs > 0)
            s.row_precision[i] = static_cast<double>(cm.at(i, i)) / static_cast<double>(rs);
    }
    s.overall = static_cast<double>(cm.diagonal()) / static_cast<double>(total);
    return s;
}

namespace detail {
inline std::string percent(double fraction) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f%%", 100.0 * fraction);
    return buf;
}
} // namespace detail

/// Plain-text table: predicted classes down the rows, true classes across
/// the columns, an "all" row of per-column accuracies, an "all" column of
/// per-row precisions and the overall accuracy in the corner. Percentages
/// to one decimal place.
inline std::string format_confusion(const ConfusionMatrix& cm) {
    const ConfusionSummary s = summarize(cm);
    const int w = 8;
    std::string out;
    char buf[64];

    std::snprintf(buf, sizeof buf, "%*s", w, "pred\\true");
    out += buf;
    for (std::size_t j = 0; j < cm.num_classes; ++j) {
        std::snprintf(buf, sizeof buf, "%*zu", w, j);
        out += buf;
    }
    std::snprintf(buf, sizeof buf, "%*s\n", w, "all");
    out += buf;

    for (std::size_t i = 0; i < cm.num_classes; ++i) {
        std::snprintf(buf, sizeof buf, "%*zu", w, i);
        out += buf;
        for (std::size_t j = 0; j < cm.num_classes; ++j) {
            std::snprintf(buf, sizeof buf, "%*zu", w, cm.at(i, j));
            out += buf;
        }
        std::snprintf(buf, sizeof buf, "%*s\n", w,
                      s.row_precision[i] ? detail::percent(*s.row_precision[i]).c_str() : "-");
        out += buf;
    }

    std::snprintf(buf, sizeof buf, "%*s", w, "all");
    out += buf;
    for (std::size_t j = 0; j < cm.num_classes; ++j) {
        std::snprintf(buf, sizeof buf, "%*s", w,
                      s.column_accuracy[j] ? detail::percent(*s.column_accuracy[j]).c_str()
                                           : "-");
        out += buf;
    }
    std::snprintf(buf, sizeof buf, "%*s\n", w, detail::percent(s.overall).c_str());
    out += buf;
    return out;
}

/// CSV twin of the table: one row per predicted class with raw counts.
inline void write_confusion_csv(const ConfusionMatrix& cm, std::ostream& out) {
    for (std::size_t i = 0; i < cm.num_classes; ++i) {
        for (std::size_t j = 0; j < cm.num_classes; ++j) {
            if (j) out << ',';
            out << cm.at(i, j);
        }
        out << '\n';
    }
}

} // namespace gradforge
