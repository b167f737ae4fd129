#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "netsight/error.hpp"
#include "netsight/tensor.hpp"

namespace netsight {

/// Binary class of a flow record. Abnormal is the positive class everywhere.
enum class Label : std::uint8_t { normal = 0, abnormal = 1 };

[[nodiscard]] constexpr int to_int(Label l) noexcept { return static_cast<int>(l); }

[[nodiscard]] inline Label label_from_int(long v) {
    if (v == 0) return Label::normal;
    if (v == 1) return Label::abnormal;
    throw DataError("label must be 0 or 1, got " + std::to_string(v));
}

struct LabeledSample {
    Vec features;
    Label label = Label::normal;

    bool operator==(const LabeledSample&) const = default;
};

/// A window of records sharing one feature dimension.
struct Dataset {
    std::size_t dim = 0;
    std::vector<LabeledSample> samples;

    [[nodiscard]] std::size_t size() const noexcept { return samples.size(); }
    [[nodiscard]] bool empty() const noexcept { return samples.empty(); }

    [[nodiscard]] std::size_t count(Label l) const noexcept {
        std::size_t n = 0;
        for (const auto& s : samples) n += (s.label == l);
        return n;
    }

    [[nodiscard]] std::vector<Label> labels() const {
        std::vector<Label> out;
        out.reserve(samples.size());
        for (const auto& s : samples) out.push_back(s.label);
        return out;
    }

    /// Checks the FeatureVector invariants: fixed dimension, finite entries.
    void validate() const {
        if (dim == 0) throw DataError("dataset has zero feature dimension");
        for (std::size_t i = 0; i < samples.size(); ++i) {
            const auto& f = samples[i].features;
            if (f.size() != dim) {
                throw DataError("sample " + std::to_string(i) + " has " + std::to_string(f.size()) +
                                " features, expected " + std::to_string(dim));
            }
            if (!all_finite(f)) throw DataError("sample " + std::to_string(i) + " has non-finite features");
        }
    }

    [[nodiscard]] Dataset subset(std::span<const std::size_t> indices) const {
        Dataset out{dim, {}};
        out.samples.reserve(indices.size());
        for (std::size_t i : indices) out.samples.push_back(samples.at(i));
        return out;
    }

    bool operator==(const Dataset&) const = default;
};

}  // namespace netsight
