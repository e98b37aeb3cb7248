#pragma once

#include <string>
#include <vector>

#include "dcvcd/core.hpp"

namespace testutil {

/// Dataset from literal rows; ids are "n0", "n1", ...
inline dcvcd::Dataset rows(const std::vector<std::vector<double>>& r,
                           std::optional<dcvcd::Labeling> truth = std::nullopt) {
    const std::size_t d = r.empty() ? 1 : r.front().size();
    std::vector<double> flat;
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < r.size(); ++i) {
        flat.insert(flat.end(), r[i].begin(), r[i].end());
        ids.push_back("n" + std::to_string(i));
    }
    return dcvcd::Dataset(std::move(ids), dcvcd::Matrix(r.size(), d, std::move(flat)), std::move(truth));
}

inline dcvcd::NodeSet range(std::size_t lo, std::size_t hi) {
    dcvcd::NodeSet s;
    for (std::size_t i = lo; i < hi; ++i) s.push_back(i);
    return s;
}

}  // namespace testutil
