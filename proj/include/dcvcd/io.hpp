#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "dcvcd/core.hpp"
#include "dcvcd/random.hpp"

namespace dcvcd {

enum class DataFormat { csv, binary };

inline DataFormat parse_format(std::string_view s) {
    if (s == "csv") return DataFormat::csv;
    if (s == "bin" || s == "binary") return DataFormat::binary;
    throw Error("unknown data format '" + std::string(s) + "' (expected csv or bin)");
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cell);
            cell.clear();
        } else if (ch != '\r') {
            cell.push_back(ch);
        }
    }
    out.push_back(cell);
    return out;
}

inline std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

inline double parse_real(const std::string& raw, std::size_t line, std::size_t column) {
    std::string s = trim(raw);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
        throw Error("csv line " + std::to_string(line) + ", column " + std::to_string(column) +
                    ": '" + s + "' is not a number");
    }
    if (!std::isfinite(value)) {
        throw Error("csv line " + std::to_string(line) + ", column " + std::to_string(column) +
                    ": non-finite value '" + s + "'");
    }
    return value;
}

inline int parse_int(const std::string& raw, const std::string& where) {
    std::string s = trim(raw);
    int value = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
        throw Error(where + ": '" + s + "' is not an integer");
    }
    return value;
}

inline std::string format_real(double x) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);  // shortest round-trip form
    return std::string(buf, ptr);
}

template <typename T>
void put_le(std::string& out, T value) {
    auto bits = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
    if constexpr (std::endian::native == std::endian::big) std::reverse(bits.begin(), bits.end());
    out.append(reinterpret_cast<const char*>(bits.data()), bits.size());
}

template <typename T>
T get_le(const std::string& in, std::size_t offset) {
    std::array<unsigned char, sizeof(T)> bits{};
    std::memcpy(bits.data(), in.data() + offset, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bits.begin(), bits.end());
    return std::bit_cast<T>(bits);
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "'");
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("failed writing '" + path + "'");
}

}  // namespace detail

// =============================================================================
// CSV: header row, id column first, optional trailing `label` column.
// =============================================================================

inline Dataset parse_csv_dataset(std::istream& in) {
    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(in, line)) throw Error("csv: missing header row");
    ++lineno;
    auto header = detail::split_csv_line(line);
    bool has_label = header.size() >= 2 && detail::trim(header.back()) == "label";
    std::size_t feature_cols = header.size() - 1 - (has_label ? 1 : 0);
    if (header.size() < 2 || feature_cols < 1) throw Error("csv: header needs an id column and at least one feature");

    std::vector<std::string> ids;
    std::vector<double> values;
    Labeling labels;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        auto cells = detail::split_csv_line(line);
        if (cells.size() != header.size()) {
            throw Error("csv line " + std::to_string(lineno) + ": expected " + std::to_string(header.size()) +
                        " cells, found " + std::to_string(cells.size()));
        }
        ids.push_back(detail::trim(cells[0]));
        for (std::size_t j = 0; j < feature_cols; ++j) {
            values.push_back(detail::parse_real(cells[1 + j], lineno, 2 + j));
        }
        if (has_label) labels.push_back(detail::parse_int(cells.back(), "csv line " + std::to_string(lineno)));
    }
    std::size_t n = ids.size();
    std::optional<Labeling> truth;
    if (has_label) truth = std::move(labels);
    return Dataset(std::move(ids), Matrix(n, feature_cols, std::move(values)), std::move(truth));
}

inline std::string to_csv(const Dataset& data) {
    std::string out = "id";
    for (std::size_t j = 0; j < data.dim(); ++j) out += ",f" + std::to_string(j);
    if (data.ground_truth()) out += ",label";
    out += '\n';
    for (std::size_t i = 0; i < data.size(); ++i) {
        out += data.ids()[i];
        for (double x : data.row(i)) {
            out += ',';
            out += detail::format_real(x);
        }
        if (data.ground_truth()) out += ',' + std::to_string((*data.ground_truth())[i]);
        out += '\n';
    }
    return out;
}

// =============================================================================
// Binary: "GCLS", version byte, u32 n, u32 d, n*d f32, optional n i32 labels.
// All little-endian. Sample ids are the row indices.
// =============================================================================

inline constexpr std::uint8_t kBinaryVersion = 1;

inline Dataset parse_binary_dataset(const std::string& bytes) {
    constexpr std::size_t header = 4 + 1 + 4 + 4;
    if (bytes.size() < header) {
        throw Error("binary: expected at least " + std::to_string(header) + " header bytes, found " +
                    std::to_string(bytes.size()));
    }
    if (bytes.compare(0, 4, "GCLS") != 0) throw Error("binary: bad magic at offset 0 (expected GCLS)");
    auto version = static_cast<std::uint8_t>(bytes[4]);
    if (version != kBinaryVersion) {
        throw Error("binary: unsupported version " + std::to_string(version) + " at offset 4");
    }
    auto n = detail::get_le<std::uint32_t>(bytes, 5);
    auto d = detail::get_le<std::uint32_t>(bytes, 9);
    if (d == 0) throw Error("binary: feature dimension is zero at offset 9");
    const std::size_t payload = static_cast<std::size_t>(n) * d * 4;
    const std::size_t with_payload = header + payload;
    if (bytes.size() < with_payload) {
        throw Error("binary: truncated feature payload: expected " + std::to_string(with_payload) +
                    " bytes, found " + std::to_string(bytes.size()));
    }
    const std::size_t with_labels = with_payload + static_cast<std::size_t>(n) * 4;
    if (bytes.size() != with_payload && bytes.size() != with_labels) {
        throw Error("binary: unexpected size: expected " + std::to_string(with_payload) + " or " +
                    std::to_string(with_labels) + " bytes, found " + std::to_string(bytes.size()));
    }
    std::vector<double> values(static_cast<std::size_t>(n) * d);
    for (std::size_t k = 0; k < values.size(); ++k) {
        float f = detail::get_le<float>(bytes, header + 4 * k);
        if (!std::isfinite(f)) {
            throw Error("binary: non-finite value at offset " + std::to_string(header + 4 * k));
        }
        values[k] = f;
    }
    std::optional<Labeling> truth;
    if (bytes.size() == with_labels) {
        Labeling labels(n);
        for (std::size_t i = 0; i < n; ++i) labels[i] = detail::get_le<std::int32_t>(bytes, with_payload + 4 * i);
        truth = std::move(labels);
    }
    std::vector<std::string> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = std::to_string(i);
    return Dataset(std::move(ids), Matrix(n, d, std::move(values)), std::move(truth));
}

/// Embeddings are narrowed to f32.
inline std::string to_binary(const Dataset& data) {
    std::string out = "GCLS";
    out.push_back(static_cast<char>(kBinaryVersion));
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(data.size()));
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(data.dim()));
    for (double x : data.embeddings().values()) detail::put_le<float>(out, static_cast<float>(x));
    if (data.ground_truth()) {
        for (int l : *data.ground_truth()) detail::put_le<std::int32_t>(out, l);
    }
    return out;
}

inline Dataset load_dataset(const std::string& path, DataFormat format) {
    if (format == DataFormat::binary) return parse_binary_dataset(detail::read_file(path));
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path + "'");
    return parse_csv_dataset(in);
}

inline void save_dataset(const std::string& path, const Dataset& data, DataFormat format) {
    detail::write_file(path, format == DataFormat::binary ? to_binary(data) : to_csv(data));
}

// =============================================================================
// Assignments: `id,cluster`
// =============================================================================

inline std::string assignments_csv(const Dataset& data, const Labeling& labels) {
    if (labels.size() != data.size()) throw Error("assignments: labeling does not match the dataset");
    std::string out = "id,cluster\n";
    for (std::size_t i = 0; i < labels.size(); ++i) out += data.ids()[i] + ',' + std::to_string(labels[i]) + '\n';
    return out;
}

/// Reads `id,<label>` rows after a header; returns ids and labels in file order.
inline std::pair<std::vector<std::string>, Labeling> read_assignments(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw Error("assignments: missing header in '" + path + "'");
    std::vector<std::string> ids;
    Labeling labels;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        auto cells = detail::split_csv_line(line);
        if (cells.size() != 2) throw Error("assignments line " + std::to_string(lineno) + ": expected 2 cells");
        ids.push_back(detail::trim(cells[0]));
        labels.push_back(detail::parse_int(cells[1], "assignments line " + std::to_string(lineno)));
    }
    return {std::move(ids), std::move(labels)};
}

// =============================================================================
// Config: flat `key = value` lines, `#` comments. Unknown keys are errors.
// =============================================================================

inline RunConfig parse_config(std::istream& in) {
    RunConfig cfg;
    std::string line;
    std::size_t lineno = 0;
    std::set<std::string> seen;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::string body = detail::trim(line);
        if (body.empty()) continue;
        auto eq = body.find('=');
        if (eq == std::string::npos) throw Error("config line " + std::to_string(lineno) + ": expected key = value");
        std::string key = detail::trim(body.substr(0, eq));
        std::string value = detail::trim(body.substr(eq + 1));
        std::string where = "config line " + std::to_string(lineno) + " (" + key + ")";
        if (!seen.insert(key).second) throw Error(where + ": duplicate key");
        auto real = [&] {
            double x = 0.0;
            auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), x);
            if (ec != std::errc() || ptr != value.data() + value.size() || value.empty()) {
                throw Error(where + ": '" + value + "' is not a number");
            }
            return x;
        };
        if (key == "similarity_threshold") cfg.similarity_threshold = real();
        else if (key == "confidence") cfg.confidence = real();
        else if (key == "k") cfg.k = detail::parse_int(value, where);
        else if (key == "tau") cfg.tau = real();
        else if (key == "learning_rate") cfg.learning_rate = real();
        else if (key == "batch_size") cfg.batch_size = detail::parse_int(value, where);
        else if (key == "epochs_per_iteration") cfg.epochs_per_iteration = detail::parse_int(value, where);
        else if (key == "max_iterations") cfg.max_iterations = detail::parse_int(value, where);
        else if (key == "distance_sample_cap") cfg.distance_sample_cap = detail::parse_int(value, where);
        else if (key == "merge_score_floor") cfg.merge_score_floor = real();
        else if (key == "seed") {
            std::uint64_t s = 0;
            auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), s);
            if (ec != std::errc() || ptr != value.data() + value.size() || value.empty()) {
                throw Error(where + ": '" + value + "' is not an unsigned integer");
            }
            cfg.seed = s;
        } else {
            throw Error("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        }
    }
    cfg.validate();
    return cfg;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config '" + path + "'");
    return parse_config(in);
}

inline std::string to_config_text(const RunConfig& cfg) {
    std::ostringstream out;
    out << "similarity_threshold = " << detail::format_real(cfg.similarity_threshold) << '\n'
        << "confidence = " << detail::format_real(cfg.confidence) << '\n'
        << "k = " << cfg.k << '\n'
        << "tau = " << detail::format_real(cfg.tau) << '\n'
        << "learning_rate = " << detail::format_real(cfg.learning_rate) << '\n'
        << "batch_size = " << cfg.batch_size << '\n'
        << "epochs_per_iteration = " << cfg.epochs_per_iteration << '\n'
        << "max_iterations = " << cfg.max_iterations << '\n'
        << "seed = " << cfg.seed << '\n'
        << "distance_sample_cap = " << cfg.distance_sample_cap << '\n';
    if (std::isfinite(cfg.merge_score_floor)) {
        out << "merge_score_floor = " << detail::format_real(cfg.merge_score_floor) << '\n';
    }
    return out.str();
}

// =============================================================================
// Synthetic data
// =============================================================================

/// k isotropic Gaussian blobs around random unit-norm centers. Sizes are
/// balanced to within one sample; rows are shuffled so cluster order carries
/// no signal. Ground truth is the generating blob.
inline Dataset generate_blobs(int k, std::size_t n, std::size_t d, double spread, std::uint64_t seed) {
    if (k < 1) throw Error("generate_blobs: k must be positive");
    if (static_cast<std::size_t>(k) > n) throw Error("generate_blobs: k exceeds n");
    if (d < 1) throw Error("generate_blobs: d must be positive");
    if (!(spread > 0.0)) throw Error("generate_blobs: spread must be positive");
    Rng rng(seed);
    NormalSampler normal;
    Matrix centers(k, d);
    for (int c = 0; c < k; ++c) {
        auto r = centers.row(c);
        double len = 0.0;
        do {
            for (double& x : r) x = normal(rng);
            len = norm(r);
        } while (len == 0.0);
        for (double& x : r) x /= len;
    }
    Labeling truth(n);
    for (std::size_t i = 0; i < n; ++i) truth[i] = static_cast<int>(i % static_cast<std::size_t>(k));
    shuffle(truth.begin(), truth.end(), rng);
    Matrix x(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        auto center = centers.row(truth[i]);
        auto row = x.row(i);
        for (std::size_t j = 0; j < d; ++j) row[j] = center[j] + spread * normal(rng);
    }
    std::vector<std::string> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = "s" + std::to_string(i);
    return Dataset(std::move(ids), std::move(x), std::move(truth));
}

}  // namespace dcvcd
