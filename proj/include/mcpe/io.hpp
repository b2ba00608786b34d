#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "mcpe/error.hpp"
#include "mcpe/features.hpp"
#include "mcpe/mrp.hpp"
#include "mcpe/value_vector.hpp"

// JSON file formats.
//
//   MRP:      {"n": int, "gamma": float, "rows": [[[target, prob], ...], ...],
//              "reward_mean": [float, ...], "reward_stddev": [float, ...]}
//   values:   {"n": int, "values": [float, ...], "visited": [bool, ...]}
//   features: {"k": int, "rows": {"<state>": [float, ...], ...}}
//   matrix:   {"matrix": [[float, ...], ...]}
//
// Writers print every float with 17 significant digits so a read returns the
// identical double. Readers validate all model invariants.

namespace mcpe {

namespace io {

using json = nlohmann::json;

/// %.17g rendering of a finite double.
inline std::string format_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("error reading '" + path + "'");
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << content;
    out.flush();
    if (!out) throw IoError("error writing '" + path + "'");
}

inline json parse(const std::string& text, const std::string& what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(what + ": invalid JSON: " + e.what());
    }
}

namespace detail {

inline void write_array(std::ostringstream& os, const std::vector<double>& v) {
    os << '[';
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ", " : "") << format_double(v[i]);
    os << ']';
}

template <class T>
T get(const json& j, const char* key, const std::string& what) {
    if (!j.contains(key)) throw ValidationError(what + ": missing field '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ValidationError(what + ": bad field '" + key + "': " + e.what());
    }
}

} // namespace detail

inline std::string mrp_to_json(const Mrp& mrp) {
    std::ostringstream os;
    os << "{\"n\": " << mrp.size() << ", \"gamma\": " << format_double(mrp.gamma()) << ", \"rows\": [";
    for (StateIndex i = 0; i < mrp.size(); ++i) {
        os << (i ? ", " : "") << '[';
        const auto t = mrp.transitions().targets(i);
        const auto p = mrp.transitions().probs(i);
        for (std::size_t k = 0; k < t.size(); ++k) os << (k ? ", " : "") << '[' << t[k] << ", " << format_double(p[k]) << ']';
        os << ']';
    }
    os << "], \"reward_mean\": ";
    detail::write_array(os, mrp.rewards().mean());
    os << ", \"reward_stddev\": ";
    detail::write_array(os, mrp.rewards().stddev());
    os << "}\n";
    return os.str();
}

inline Mrp mrp_from_json(const json& j) {
    const std::string what = "MRP JSON";
    if (!j.is_object()) throw ValidationError(what + ": expected an object");
    const auto n = detail::get<std::int64_t>(j, "n", what);
    const auto gamma = detail::get<double>(j, "gamma", what);
    const auto raw_rows = detail::get<std::vector<std::vector<std::pair<std::int64_t, double>>>>(j, "rows", what);
    auto mean = detail::get<std::vector<double>>(j, "reward_mean", what);
    std::vector<double> stddev;
    if (j.contains("reward_stddev")) stddev = detail::get<std::vector<double>>(j, "reward_stddev", what);
    if (n <= 0) throw ValidationError(what + ": n must be positive");
    if (raw_rows.size() != static_cast<std::size_t>(n))
        throw ValidationError(what + ": n = " + std::to_string(n) + " but " + std::to_string(raw_rows.size()) + " rows");
    std::vector<SparseRow> rows(raw_rows.size());
    for (std::size_t i = 0; i < raw_rows.size(); ++i)
        for (auto [t, p] : raw_rows[i]) {
            if (t < 0) throw ValidationError(what + ": negative target in row " + std::to_string(i));
            rows[i].push_back({static_cast<StateIndex>(t), p});
        }
    return Mrp(TransitionMatrix(rows), RewardModel(std::move(mean), std::move(stddev)), gamma);
}

inline Mrp read_mrp(const std::string& path) { return mrp_from_json(parse(read_file(path), path)); }

inline void write_mrp(const Mrp& mrp, const std::string& path) { write_file(path, mrp_to_json(mrp)); }

inline std::string values_to_json(const ValueVector& v) {
    std::ostringstream os;
    os << "{\"n\": " << v.size() << ", \"values\": ";
    detail::write_array(os, v.values);
    os << ", \"visited\": [";
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ", " : "") << (v.visited[i] ? "true" : "false");
    os << "]}\n";
    return os.str();
}

inline ValueVector values_from_json(const json& j) {
    const std::string what = "values JSON";
    ValueVector out;
    out.values = detail::get<std::vector<double>>(j, "values", what);
    if (j.contains("visited"))
        out.visited = detail::get<std::vector<bool>>(j, "visited", what);
    else
        out.visited.assign(out.values.size(), true);
    if (out.visited.size() != out.values.size()) throw ValidationError(what + ": visited length mismatch");
    return out;
}

inline FeatureMatrix features_from_json(const json& j) {
    const std::string what = "features JSON";
    const auto k = detail::get<std::int64_t>(j, "k", what);
    if (k <= 0) throw ValidationError(what + ": k must be positive");
    if (!j.contains("rows") || !j.at("rows").is_object()) throw ValidationError(what + ": 'rows' must be an object");
    std::unordered_map<StateIndex, std::vector<double>> rows;
    for (const auto& [key, val] : j.at("rows").items()) {
        StateIndex s = 0;
        try {
            std::size_t used = 0;
            s = std::stoull(key, &used);
            if (used != key.size()) throw std::invalid_argument(key);
        } catch (const std::exception&) {
            throw ValidationError(what + ": bad state key '" + key + "'");
        }
        try {
            rows.emplace(s, val.get<std::vector<double>>());
        } catch (const json::exception& e) {
            throw ValidationError(what + ": bad row for state " + key + ": " + e.what());
        }
    }
    return FeatureMatrix::from_rows(static_cast<std::size_t>(k), std::move(rows));
}

inline FeatureMatrix read_features(const std::string& path) { return features_from_json(parse(read_file(path), path)); }

inline Eigen::MatrixXd matrix_from_json(const json& j) {
    const std::string what = "matrix JSON";
    const auto rows = detail::get<std::vector<std::vector<double>>>(j, "matrix", what);
    const auto n = static_cast<Eigen::Index>(rows.size());
    Eigen::MatrixXd m(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) != n)
            throw ValidationError(what + ": matrix must be square");
        for (Eigen::Index c = 0; c < n; ++c) m(i, c) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)];
    }
    return m;
}

} // namespace io

} // namespace mcpe
