// Monthly return panels: delimited-text loading, excess-return conversion,
// availability masks, minimum-history filtering and per-date universe
// selection with deterministic subsampling.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "divbench/linalg.hpp"

namespace divbench {

class panel_error : public std::runtime_error {
public:
    explicit panel_error(const std::string& what) : std::runtime_error(what) {}
};

// Months are serial numbers year*12 + (month-1) so monthly spacing is +1.
inline int make_month(int year, int month) { return year * 12 + (month - 1); }

inline std::string month_label(int serial) {
    const int year = serial / 12;
    const int month = serial % 12 + 1;
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d", year, month);
    return buf;
}

/// Accepts YYYY-MM, YYYYMM and YYYY-MM-DD date cells.
inline std::optional<int> parse_month(const std::string& text) {
    std::string s = text;
    s.erase(std::remove_if(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); }),
            s.end());
    auto all_digits = [](const std::string& v) {
        return !v.empty() && std::all_of(v.begin(), v.end(),
                                         [](unsigned char c) { return std::isdigit(c); });
    };
    if (all_digits(s) && s.size() == 6) {
        const int year = std::stoi(s.substr(0, 4));
        const int month = std::stoi(s.substr(4, 2));
        if (month < 1 || month > 12) return std::nullopt;
        return make_month(year, month);
    }
    if (s.size() >= 7 && s[4] == '-') {
        const std::string y = s.substr(0, 4), m = s.substr(5, 2);
        if (!all_digits(y) || !all_digits(m)) return std::nullopt;
        const int month = std::stoi(m);
        if (month < 1 || month > 12) return std::nullopt;
        if (s.size() > 7 && s[7] != '-') return std::nullopt;
        return make_month(std::stoi(y), month);
    }
    return std::nullopt;
}

struct ColumnLayout {
    std::string date_column = "date";
    std::vector<std::string> factor_columns;
    std::string risk_free_column;           // empty: no risk-free series
    std::vector<std::string> asset_columns; // empty: every remaining column
    bool percent = false;                   // cells are percents, divide by 100
    bool subtract_risk_free = true;         // convert asset returns to excess
    bool factors_investable = true;         // factor columns double as assets
};

struct ReturnPanel {
    std::vector<int> dates;             // strictly increasing month serials
    std::vector<std::string> assets;
    MatrixXd excess_returns;            // T x N, NaN where unavailable
    std::vector<std::string> factor_names;
    MatrixXd factors;                   // T x K factor excess returns
    std::vector<std::vector<char>> availability;  // T x N
    VectorXd risk_free;                 // T, zeros when absent
    bool has_risk_free = false;
    std::vector<char> rf_subtracted;    // per asset: risk-free was removed on load

    Eigen::Index months() const { return static_cast<Eigen::Index>(dates.size()); }
    Eigen::Index n_assets() const { return static_cast<Eigen::Index>(assets.size()); }

    bool available(Eigen::Index t, Eigen::Index i) const {
        return availability[static_cast<size_t>(t)][static_cast<size_t>(i)] != 0;
    }

    std::optional<Eigen::Index> date_index(int month_serial) const {
        const auto it = std::lower_bound(dates.begin(), dates.end(), month_serial);
        if (it == dates.end() || *it != month_serial) return std::nullopt;
        return static_cast<Eigen::Index>(it - dates.begin());
    }
};

struct UniverseSelection {
    int date = 0;                       // month serial
    std::vector<Eigen::Index> active_assets;
    std::uint64_t seed = 0;
};

namespace detail {

inline std::vector<std::string> split_fields(const std::string& line, char delim) {
    std::vector<std::string> out;
    if (delim == ' ') {
        std::istringstream is(line);
        std::string tok;
        while (is >> tok) out.push_back(tok);
        return out;
    }
    std::string field;
    std::istringstream is(line);
    while (std::getline(is, field, delim)) {
        // trim
        const auto b = field.find_first_not_of(" \t\r");
        const auto e = field.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? std::string() : field.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == delim) out.emplace_back();
    return out;
}

// French library missing-data sentinels
inline bool is_missing_sentinel(double v) {
    return std::abs(v + 99.99) < 1e-9 || std::abs(v + 999.0) < 1e-9;
}

inline std::uint64_t fnv1a(std::uint64_t h, const void* data, size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::uint64_t universe_hash(std::uint64_t seed, int date, const std::string& asset) {
    std::uint64_t h = 14695981039346656037ULL;
    h = fnv1a(h, &seed, sizeof(seed));
    h = fnv1a(h, &date, sizeof(date));
    h = fnv1a(h, asset.data(), asset.size());
    // splitmix finalizer for better dispersion
    h ^= h >> 30;
    h *= 0xbf58476d1ce4e5b9ULL;
    h ^= h >> 27;
    h *= 0x94d049bb133111ebULL;
    h ^= h >> 31;
    return h;
}

}  // namespace detail

/// Load and validate a monthly panel from delimited text with a header row.
/// Missing cells (empty or the -99.99/-999 sentinels) become unavailable
/// entries; asset returns are converted to excess by subtracting the
/// risk-free column when the layout requests it.
inline ReturnPanel load_return_panel(const std::string& path, const ColumnLayout& layout) {
    std::ifstream in(path);
    if (!in) throw panel_error("load_return_panel: cannot open " + path);

    std::string header;
    if (!std::getline(in, header)) throw panel_error("load_return_panel: empty file " + path);
    if (!header.empty() && header.back() == '\r') header.pop_back();
    const char delim = header.find(',') != std::string::npos
                           ? ','
                           : (header.find('\t') != std::string::npos ? '\t' : ' ');
    const std::vector<std::string> names = detail::split_fields(header, delim);

    auto column_of = [&](const std::string& name) -> std::optional<size_t> {
        for (size_t c = 0; c < names.size(); ++c)
            if (names[c] == name) return c;
        return std::nullopt;
    };

    const auto date_col = column_of(layout.date_column);
    if (!date_col)
        throw panel_error("load_return_panel: date column '" + layout.date_column +
                          "' not found in header");

    std::optional<size_t> rf_col;
    if (!layout.risk_free_column.empty()) {
        rf_col = column_of(layout.risk_free_column);
        if (!rf_col)
            throw panel_error("load_return_panel: risk-free column '" +
                              layout.risk_free_column + "' not found");
    }

    std::vector<size_t> factor_cols;
    for (const auto& f : layout.factor_columns) {
        const auto c = column_of(f);
        if (!c) throw panel_error("load_return_panel: factor column '" + f + "' not found");
        factor_cols.push_back(*c);
    }

    // Assets: the explicit list, or every column not claimed by another role.
    std::vector<size_t> asset_cols;
    std::vector<char> asset_is_factor;
    if (!layout.asset_columns.empty()) {
        for (const auto& a : layout.asset_columns) {
            const auto c = column_of(a);
            if (!c) throw panel_error("load_return_panel: asset column '" + a + "' not found");
            asset_cols.push_back(*c);
            asset_is_factor.push_back(
                std::find(factor_cols.begin(), factor_cols.end(), *c) != factor_cols.end());
        }
    } else {
        for (size_t c = 0; c < names.size(); ++c) {
            if (c == *date_col) continue;
            if (rf_col && c == *rf_col) continue;
            const bool is_factor =
                std::find(factor_cols.begin(), factor_cols.end(), c) != factor_cols.end();
            if (is_factor && !layout.factors_investable) continue;
            asset_cols.push_back(c);
            asset_is_factor.push_back(is_factor);
        }
    }
    if (asset_cols.size() < 2)
        throw panel_error("load_return_panel: fewer than 2 asset columns");

    ReturnPanel panel;
    for (size_t c : asset_cols) panel.assets.push_back(names[c]);
    for (size_t c : factor_cols) panel.factor_names.push_back(names[c]);
    panel.has_risk_free = rf_col.has_value();

    const double unit = layout.percent ? 0.01 : 1.0;
    std::vector<int> dates;
    std::vector<std::vector<double>> asset_rows, factor_rows;
    std::vector<double> rf_rows;

    std::string line;
    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        const std::vector<std::string> fields = detail::split_fields(line, delim);
        if (fields.size() < names.size())
            throw panel_error("load_return_panel: row " + std::to_string(line_no) +
                              " has " + std::to_string(fields.size()) + " fields, expected " +
                              std::to_string(names.size()));

        const auto month = parse_month(fields[*date_col]);
        if (!month)
            throw panel_error("load_return_panel: malformed date '" + fields[*date_col] +
                              "' at row " + std::to_string(line_no));
        if (!dates.empty() && *month <= dates.back())
            throw panel_error("load_return_panel: non-monotone dates at row " +
                              std::to_string(line_no));
        if (!dates.empty() && *month != dates.back() + 1)
            throw panel_error("load_return_panel: non-monthly spacing at row " +
                              std::to_string(line_no) + " (" + month_label(dates.back()) +
                              " -> " + month_label(*month) + ")");
        dates.push_back(*month);

        auto parse_cell = [&](size_t col) -> double {  // NaN encodes missing
            const std::string& cell = fields[col];
            if (cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan")
                return std::numeric_limits<double>::quiet_NaN();
            size_t pos = 0;
            double v;
            try {
                v = std::stod(cell, &pos);
            } catch (const std::exception&) {
                throw panel_error("load_return_panel: unparsable cell '" + cell + "' at row " +
                                  std::to_string(line_no) + ", column '" + names[col] + "'");
            }
            if (pos != cell.size())
                throw panel_error("load_return_panel: unparsable cell '" + cell + "' at row " +
                                  std::to_string(line_no) + ", column '" + names[col] + "'");
            if (detail::is_missing_sentinel(v)) return std::numeric_limits<double>::quiet_NaN();
            return v * unit;
        };

        double rf = 0.0;
        if (rf_col) {
            rf = parse_cell(*rf_col);
            if (std::isnan(rf))
                throw panel_error("load_return_panel: missing risk-free value at row " +
                                  std::to_string(line_no));
        }
        rf_rows.push_back(rf);

        std::vector<double> arow(asset_cols.size());
        for (size_t k = 0; k < asset_cols.size(); ++k) {
            double v = parse_cell(asset_cols[k]);
            // factor columns already hold excess returns
            if (rf_col && layout.subtract_risk_free && !asset_is_factor[k] && !std::isnan(v))
                v -= rf;
            arow[k] = v;
        }
        asset_rows.push_back(std::move(arow));

        std::vector<double> frow(factor_cols.size());
        for (size_t k = 0; k < factor_cols.size(); ++k) frow[k] = parse_cell(factor_cols[k]);
        factor_rows.push_back(std::move(frow));
    }

    const Eigen::Index T = static_cast<Eigen::Index>(dates.size());
    const Eigen::Index N = static_cast<Eigen::Index>(asset_cols.size());
    const Eigen::Index K = static_cast<Eigen::Index>(factor_cols.size());
    if (T == 0) throw panel_error("load_return_panel: no data rows in " + path);

    panel.dates = std::move(dates);
    panel.excess_returns.resize(T, N);
    panel.factors.resize(T, K);
    panel.availability.assign(static_cast<size_t>(T),
                              std::vector<char>(static_cast<size_t>(N), 0));
    panel.risk_free.setZero(T);
    panel.rf_subtracted.resize(static_cast<size_t>(N));
    for (Eigen::Index i = 0; i < N; ++i)
        panel.rf_subtracted[static_cast<size_t>(i)] =
            (rf_col && layout.subtract_risk_free && !asset_is_factor[static_cast<size_t>(i)]) ? 1 : 0;

    for (Eigen::Index t = 0; t < T; ++t) {
        panel.risk_free(t) = rf_rows[static_cast<size_t>(t)];
        for (Eigen::Index i = 0; i < N; ++i) {
            const double v = asset_rows[static_cast<size_t>(t)][static_cast<size_t>(i)];
            panel.excess_returns(t, i) = v;
            panel.availability[static_cast<size_t>(t)][static_cast<size_t>(i)] =
                std::isnan(v) ? 0 : 1;
        }
        for (Eigen::Index k = 0; k < K; ++k)
            panel.factors(t, k) = factor_rows[static_cast<size_t>(t)][static_cast<size_t>(k)];
    }
    return panel;
}

/// Drop assets with fewer than min_obs available observations.
inline ReturnPanel filter_min_history(const ReturnPanel& panel, Eigen::Index min_obs) {
    if (min_obs < 1) throw std::invalid_argument("filter_min_history: min_obs must be >= 1");
    const Eigen::Index T = panel.months(), N = panel.n_assets();
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < N; ++i) {
        Eigen::Index count = 0;
        for (Eigen::Index t = 0; t < T; ++t)
            if (panel.available(t, i)) ++count;
        if (count >= min_obs) keep.push_back(i);
    }
    if (keep.empty()) throw panel_error("filter_min_history: all assets dropped");

    ReturnPanel out;
    out.dates = panel.dates;
    out.factor_names = panel.factor_names;
    out.factors = panel.factors;
    out.risk_free = panel.risk_free;
    out.has_risk_free = panel.has_risk_free;
    out.excess_returns.resize(T, static_cast<Eigen::Index>(keep.size()));
    out.availability.assign(static_cast<size_t>(T),
                            std::vector<char>(keep.size(), 0));
    for (size_t k = 0; k < keep.size(); ++k) {
        out.assets.push_back(panel.assets[static_cast<size_t>(keep[k])]);
        out.rf_subtracted.push_back(panel.rf_subtracted[static_cast<size_t>(keep[k])]);
        out.excess_returns.col(static_cast<Eigen::Index>(k)) = panel.excess_returns.col(keep[k]);
        for (Eigen::Index t = 0; t < T; ++t)
            out.availability[static_cast<size_t>(t)][k] =
                panel.availability[static_cast<size_t>(t)][static_cast<size_t>(keep[k])];
    }
    return out;
}

/// Assets with a complete M-month history ending at date; when more than
/// cap qualify, cap of them are drawn by ranking a per-asset hash keyed on
/// (seed, date, asset identifier), so the draw is reproducible and tied to
/// column identity rather than position.
inline UniverseSelection select_universe(const ReturnPanel& panel, int date, Eigen::Index M,
                                         Eigen::Index cap, std::uint64_t seed) {
    const auto t_opt = panel.date_index(date);
    if (!t_opt) throw panel_error("select_universe: date " + month_label(date) + " not in panel");
    const Eigen::Index t = *t_opt;
    if (t < M - 1)
        throw panel_error("select_universe: date " + month_label(date) + " has fewer than " +
                          std::to_string(M) + " months of history");

    std::vector<Eigen::Index> qualified;
    for (Eigen::Index i = 0; i < panel.n_assets(); ++i) {
        bool complete = true;
        for (Eigen::Index s = t - M + 1; s <= t && complete; ++s)
            complete = panel.available(s, i);
        if (complete) qualified.push_back(i);
    }
    if (qualified.empty())
        throw panel_error("select_universe: no asset has a complete window at " +
                          month_label(date));

    UniverseSelection sel;
    sel.date = date;
    sel.seed = seed;
    if (cap > 0 && static_cast<Eigen::Index>(qualified.size()) > cap) {
        std::vector<std::pair<std::uint64_t, Eigen::Index>> ranked;
        ranked.reserve(qualified.size());
        for (Eigen::Index i : qualified)
            ranked.emplace_back(
                detail::universe_hash(seed, date, panel.assets[static_cast<size_t>(i)]), i);
        std::sort(ranked.begin(), ranked.end());
        ranked.resize(static_cast<size_t>(cap));
        for (const auto& [h, i] : ranked) sel.active_assets.push_back(i);
        std::sort(sel.active_assets.begin(), sel.active_assets.end());
    } else {
        sel.active_assets = std::move(qualified);
    }
    return sel;
}

}  // namespace divbench
