#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "forge/corpus_io.hpp"
#include "forge/error.hpp"
#include "forge/needle.hpp"
#include "forge/svg.hpp"
#include "forge/table.hpp"
#include "forge/units.hpp"

namespace forge {

inline constexpr double kDefaultSignificance = 0.01;

enum class LengthBand { short_ctx, long_ctx };

// Band edges in tokens: short is (0, short_max], long is (short_max, long_max].
struct BandEdges {
    std::uint64_t short_max = 4096;
    std::uint64_t long_max = 131072;

    std::string label(LengthBand b) const {
        auto k = [](std::uint64_t v) { return v % 1024 == 0 ? std::to_string(v / 1024) + "K" : std::to_string(v); };
        return b == LengthBand::short_ctx ? "0-" + k(short_max) : k(short_max) + "-" + k(long_max);
    }

    LengthBand band_of(std::uint64_t length) const {
        return length <= short_max ? LengthBand::short_ctx : LengthBand::long_ctx;
    }
};

inline const char *to_string(LengthBand b) { return b == LengthBand::short_ctx ? "short" : "long"; }

inline LengthBand parse_band(const std::string &s, const BandEdges &edges = {}) {
    if (s == "short" || s == edges.label(LengthBand::short_ctx))
        return LengthBand::short_ctx;
    if (s == "long" || s == edges.label(LengthBand::long_ctx))
        return LengthBand::long_ctx;
    throw ValidationError("unknown length band '" + s + "'");
}

struct LossRecord {
    std::string run_id;
    std::string domain;
    LengthBand band = LengthBand::short_ctx;
    double loss = 0.0;
};

inline void validate(const LossRecord &r) {
    if (!std::isfinite(r.loss) || r.loss < 0.0)
        throw ValidationError("loss for " + r.run_id + "/" + r.domain + " must be finite and non-negative");
}

// run_id, domain, band, loss; an optional header row starting with "run_id".
inline std::vector<LossRecord> read_loss_records(const std::filesystem::path &path, const BandEdges &edges = {}) {
    std::vector<LossRecord> out;
    for (const auto &row : read_delimited(path)) {
        if (row.fields.size() >= 1 && row.fields[0] == "run_id")
            continue;
        if (row.fields.size() != 4)
            throw FormatError(path.string(), row.line, "expected 4 fields: run_id, domain, band, loss");
        LossRecord r;
        r.run_id = row.fields[0];
        r.domain = row.fields[1];
        try {
            r.band = parse_band(row.fields[2], edges);
        } catch (const ValidationError &e) {
            throw FormatError(path.string(), row.line, e.what());
        }
        r.loss = parse_real(row.fields[3], path.string(), row.line);
        validate(r);
        out.push_back(std::move(r));
    }
    return out;
}

enum class Significance { improvement, regression, none };

inline const char *to_string(Significance s) {
    switch (s) {
    case Significance::improvement: return "improvement";
    case Significance::regression: return "regression";
    case Significance::none: return "none";
    }
    return "?";
}

// Strict comparison: |delta| must exceed the threshold.
inline Significance classify_delta(double delta, double threshold = kDefaultSignificance) {
    if (!std::isfinite(delta))
        throw ValidationError("loss delta is not finite");
    if (!(threshold > 0.0))
        throw ValidationError("significance threshold must be positive");
    if (delta > threshold)
        return Significance::regression;
    if (delta < -threshold)
        return Significance::improvement;
    return Significance::none;
}

// Differences of losses printed to three decimals come out as e.g.
// 0.0100000000000002; rounding at 1e-9 keeps the strict boundary exact.
inline double loss_delta(double variant, double baseline) { return std::round((variant - baseline) * 1e9) / 1e9; }

struct LossDiffRow {
    std::string variant;
    std::string domain;
    LengthBand band = LengthBand::short_ctx;
    double baseline_loss = 0.0;
    double variant_loss = 0.0;
    double delta = 0.0;
    Significance cls = Significance::none;
};

struct LossDiffReport {
    std::string baseline;
    double threshold = kDefaultSignificance;
    std::vector<std::string> domains;  // baseline order
    std::vector<std::string> variants; // first-appearance order
    std::vector<LossDiffRow> rows;     // grouped by band, then variant, then domain
};

inline LossDiffReport loss_diff_table(const std::vector<LossRecord> &baseline, const std::vector<LossRecord> &variants,
                                      double threshold = kDefaultSignificance) {
    if (baseline.empty())
        throw ValidationError("baseline has no loss records");
    LossDiffReport rep;
    rep.baseline = baseline.front().run_id;
    rep.threshold = threshold;
    std::map<std::pair<std::string, LengthBand>, double> base;
    for (const auto &r : baseline) {
        validate(r);
        if (r.run_id != rep.baseline)
            throw ValidationError("baseline file mixes runs '" + rep.baseline + "' and '" + r.run_id + "'");
        if (!base.emplace(std::make_pair(r.domain, r.band), r.loss).second)
            throw ValidationError("duplicate baseline cell (" + r.domain + ", " + to_string(r.band) + ")");
        if (std::find(rep.domains.begin(), rep.domains.end(), r.domain) == rep.domains.end())
            rep.domains.push_back(r.domain);
    }
    std::map<std::tuple<std::string, std::string, LengthBand>, bool> seen;
    std::vector<LossDiffRow> rows;
    for (const auto &v : variants) {
        validate(v);
        auto it = base.find({v.domain, v.band});
        if (it == base.end())
            throw ValidationError("missing baseline cell (" + v.domain + ", " + to_string(v.band) + ")");
        if (seen[{v.run_id, v.domain, v.band}])
            throw ValidationError("duplicate variant cell (" + v.run_id + ", " + v.domain + ", " + to_string(v.band) + ")");
        seen[{v.run_id, v.domain, v.band}] = true;
        if (std::find(rep.variants.begin(), rep.variants.end(), v.run_id) == rep.variants.end())
            rep.variants.push_back(v.run_id);
        LossDiffRow row{v.run_id, v.domain, v.band, it->second, v.loss, loss_delta(v.loss, it->second)};
        row.cls = classify_delta(row.delta, threshold);
        rows.push_back(std::move(row));
    }
    auto rank = [](const std::vector<std::string> &order, const std::string &x) {
        return std::find(order.begin(), order.end(), x) - order.begin();
    };
    std::stable_sort(rows.begin(), rows.end(), [&](const LossDiffRow &a, const LossDiffRow &b) {
        return std::make_tuple(a.band, rank(rep.variants, a.variant), rank(rep.domains, a.domain)) <
               std::make_tuple(b.band, rank(rep.variants, b.variant), rank(rep.domains, b.domain));
    });
    rep.rows = std::move(rows);
    return rep;
}

namespace detail {
inline std::string fixed3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

inline std::string signed3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%+.3f", v);
    return buf;
}
} // namespace detail

// Flat table: variant, domain, band, baseline_loss, variant_loss, delta, class, shade.
// shade is |delta| / (10 * threshold) clipped to 1, for rendering only.
inline std::string loss_diff_tsv(const LossDiffReport &rep, const BandEdges &edges = {}) {
    std::string out = "variant\tdomain\tband\tbaseline_loss\tvariant_loss\tdelta\tclass\tshade\n";
    for (const auto &r : rep.rows) {
        double shade = std::min(1.0, std::abs(r.delta) / (10.0 * rep.threshold));
        char s[16];
        std::snprintf(s, sizeof s, "%.2f", shade);
        out += r.variant + "\t" + r.domain + "\t" + edges.label(r.band) + "\t" + detail::fixed3(r.baseline_loss) + "\t" +
               detail::fixed3(r.variant_loss) + "\t" + detail::signed3(r.delta) + "\t" + to_string(r.cls) + "\t" + s + "\n";
    }
    return out;
}

// Grid layout: one block per band, a baseline row of absolute losses, then one
// row of signed deltas per variant; '+'/'-' marks a significant cell.
inline std::string loss_diff_grid(const LossDiffReport &rep, const BandEdges &edges = {}) {
    std::map<std::tuple<LengthBand, std::string, std::string>, const LossDiffRow *> cell;
    std::map<std::pair<LengthBand, std::string>, double> base;
    for (const auto &r : rep.rows) {
        cell[{r.band, r.variant, r.domain}] = &r;
        base[{r.band, r.domain}] = r.baseline_loss;
    }
    std::string out;
    for (auto band : {LengthBand::short_ctx, LengthBand::long_ctx}) {
        bool any = std::any_of(rep.rows.begin(), rep.rows.end(), [&](const auto &r) { return r.band == band; });
        if (!any)
            continue;
        out += "# " + edges.label(band) + " context length\n";
        out += "run";
        for (const auto &d : rep.domains)
            out += "\t" + d;
        out += "\n" + rep.baseline;
        for (const auto &d : rep.domains) {
            auto it = base.find({band, d});
            out += "\t" + (it == base.end() ? std::string("NA") : detail::fixed3(it->second));
        }
        out += "\n";
        for (const auto &v : rep.variants) {
            out += "vs " + v;
            for (const auto &d : rep.domains) {
                auto it = cell.find({band, v, d});
                if (it == cell.end()) {
                    out += "\tNA";
                    continue;
                }
                const char *mark = it->second->cls == Significance::improvement  ? " (-)"
                                   : it->second->cls == Significance::regression ? " (+)"
                                                                                 : "";
                out += "\t" + detail::signed3(it->second->delta) + mark;
            }
            out += "\n";
        }
    }
    return out;
}

struct ScalingCurvePoint {
    std::uint64_t trained_tokens = 0;
    double validation_loss = 0.0;
    double needle_mean_score = 0.0;
};

inline std::vector<ScalingCurvePoint> scaling_curve(std::vector<ScalingCurvePoint> points) {
    if (points.empty())
        throw ValidationError("scaling curve needs at least one point");
    std::stable_sort(points.begin(), points.end(),
                     [](const auto &a, const auto &b) { return a.trained_tokens < b.trained_tokens; });
    for (std::size_t i = 1; i < points.size(); ++i)
        if (points[i].trained_tokens == points[i - 1].trained_tokens)
            throw ValidationError("duplicate trained_tokens " + std::to_string(points[i].trained_tokens));
    return points;
}

// trained_tokens (counts like 500M accepted), validation_loss, needle_mean_score.
inline std::vector<ScalingCurvePoint> read_curve_points(const std::filesystem::path &path) {
    std::vector<ScalingCurvePoint> out;
    for (const auto &row : read_delimited(path)) {
        if (!row.fields.empty() && row.fields[0] == "trained_tokens")
            continue;
        if (row.fields.size() != 3)
            throw FormatError(path.string(), row.line, "expected 3 fields: trained_tokens, validation_loss, needle_mean_score");
        ScalingCurvePoint p;
        try {
            p.trained_tokens = parse_count(row.fields[0]);
        } catch (const ValidationError &e) {
            throw FormatError(path.string(), row.line, e.what());
        }
        p.validation_loss = parse_real(row.fields[1], path.string(), row.line);
        p.needle_mean_score = parse_real(row.fields[2], path.string(), row.line);
        out.push_back(p);
    }
    return out;
}

inline std::string curve_tsv(const std::vector<ScalingCurvePoint> &curve) {
    std::string out = "trained_tokens\tvalidation_loss\tneedle_mean_score\n";
    char buf[96];
    for (const auto &p : curve) {
        std::snprintf(buf, sizeof buf, "%llu\t%.4f\t%.4f\n", static_cast<unsigned long long>(p.trained_tokens),
                      p.validation_loss, p.needle_mean_score);
        out += buf;
    }
    return out;
}

// Needle score (left axis, 0..1) and validation loss (right axis) against
// log-scaled trained tokens.
inline std::string curve_svg(const std::vector<ScalingCurvePoint> &curve) {
    const double w = 640, h = 360, left = 60, right = 60, top = 30, bottom = 50;
    SvgCanvas svg(w, h);
    double lo = std::log10(static_cast<double>(std::max<std::uint64_t>(curve.front().trained_tokens, 1)));
    double hi = std::log10(static_cast<double>(std::max<std::uint64_t>(curve.back().trained_tokens, 1)));
    if (hi <= lo)
        hi = lo + 1.0;
    double lmin = curve.front().validation_loss, lmax = lmin;
    for (const auto &p : curve) {
        lmin = std::min(lmin, p.validation_loss);
        lmax = std::max(lmax, p.validation_loss);
    }
    if (lmax <= lmin)
        lmax = lmin + 1.0;
    auto x_of = [&](std::uint64_t t) {
        double v = std::log10(static_cast<double>(std::max<std::uint64_t>(t, 1)));
        return left + (v - lo) / (hi - lo) * (w - left - right);
    };
    std::string score_pts, loss_pts;
    for (const auto &p : curve) {
        double x = x_of(p.trained_tokens);
        score_pts += SvgCanvas::num(x) + "," + SvgCanvas::num(top + (1.0 - p.needle_mean_score) * (h - top - bottom)) + " ";
        loss_pts += SvgCanvas::num(x) + "," +
                    SvgCanvas::num(top + (lmax - p.validation_loss) / (lmax - lmin) * (h - top - bottom)) + " ";
        svg.text(x, h - bottom + 18, std::to_string(p.trained_tokens), 9, "middle");
    }
    svg.line(left, h - bottom, w - right, h - bottom, "black");
    svg.polyline(score_pts, "#1f77b4");
    svg.polyline(loss_pts, "#d62728");
    svg.text(left, 18, "needle score (blue, 0-1)  validation loss (red)", 12);
    return svg.str();
}

struct HeatmapRender {
    std::string tsv;
    std::string svg;
    std::vector<std::vector<bool>> green;  // [depth][length]
    std::optional<std::size_t> marker_after; // index of the last length <= training context
};

// Cells at or above green_threshold are green; lower cells blend from red
// (score 0) toward amber. A dashed marker follows the last length within the
// training context, when one is given.
inline HeatmapRender render_heatmap(const HeatmapGrid &grid, double green_threshold,
                                    std::optional<std::uint64_t> train_context_len = std::nullopt) {
    if (grid.depths.empty() || grid.lengths.empty() || grid.scores.size() != grid.depths.size())
        throw ValidationError("heatmap grid is incomplete");
    for (const auto &row : grid.scores)
        if (row.size() != grid.lengths.size())
            throw ValidationError("heatmap grid is incomplete");
    if (!(green_threshold >= 0.0 && green_threshold <= 1.0))
        throw ValidationError("green threshold must lie in [0,1]");

    HeatmapRender out;
    if (train_context_len) {
        for (std::size_t i = 0; i < grid.lengths.size(); ++i)
            if (grid.lengths[i] <= *train_context_len)
                out.marker_after = i;
    }
    out.green.assign(grid.depths.size(), std::vector<bool>(grid.lengths.size(), false));

    char buf[64];
    out.tsv = "depth";
    auto marker_col = [&](std::size_t i) { return out.marker_after && *out.marker_after == i; };
    for (std::size_t i = 0; i < grid.lengths.size(); ++i) {
        out.tsv += "\t" + std::to_string(grid.lengths[i]);
        if (marker_col(i))
            out.tsv += "\t|train_ctx=" + std::to_string(*train_context_len);
    }
    out.tsv += "\n";
    for (std::size_t d = 0; d < grid.depths.size(); ++d) {
        std::snprintf(buf, sizeof buf, "%.4f", grid.depths[d]);
        out.tsv += buf;
        for (std::size_t i = 0; i < grid.lengths.size(); ++i) {
            out.green[d][i] = grid.scores[d][i] >= green_threshold;
            std::snprintf(buf, sizeof buf, "\t%.4f", grid.scores[d][i]);
            out.tsv += buf;
            if (marker_col(i))
                out.tsv += "\t|";
        }
        out.tsv += "\n";
    }
    std::snprintf(buf, sizeof buf, "# mean\t%.4f\n", grid.mean);
    out.tsv += buf;

    const double cell = 28, left = 70, top = 40, bottom = 60;
    const double w = left + cell * static_cast<double>(grid.lengths.size()) + 20;
    const double h = top + cell * static_cast<double>(grid.depths.size()) + bottom;
    SvgCanvas svg(w, h);
    for (std::size_t d = 0; d < grid.depths.size(); ++d) {
        for (std::size_t i = 0; i < grid.lengths.size(); ++i) {
            double s = grid.scores[d][i];
            std::string fill;
            if (out.green[d][i]) {
                fill = SvgCanvas::rgb(46, 160, 67);
            } else {
                double t = green_threshold > 0 ? std::clamp(s / green_threshold, 0.0, 1.0) : 0.0;
                fill = SvgCanvas::rgb(214, static_cast<int>(40 + t * 150), 40);
            }
            svg.rect(left + cell * static_cast<double>(i), top + cell * static_cast<double>(d), cell, cell, fill,
                     "stroke=\"white\" stroke-width=\"0.5\"");
        }
        std::snprintf(buf, sizeof buf, "%.0f%%", grid.depths[d] * 100.0);
        svg.text(left - 6, top + cell * (static_cast<double>(d) + 0.65), buf, 10, "end");
    }
    for (std::size_t i = 0; i < grid.lengths.size(); ++i) {
        std::uint64_t v = grid.lengths[i];
        std::string label = v >= 1024 ? std::to_string((v + 512) / 1024) + "K" : std::to_string(v);
        svg.text(left + cell * (static_cast<double>(i) + 0.5), top + cell * static_cast<double>(grid.depths.size()) + 14,
                 label, 9, "middle");
    }
    if (out.marker_after) {
        double x = left + cell * static_cast<double>(*out.marker_after + 1);
        svg.line(x, top - 6, x, top + cell * static_cast<double>(grid.depths.size()) + 4, "white", 2.5, true);
    }
    std::snprintf(buf, sizeof buf, "mean %.3f  (green >= %.2f)", grid.mean, green_threshold);
    svg.text(left, 24, buf, 12);
    out.svg = svg.str();
    return out;
}

} // namespace forge
