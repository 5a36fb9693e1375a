#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "forge/report.hpp"

// Validation losses of a 4K-cut baseline and five upsampling variants on the
// seven SlimPajama domains, with the class each delta is expected to get.
namespace forge::testing {

struct ReferenceCell {
    std::string variant;
    std::string domain;
    LengthBand band;
    double delta;
    Significance expected;
};

inline const std::vector<std::string> &reference_domains() {
    static const std::vector<std::string> d{"C4", "CommonCrawl", "StackExchange", "ArXiv", "Wikipedia", "Book", "GitHub"};
    return d;
}

inline const std::vector<double> &reference_baseline(LengthBand b) {
    static const std::vector<double> short_ctx{2.038, 1.760, 1.519, 1.660, 1.424, 2.085, 0.907};
    static const std::vector<double> long_ctx{1.560, 1.650, 0.786, 1.075, 1.313, 1.852, 0.447};
    return b == LengthBand::short_ctx ? short_ctx : long_ctx;
}

inline std::vector<ReferenceCell> reference_cells() {
    constexpr auto I = Significance::improvement;
    constexpr auto R = Significance::regression;
    constexpr auto N = Significance::none;
    struct Row {
        const char *variant;
        LengthBand band;
        double d[7];
        Significance c[7];
    };
    const auto S = LengthBand::short_ctx, L = LengthBand::long_ctx;
    // |delta| == 0.010 exactly sits on the strict boundary and is not significant.
    const Row rows[] = {
        {"per_source", S, {+.002, +.008, -.001, -.008, -.040, -.065, -.008}, {N, N, N, N, I, I, N}},
        {"global", S, {+.008, +.010, +.015, -.020, -.020, -.140, +.015}, {N, N, R, I, I, I, R}},
        {"code_up", S, {+.010, +.016, +.010, +.006, -.026, +.030, -.023}, {N, R, N, N, I, R, I}},
        {"book_up", S, {+.010, +.016, +.021, +.000, -.010, -.175, +.029}, {N, R, R, N, N, I, R}},
        {"arxiv_up", S, {+.006, +.016, +.013, -.060, -.030, +.040, +.025}, {N, R, R, I, I, R, R}},
        {"per_source", L, {-.010, -.010, -.006, -.011, -.044, -.014, +.002}, {N, N, N, I, I, I, N}},
        {"global", L, {-.010, -.006, -.001, -.016, -.040, -.018, -.007}, {N, N, N, I, I, I, N}},
        {"code_up", L, {-.008, -.002, -.003, -.007, -.042, -.010, -.029}, {N, N, N, N, I, N, I}},
        {"book_up", L, {-.010, -.006, +.001, -.007, -.037, -.30, +.000}, {N, N, N, N, I, I, N}},
        {"arxiv_up", L, {-.008, -.002, +.002, -.036, -.039, -.010, -.004}, {N, N, N, I, I, N, N}},
    };
    std::vector<ReferenceCell> out;
    for (const auto &r : rows)
        for (int i = 0; i < 7; ++i)
            out.push_back({r.variant, reference_domains()[i], r.band, r.d[i], r.c[i]});
    return out;
}

inline std::vector<LossRecord> reference_baseline_records() {
    std::vector<LossRecord> out;
    for (auto band : {LengthBand::short_ctx, LengthBand::long_ctx})
        for (std::size_t i = 0; i < 7; ++i)
            out.push_back({"cut_4k", reference_domains()[i], band, reference_baseline(band)[i]});
    return out;
}

// Variant losses as printed: baseline + delta at three decimals.
inline std::vector<LossRecord> reference_variant_records() {
    std::vector<LossRecord> out;
    for (const auto &c : reference_cells()) {
        auto i = std::find(reference_domains().begin(), reference_domains().end(), c.domain) - reference_domains().begin();
        double loss = std::round((reference_baseline(c.band)[static_cast<std::size_t>(i)] + c.delta) * 1000) / 1000;
        out.push_back({c.variant, c.domain, c.band, loss});
    }
    return out;
}

} // namespace forge::testing
