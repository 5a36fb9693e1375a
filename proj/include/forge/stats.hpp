#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "forge/document.hpp"
#include "forge/error.hpp"

namespace forge {

// "Longer than 4K" means token_count > 4096.
inline constexpr std::uint64_t kDefaultLongThreshold = 4096;

struct DomainStats {
    std::string domain;
    std::uint64_t doc_count = 0;
    std::uint64_t token_count = 0;
    std::uint64_t short_tokens = 0; // documents with length <= threshold
    std::uint64_t long_tokens = 0;  // documents with length > threshold
    std::uint64_t long_doc_count = 0;

    void add(std::uint64_t length, std::uint64_t threshold) {
        ++doc_count;
        token_count += length;
        if (length > threshold) {
            long_tokens += length;
            ++long_doc_count;
        } else {
            short_tokens += length;
        }
    }

    void merge(const DomainStats &o) {
        doc_count += o.doc_count;
        token_count += o.token_count;
        short_tokens += o.short_tokens;
        long_tokens += o.long_tokens;
        long_doc_count += o.long_doc_count;
    }

    friend bool operator==(const DomainStats &, const DomainStats &) = default;
};

// Commutative-monoid fold of per-domain counts at a fixed long threshold.
class StatsAccumulator {
public:
    explicit StatsAccumulator(std::uint64_t long_threshold = kDefaultLongThreshold) : threshold_(long_threshold) {}

    template <typename Doc>
    void add(const Doc &doc) {
        add(doc.domain, doc.token_count);
    }

    void add(const std::string &domain, std::uint64_t length) {
        auto &s = by_domain_[domain];
        s.domain = domain;
        s.add(length, threshold_);
    }

    void merge(const StatsAccumulator &o) {
        if (o.threshold_ != threshold_)
            throw ValidationError("cannot merge stats computed at different long thresholds");
        for (const auto &[d, s] : o.by_domain_) {
            auto &mine = by_domain_[d];
            mine.domain = d;
            mine.merge(s);
        }
    }

    const std::map<std::string, DomainStats> &domains() const noexcept { return by_domain_; }
    std::uint64_t threshold() const noexcept { return threshold_; }

    DomainStats total() const {
        DomainStats t;
        t.domain = "ALL";
        for (const auto &[d, s] : by_domain_)
            t.merge(s);
        return t;
    }

private:
    std::uint64_t threshold_;
    std::map<std::string, DomainStats> by_domain_;
};

template <typename Range>
StatsAccumulator collect_stats(const Range &corpus, std::uint64_t long_threshold = kDefaultLongThreshold) {
    StatsAccumulator acc(long_threshold);
    for (const auto &doc : corpus)
        acc.add(doc);
    return acc;
}

struct DomainMixture {
    std::map<std::string, double> token_share;
    std::map<std::string, double> doc_share;
};

inline DomainMixture domain_mixture(const StatsAccumulator &stats) {
    auto total = stats.total();
    if (total.doc_count == 0 || total.token_count == 0)
        throw ValidationError("no documents");
    DomainMixture m;
    for (const auto &[d, s] : stats.domains()) {
        m.token_share[d] = static_cast<double>(s.token_count) / static_cast<double>(total.token_count);
        m.doc_share[d] = static_cast<double>(s.doc_count) / static_cast<double>(total.doc_count);
    }
    return m;
}

template <typename Range>
DomainMixture domain_mixture(const Range &corpus) {
    return domain_mixture(collect_stats(corpus));
}

// Bins are right-closed: bin i holds lengths in (edges[i], edges[i+1]], bin 0
// also takes anything <= edges[0], and a final overflow bin holds lengths
// above the last edge.
class LengthHistogram {
public:
    struct Counts {
        std::vector<std::uint64_t> docs;
        std::vector<std::uint64_t> tokens;
        friend bool operator==(const Counts &, const Counts &) = default;
    };

    explicit LengthHistogram(std::vector<std::uint64_t> edges) : edges_(std::move(edges)) {
        if (edges_.empty())
            throw ValidationError("histogram needs at least one bin edge");
        for (std::size_t i = 1; i < edges_.size(); ++i)
            if (edges_[i] <= edges_[i - 1])
                throw ValidationError("histogram bin edges must be strictly ascending");
    }

    // Powers of two 256 .. 262144, plus overflow.
    static std::vector<std::uint64_t> default_edges() {
        std::vector<std::uint64_t> e;
        for (std::uint64_t v = 256; v <= 262144; v *= 2)
            e.push_back(v);
        return e;
    }

    // edges.size() - 1 interior bins plus the overflow bin.
    std::size_t bin_count() const noexcept { return edges_.size(); }

    std::size_t bin_of(std::uint64_t length) const {
        if (length <= edges_.front())
            return 0;
        // first edge >= length closes the bin
        auto it = std::lower_bound(edges_.begin(), edges_.end(), length);
        if (it == edges_.end())
            return edges_.size() - 1;
        return static_cast<std::size_t>(it - edges_.begin()) - 1;
    }

    std::uint64_t bin_low(std::size_t i) const { return i == 0 ? 0 : edges_[i]; }
    std::optional<std::uint64_t> bin_high(std::size_t i) const {
        if (i + 1 >= edges_.size())
            return std::nullopt;
        return edges_[i + 1];
    }

    template <typename Doc>
    void add(const Doc &doc) {
        add(doc.domain, doc.token_count);
    }

    void add(const std::string &domain, std::uint64_t length) {
        auto &c = counts_[domain];
        if (c.docs.empty()) {
            c.docs.assign(bin_count(), 0);
            c.tokens.assign(bin_count(), 0);
        }
        auto b = bin_of(length);
        ++c.docs[b];
        c.tokens[b] += length;
    }

    void merge(const LengthHistogram &o) {
        if (o.edges_ != edges_)
            throw ValidationError("cannot merge histograms with different edges");
        for (const auto &[d, c] : o.counts_) {
            auto &mine = counts_[d];
            if (mine.docs.empty()) {
                mine = c;
                continue;
            }
            for (std::size_t i = 0; i < bin_count(); ++i) {
                mine.docs[i] += c.docs[i];
                mine.tokens[i] += c.tokens[i];
            }
        }
    }

    const std::vector<std::uint64_t> &edges() const noexcept { return edges_; }
    const std::map<std::string, Counts> &counts() const noexcept { return counts_; }

    Counts total() const {
        Counts t{std::vector<std::uint64_t>(bin_count(), 0), std::vector<std::uint64_t>(bin_count(), 0)};
        for (const auto &[d, c] : counts_)
            for (std::size_t i = 0; i < bin_count(); ++i) {
                t.docs[i] += c.docs[i];
                t.tokens[i] += c.tokens[i];
            }
        return t;
    }

private:
    std::vector<std::uint64_t> edges_;
    std::map<std::string, Counts> counts_;
};

template <typename Range>
LengthHistogram length_histogram(const Range &corpus, std::vector<std::uint64_t> edges) {
    LengthHistogram h(std::move(edges));
    for (const auto &doc : corpus)
        h.add(doc);
    return h;
}

struct LongFraction {
    std::optional<double> doc_fraction;
    std::optional<double> token_fraction;
};

inline LongFraction long_fraction_of(const DomainStats &s) {
    LongFraction f;
    if (s.doc_count > 0)
        f.doc_fraction = static_cast<double>(s.long_doc_count) / static_cast<double>(s.doc_count);
    if (s.token_count > 0)
        f.token_fraction = static_cast<double>(s.long_tokens) / static_cast<double>(s.token_count);
    return f;
}

struct LongFractionReport {
    std::map<std::string, LongFraction> per_domain;
    LongFraction overall;
};

inline LongFractionReport long_fraction(const StatsAccumulator &stats) {
    LongFractionReport r;
    for (const auto &[d, s] : stats.domains())
        r.per_domain[d] = long_fraction_of(s);
    r.overall = long_fraction_of(stats.total());
    return r;
}

template <typename Range>
LongFractionReport long_fraction(const Range &corpus, std::uint64_t long_threshold) {
    return long_fraction(collect_stats(corpus, long_threshold));
}

namespace detail {
inline std::string fmt_fraction(const std::optional<double> &v) {
    if (!v)
        return "NA";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", *v);
    return buf;
}
} // namespace detail

// domain, doc_count, token_count, token_share, doc_share, long_doc_fraction, long_token_fraction
inline std::string stats_table(const StatsAccumulator &stats) {
    auto mix = domain_mixture(stats);
    std::string out = "domain\tdoc_count\ttoken_count\ttoken_share\tdoc_share\tlong_doc_fraction\tlong_token_fraction\n";
    auto row = [&](const DomainStats &s, double ts, double ds) {
        auto f = long_fraction_of(s);
        out += s.domain + "\t" + std::to_string(s.doc_count) + "\t" + std::to_string(s.token_count) + "\t" +
               detail::fmt_fraction(ts) + "\t" + detail::fmt_fraction(ds) + "\t" + detail::fmt_fraction(f.doc_fraction) +
               "\t" + detail::fmt_fraction(f.token_fraction) + "\n";
    };
    for (const auto &[d, s] : stats.domains())
        row(s, mix.token_share.at(d), mix.doc_share.at(d));
    row(stats.total(), 1.0, 1.0);
    return out;
}

// domain, bin_low, bin_high, doc_count, token_mass; bin_high "inf" for overflow.
inline std::string histogram_table(const LengthHistogram &h) {
    std::string out = "domain\tbin_low\tbin_high\tdoc_count\ttoken_mass\n";
    for (const auto &[d, c] : h.counts())
        for (std::size_t i = 0; i < h.bin_count(); ++i) {
            auto hi = h.bin_high(i);
            out += d + "\t" + std::to_string(h.bin_low(i)) + "\t" + (hi ? std::to_string(*hi) : "inf") + "\t" +
                   std::to_string(c.docs[i]) + "\t" + std::to_string(c.tokens[i]) + "\n";
        }
    return out;
}

} // namespace forge
