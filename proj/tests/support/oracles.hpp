#pragma once

#include <cctype>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "forge/forge.hpp"

// Reference computations written independently of the library code paths.
namespace forge::testing {

// Long-class multiplier that makes w*L / (w*L + S) equal f.
inline double oracle_w_long(double S, double L, double f) { return f * S / ((1.0 - f) * L); }

inline double oracle_plug_back(double w, double S, double L) { return w * L / (w * L + S); }

// Per-document weights of pooled long upsampling: 1 for short documents,
// the pooled multiplier for long ones.
inline std::vector<double> oracle_pooled_weights(const std::vector<DocRef> &docs, double f, std::uint64_t threshold) {
    double S = 0, L = 0;
    for (const auto &d : docs)
        (d.token_count > threshold ? L : S) += static_cast<double>(d.token_count);
    double w = oracle_w_long(S, L, f);
    std::vector<double> out;
    for (const auto &d : docs)
        out.push_back(d.token_count > threshold ? w : 1.0);
    return out;
}

// Exhaustive first-draw distribution: p_i = w_i / sum(w).
inline std::vector<double> oracle_first_draw(const std::vector<double> &weights) {
    double total = 0;
    for (double w : weights)
        total += w;
    std::vector<double> p;
    for (double w : weights)
        p.push_back(w / total);
    return p;
}

// Expected token share of each domain in the drawn mass under the given
// per-document weights: sum_d w_i * len_i / sum_all w_i * len_i.
inline std::map<std::string, double> oracle_expected_shares(const std::vector<DocRef> &docs,
                                                            const std::vector<double> &weights) {
    std::map<std::string, double> mass;
    double total = 0;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        double m = weights[i] * static_cast<double>(docs[i].token_count);
        mass[docs[i].domain] += m;
        total += m;
    }
    for (auto &[d, m] : mass)
        m /= total;
    return mass;
}

// Plain token shares of a corpus.
inline std::map<std::string, double> oracle_shares(const std::vector<DocRef> &docs) {
    return oracle_expected_shares(docs, std::vector<double>(docs.size(), 1.0));
}

// Concatenate the whole stream (with separators) and slice it.
struct PackOracle {
    std::uint64_t n_chunks = 0;
    std::uint64_t dropped = 0;
    std::vector<TokenSeq> chunks;
};

inline PackOracle oracle_pack(const std::vector<TokenSeq> &docs, std::uint64_t chunk_len,
                              std::optional<Token> separator) {
    TokenSeq stream;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        if (i > 0 && separator)
            stream.push_back(*separator);
        stream.insert(stream.end(), docs[i].begin(), docs[i].end());
    }
    PackOracle o;
    o.n_chunks = stream.size() / chunk_len;
    o.dropped = stream.size() % chunk_len;
    for (std::uint64_t c = 0; c < o.n_chunks; ++c)
        o.chunks.emplace_back(stream.begin() + static_cast<std::ptrdiff_t>(c * chunk_len),
                              stream.begin() + static_cast<std::ptrdiff_t>((c + 1) * chunk_len));
    return o;
}

// Recall by removing matched words one at a time from a copy of the output.
inline double oracle_recall(const std::vector<std::string> &expected, std::vector<std::string> produced) {
    if (expected.empty())
        return 1.0;
    std::size_t hit = 0;
    for (const auto &w : expected) {
        for (auto it = produced.begin(); it != produced.end(); ++it)
            if (*it == w) {
                produced.erase(it);
                ++hit;
                break;
            }
    }
    return static_cast<double>(hit) / static_cast<double>(expected.size());
}

// Split on spaces, lowercase, trim punctuation at both ends.
inline std::vector<std::string> oracle_words(const std::string &text) {
    std::vector<std::string> out;
    std::string cur;
    auto push = [&] {
        while (!cur.empty() && std::ispunct(static_cast<unsigned char>(cur.back())))
            cur.pop_back();
        std::size_t b = 0;
        while (b < cur.size() && std::ispunct(static_cast<unsigned char>(cur[b])))
            ++b;
        if (b < cur.size())
            out.push_back(cur.substr(b));
        cur.clear();
    };
    for (unsigned char c : text) {
        if (std::isspace(c))
            push();
        else
            cur += static_cast<char>(std::tolower(c));
    }
    push();
    return out;
}

} // namespace forge::testing
