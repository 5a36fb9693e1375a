#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "forge/document.hpp"
#include "forge/error.hpp"
#include "forge/parallel.hpp"
#include "forge/tokenizer.hpp"

namespace forge {

struct NeedleSpec {
    std::string needle_text =
        "The best thing to do in San Francisco is eat a sandwich and sit in Dolores Park on a sunny day";
    std::string question_text =
        "\n\nWhat is the best thing to do in San Francisco? Answer based only on the document above.\nAnswer:";
    std::string expected_answer = "eat a sandwich and sit in Dolores Park on a sunny day";
    std::vector<std::uint64_t> lengths;
    std::vector<double> depths;
    // Tokens of the context budget left free for the answer.
    std::uint64_t answer_reserve = 0;

    // 16 log-spaced lengths, 1K .. 128K.
    static std::vector<std::uint64_t> default_lengths() {
        std::vector<std::uint64_t> out;
        for (int i = 0; i < 16; ++i)
            out.push_back(static_cast<std::uint64_t>(std::llround(1024.0 * std::pow(128.0, i / 15.0))));
        return out;
    }

    // 10 evenly spaced depths, 0 .. 1 inclusive.
    static std::vector<double> default_depths() {
        std::vector<double> out;
        for (int i = 0; i < 10; ++i)
            out.push_back(i / 9.0);
        return out;
    }

    NeedleSpec() : lengths(default_lengths()), depths(default_depths()) {}
};

inline void validate(const NeedleSpec &s) {
    if (s.lengths.empty() || s.depths.empty())
        throw ValidationError("needle spec needs at least one length and one depth");
    for (std::size_t i = 0; i < s.lengths.size(); ++i)
        if (s.lengths[i] == 0 || (i > 0 && s.lengths[i] <= s.lengths[i - 1]))
            throw ValidationError("needle lengths must be positive and strictly ascending");
    for (std::size_t i = 0; i < s.depths.size(); ++i)
        if (!(s.depths[i] >= 0.0 && s.depths[i] <= 1.0) || (i > 0 && s.depths[i] <= s.depths[i - 1]))
            throw ValidationError("needle depths must lie in [0,1] and be strictly ascending");
    if (s.needle_text.empty())
        throw ValidationError("needle text is empty");
}

inline NeedleSpec needle_spec_from_json(const nlohmann::json &j) {
    NeedleSpec s;
    try {
        s.needle_text = j.value("needle_text", s.needle_text);
        s.question_text = j.value("question_text", s.question_text);
        s.expected_answer = j.value("expected_answer", s.expected_answer);
        if (j.contains("lengths"))
            s.lengths = j["lengths"].get<std::vector<std::uint64_t>>();
        if (j.contains("depths"))
            s.depths = j["depths"].get<std::vector<double>>();
        s.answer_reserve = j.value("answer_reserve", std::uint64_t{0});
    } catch (const nlohmann::json::exception &e) {
        throw ValidationError(std::string("needle spec: ") + e.what());
    }
    validate(s);
    return s;
}

inline nlohmann::ordered_json to_json(const NeedleSpec &s) {
    nlohmann::ordered_json j;
    j["needle_text"] = s.needle_text;
    j["question_text"] = s.question_text;
    j["expected_answer"] = s.expected_answer;
    j["lengths"] = s.lengths;
    j["depths"] = s.depths;
    j["answer_reserve"] = s.answer_reserve;
    return j;
}

// Filler token stream; documents are concatenated in order and the stream
// repeats from the start when exhausted.
class FillerStream {
public:
    template <typename Range>
    FillerStream(const Range &filler, const TokenizerAdapter &tokenizer) {
        for (const auto &doc : filler) {
            if (doc.text)
                append(tokenizer.encode(*doc.text));
            else if (doc.tokens)
                append(*doc.tokens);
        }
        if (tokens_.empty())
            throw ValidationError("filler corpus is empty");
    }

    TokenSeq take(std::uint64_t n) const {
        TokenSeq out;
        out.reserve(n);
        while (out.size() < n) {
            auto k = std::min<std::uint64_t>(n - out.size(), tokens_.size());
            out.insert(out.end(), tokens_.begin(), tokens_.begin() + static_cast<std::ptrdiff_t>(k));
        }
        return out;
    }

    std::size_t cycle_length() const noexcept { return tokens_.size(); }

private:
    void append(const TokenSeq &t) { tokens_.insert(tokens_.end(), t.begin(), t.end()); }
    TokenSeq tokens_;
};

// Haystack of exactly target_len - reserve tokens.
template <typename Range>
TokenSeq build_haystack(const Range &filler, std::uint64_t target_len, std::uint64_t reserve,
                        const TokenizerAdapter &tokenizer) {
    if (target_len <= reserve)
        throw ValidationError("target length " + std::to_string(target_len) + " leaves no room for the haystack (reserve " +
                              std::to_string(reserve) + ")");
    return FillerStream(filler, tokenizer).take(target_len - reserve);
}

inline std::uint64_t insertion_index(double depth_fraction, std::size_t haystack_len) {
    return static_cast<std::uint64_t>(std::llround(depth_fraction * static_cast<double>(haystack_len)));
}

struct Insertion {
    TokenSeq tokens;
    std::uint64_t index = 0;
};

// The needle goes in whole at round(depth * len); haystack tokens after that
// point shift right.
inline Insertion insert_needle(const TokenSeq &haystack, const TokenSeq &needle, double depth_fraction) {
    if (!(depth_fraction >= 0.0 && depth_fraction <= 1.0))
        throw ValidationError("depth fraction must lie in [0,1]");
    Insertion out;
    out.index = insertion_index(depth_fraction, haystack.size());
    out.tokens.reserve(haystack.size() + needle.size());
    auto split = haystack.begin() + static_cast<std::ptrdiff_t>(out.index);
    out.tokens.insert(out.tokens.end(), haystack.begin(), split);
    out.tokens.insert(out.tokens.end(), needle.begin(), needle.end());
    out.tokens.insert(out.tokens.end(), split, haystack.end());
    return out;
}

struct NeedleCase {
    std::string case_id;
    std::uint64_t context_len = 0;
    double depth_fraction = 0.0;
    std::uint64_t haystack_len = 0;
    std::uint64_t insertion_index = 0;
    TokenSeq prompt_tokens;
    std::string expected_answer;
};

inline std::string needle_case_id(std::uint64_t context_len, double depth) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "len%06llu_depth%05ld", static_cast<unsigned long long>(context_len),
                  std::lround(depth * 10000.0));
    return buf;
}

// One case per (length, depth): haystack with the needle inserted, followed
// by the question. Prompt length is context_len - answer_reserve.
template <typename Range>
std::vector<NeedleCase> generate_grid(const NeedleSpec &spec, const Range &filler, const TokenizerAdapter &tokenizer,
                                      unsigned threads = 1) {
    validate(spec);
    const TokenSeq needle = tokenizer.encode(spec.needle_text);
    const TokenSeq question = tokenizer.encode(spec.question_text);
    const std::uint64_t reserve = needle.size() + question.size() + spec.answer_reserve;
    for (auto len : spec.lengths)
        if (len <= reserve)
            throw ValidationError("grid cell " + needle_case_id(len, spec.depths.front()) + ": context length " +
                                  std::to_string(len) + " too small for needle + question (" + std::to_string(reserve) +
                                  " tokens)");

    FillerStream stream(filler, tokenizer);
    std::vector<NeedleCase> cases(spec.lengths.size() * spec.depths.size());
    detail::parallel_for(spec.lengths.size(), threads, [&](std::size_t li) {
        const auto len = spec.lengths[li];
        const TokenSeq haystack = stream.take(len - reserve);
        for (std::size_t di = 0; di < spec.depths.size(); ++di) {
            auto &c = cases[li * spec.depths.size() + di];
            c.context_len = len;
            c.depth_fraction = spec.depths[di];
            c.case_id = needle_case_id(len, c.depth_fraction);
            c.haystack_len = haystack.size();
            auto ins = insert_needle(haystack, needle, c.depth_fraction);
            c.insertion_index = ins.index;
            c.prompt_tokens = std::move(ins.tokens);
            c.prompt_tokens.insert(c.prompt_tokens.end(), question.begin(), question.end());
            c.expected_answer = spec.expected_answer;
        }
    });
    return cases;
}

inline std::string serialize_case(const NeedleCase &c, const TokenizerAdapter &tokenizer) {
    nlohmann::ordered_json j;
    j["case_id"] = c.case_id;
    j["context_len"] = c.context_len;
    j["depth"] = c.depth_fraction;
    j["haystack_len"] = c.haystack_len;
    j["insertion_index"] = c.insertion_index;
    j["prompt_text"] = tokenizer.decode(c.prompt_tokens);
    j["prompt_tokens"] = c.prompt_tokens;
    j["expected_answer"] = c.expected_answer;
    return j.dump();
}

inline NeedleCase parse_case(const nlohmann::json &j) {
    NeedleCase c;
    c.case_id = j.at("case_id").get<std::string>();
    c.context_len = j.at("context_len").get<std::uint64_t>();
    c.depth_fraction = j.at("depth").get<double>();
    c.haystack_len = j.value("haystack_len", std::uint64_t{0});
    c.insertion_index = j.value("insertion_index", std::uint64_t{0});
    if (j.contains("prompt_tokens"))
        c.prompt_tokens = j["prompt_tokens"].get<TokenSeq>();
    c.expected_answer = j.at("expected_answer").get<std::string>();
    return c;
}

// Lower-cased words with surrounding ASCII punctuation removed.
inline std::vector<std::string> normalize_words(std::string_view text) {
    std::vector<std::string> out;
    std::string word;
    auto flush = [&] {
        std::size_t b = 0, e = word.size();
        while (b < e && std::ispunct(static_cast<unsigned char>(word[b])))
            ++b;
        while (e > b && std::ispunct(static_cast<unsigned char>(word[e - 1])))
            --e;
        if (e > b)
            out.push_back(word.substr(b, e - b));
        word.clear();
    };
    for (char ch : text) {
        if (is_space(ch))
            flush();
        else
            word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
    flush();
    return out;
}

// Recall of the expected answer's normalized words in the output, counted as
// a multiset. 1.0 whenever the output contains the answer.
inline double score_response(std::string_view expected_answer, std::string_view model_output) {
    auto expected = normalize_words(expected_answer);
    auto produced = normalize_words(model_output);
    if (expected.empty())
        return 1.0;
    if (produced.empty())
        return 0.0;
    std::map<std::string, long> available;
    for (auto &w : produced)
        ++available[w];
    std::size_t hit = 0;
    for (auto &w : expected) {
        auto it = available.find(w);
        if (it != available.end() && it->second > 0) {
            --it->second;
            ++hit;
        }
    }
    return static_cast<double>(hit) / static_cast<double>(expected.size());
}

inline double score_response(const NeedleCase &c, std::string_view model_output) {
    return score_response(c.expected_answer, model_output);
}

struct ScoredCell {
    std::uint64_t context_len = 0;
    double depth = 0.0;
    double score = 0.0;
};

struct HeatmapGrid {
    std::vector<std::uint64_t> lengths;
    std::vector<double> depths;
    std::vector<std::vector<double>> scores; // [depth][length]
    double mean = 0.0;
};

namespace detail {
// Depths come back from text files; compare at 1e-9.
inline bool same_depth(double a, double b) { return std::abs(a - b) <= 1e-9; }
} // namespace detail

// Assembles the grid. Axes default to the distinct lengths/depths present.
inline HeatmapGrid aggregate_heatmap(const std::vector<ScoredCell> &scored,
                                     std::optional<std::vector<std::uint64_t>> lengths = std::nullopt,
                                     std::optional<std::vector<double>> depths = std::nullopt) {
    HeatmapGrid g;
    if (lengths) {
        g.lengths = *lengths;
    } else {
        std::set<std::uint64_t> ls;
        for (const auto &c : scored)
            ls.insert(c.context_len);
        g.lengths.assign(ls.begin(), ls.end());
    }
    if (depths) {
        g.depths = *depths;
    } else {
        for (const auto &c : scored)
            if (std::none_of(g.depths.begin(), g.depths.end(), [&](double d) { return detail::same_depth(d, c.depth); }))
                g.depths.push_back(c.depth);
        std::sort(g.depths.begin(), g.depths.end());
    }
    if (g.lengths.empty() || g.depths.empty())
        throw ValidationError("heatmap has no cells");

    std::vector<std::vector<int>> seen(g.depths.size(), std::vector<int>(g.lengths.size(), 0));
    g.scores.assign(g.depths.size(), std::vector<double>(g.lengths.size(), 0.0));
    std::vector<std::string> problems;
    for (const auto &c : scored) {
        if (!(c.score >= 0.0 && c.score <= 1.0))
            throw ValidationError("score for " + needle_case_id(c.context_len, c.depth) + " outside [0,1]");
        auto li = std::find(g.lengths.begin(), g.lengths.end(), c.context_len) - g.lengths.begin();
        auto di = std::find_if(g.depths.begin(), g.depths.end(), [&](double d) { return detail::same_depth(d, c.depth); }) -
                  g.depths.begin();
        if (li == static_cast<std::ptrdiff_t>(g.lengths.size()) || di == static_cast<std::ptrdiff_t>(g.depths.size())) {
            problems.push_back("unexpected " + needle_case_id(c.context_len, c.depth));
            continue;
        }
        if (seen[di][li]++)
            problems.push_back("duplicate " + needle_case_id(c.context_len, c.depth));
        g.scores[di][li] = c.score;
    }
    for (std::size_t di = 0; di < g.depths.size(); ++di)
        for (std::size_t li = 0; li < g.lengths.size(); ++li)
            if (!seen[di][li])
                problems.push_back("missing " + needle_case_id(g.lengths[li], g.depths[di]));
    if (!problems.empty()) {
        std::string msg = "heatmap grid invalid:";
        for (const auto &p : problems)
            msg += " " + p;
        throw ValidationError(msg);
    }
    double sum = 0.0;
    for (const auto &row : g.scores)
        for (double v : row)
            sum += v;
    g.mean = sum / static_cast<double>(g.depths.size() * g.lengths.size());
    return g;
}

} // namespace forge
