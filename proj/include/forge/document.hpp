#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "forge/error.hpp"

namespace forge {

using Token = std::uint32_t;
using TokenSeq = std::vector<Token>;

// Source labels of the SlimPajama distribution. Domains are free-form strings;
// these are only the names the bundled fixtures and defaults use.
namespace domains {
inline constexpr const char *kCommonCrawl = "CommonCrawl";
inline constexpr const char *kC4 = "C4";
inline constexpr const char *kGithub = "Github";
inline constexpr const char *kWikipedia = "Wikipedia";
inline constexpr const char *kBook = "Book";
inline constexpr const char *kArxiv = "Arxiv";
inline constexpr const char *kStackExchange = "StackExchange";
} // namespace domains

// A domain-tagged record. At least one of text/tokens is set; when tokens is
// set, token_count equals its size.
struct Document {
    std::string id;
    std::string domain;
    std::optional<std::string> text;
    std::optional<TokenSeq> tokens;
    std::uint64_t token_count = 0;

    friend bool operator==(const Document &, const Document &) = default;
};

inline void validate(const Document &doc) {
    if (doc.domain.empty())
        throw ValidationError("document '" + doc.id + "': empty domain");
    if (!doc.text && !doc.tokens)
        throw ValidationError("document '" + doc.id + "': neither text nor tokens");
    if (doc.tokens && doc.tokens->size() != doc.token_count)
        throw ValidationError("document '" + doc.id + "': token_count does not match tokens");
}

// Count-only view of a document; what the sampling code works on.
struct DocRef {
    std::string id;
    std::string domain;
    std::uint64_t token_count = 0;
    // For cut chunks: the originating document and the token offset into it.
    std::string source_id;
    std::uint64_t offset = 0;

    friend bool operator==(const DocRef &, const DocRef &) = default;
};

inline DocRef ref_of(const Document &doc) { return {doc.id, doc.domain, doc.token_count, doc.id, 0}; }

} // namespace forge
