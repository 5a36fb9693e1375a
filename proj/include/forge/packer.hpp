#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "forge/document.hpp"
#include "forge/error.hpp"

namespace forge {

// "80K" read as 80 * 1024.
inline constexpr std::uint64_t kDefaultChunkLen = 81920;

// A run of chunk positions filled from one document (or one separator).
struct ProvenanceSpan {
    std::string doc_id; // empty for separators
    std::uint32_t repeat = 0;
    std::uint64_t begin = 0; // token offsets into the source document
    std::uint64_t end = 0;
    bool separator = false;

    std::uint64_t length() const noexcept { return end - begin; }
    friend bool operator==(const ProvenanceSpan &, const ProvenanceSpan &) = default;
};

struct PackedChunk {
    std::uint64_t chunk_index = 0;
    TokenSeq tokens;
    std::vector<ProvenanceSpan> provenance;
};

struct PackReport {
    std::uint64_t n_chunks = 0;
    std::uint64_t dropped_tokens = 0;
    std::uint64_t total_tokens = 0; // including separators
};

// Concatenates documents in order (optionally with one separator token between
// consecutive documents) and cuts the stream into chunks of exactly chunk_len,
// ignoring document boundaries. The trailing partial chunk is dropped.
class ChunkPacker {
public:
    using Sink = std::function<void(PackedChunk &&)>;

    ChunkPacker(std::uint64_t chunk_len, std::optional<Token> separator, Sink sink)
        : chunk_len_(chunk_len), separator_(separator), sink_(std::move(sink)) {
        if (chunk_len_ == 0)
            throw ValidationError("chunk_len must be positive");
        current_.tokens.reserve(chunk_len_);
    }

    // `first_offset` is the offset of tokens[0] inside the source document.
    void add(const std::string &doc_id, std::uint32_t repeat, std::span<const Token> tokens,
             std::uint64_t first_offset = 0) {
        if (separator_ && any_document_) {
            const Token sep = *separator_;
            push({}, 0, std::span<const Token>(&sep, 1), 0, true);
        }
        any_document_ = true;
        push(doc_id, repeat, tokens, first_offset, false);
    }

    PackReport finish() {
        report_.dropped_tokens = current_.tokens.size();
        current_ = {};
        return report_;
    }

    const PackReport &report() const noexcept { return report_; }

private:
    void push(const std::string &doc_id, std::uint32_t repeat, std::span<const Token> tokens, std::uint64_t offset,
              bool separator) {
        report_.total_tokens += tokens.size();
        std::size_t i = 0;
        while (i < tokens.size()) {
            std::size_t room = chunk_len_ - current_.tokens.size();
            std::size_t take = std::min(room, tokens.size() - i);
            current_.tokens.insert(current_.tokens.end(), tokens.begin() + i, tokens.begin() + i + take);
            current_.provenance.push_back({separator ? std::string() : doc_id, repeat, offset + i, offset + i + take,
                                           separator});
            i += take;
            if (current_.tokens.size() == chunk_len_) {
                current_.chunk_index = report_.n_chunks++;
                sink_(std::move(current_));
                current_ = {};
                current_.tokens.reserve(chunk_len_);
            }
        }
    }

    std::uint64_t chunk_len_;
    std::optional<Token> separator_;
    Sink sink_;
    PackedChunk current_;
    PackReport report_;
    bool any_document_ = false;
};

struct PackInput {
    std::string doc_id;
    std::uint32_t repeat = 0;
    TokenSeq tokens;
    std::uint64_t offset = 0;
};

inline std::pair<std::vector<PackedChunk>, PackReport> pack_chunks(const std::vector<PackInput> &docs,
                                                                   std::uint64_t chunk_len,
                                                                   std::optional<Token> separator) {
    std::vector<PackedChunk> chunks;
    ChunkPacker packer(chunk_len, separator, [&](PackedChunk &&c) { chunks.push_back(std::move(c)); });
    for (const auto &d : docs)
        packer.add(d.doc_id, d.repeat, d.tokens, d.offset);
    auto report = packer.finish();
    return {std::move(chunks), report};
}

inline std::string serialize_chunk(const PackedChunk &c) {
    nlohmann::ordered_json j;
    j["chunk_index"] = c.chunk_index;
    j["tokens"] = c.tokens;
    auto &prov = j["provenance"] = nlohmann::ordered_json::array();
    for (const auto &s : c.provenance) {
        if (s.separator)
            prov.push_back({{"separator", true}, {"length", s.length()}});
        else
            prov.push_back({{"id", s.doc_id}, {"repeat", s.repeat}, {"begin", s.begin}, {"end", s.end}});
    }
    return j.dump();
}

} // namespace forge
