#pragma once

#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <unordered_map>

#include "forge/digest.hpp"
#include "forge/document.hpp"
#include "forge/error.hpp"

namespace forge {

// Type-erased text <-> token id codec. Only token counts matter to the
// mixture and packing code, so any vocabulary works.
struct TokenizerAdapter {
    std::string name;
    std::function<TokenSeq(std::string_view)> encode;
    std::function<std::string(const TokenSeq &)> decode;
};

// First id past the byte range; the default end-of-text separator for packing.
inline constexpr Token kByteEot = 256;

// One token per byte. decode(encode(t)) == t exactly.
inline TokenizerAdapter byte_tokenizer() {
    return {"bytes",
            [](std::string_view text) {
                TokenSeq out;
                out.reserve(text.size());
                for (unsigned char c : text)
                    out.push_back(c);
                return out;
            },
            [](const TokenSeq &tokens) {
                std::string out;
                out.reserve(tokens.size());
                for (Token t : tokens) {
                    if (t > 0xff)
                        out += "<|" + std::to_string(t) + "|>";
                    else
                        out.push_back(static_cast<char>(t));
                }
                return out;
            }};
}

inline bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

// Splits on ASCII whitespace; each word maps to a 31-bit hash id. Decoding
// recovers words this instance has encoded and joins them with single spaces,
// so it preserves token count but not the original spacing.
inline TokenizerAdapter whitespace_tokenizer() {
    struct Vocab {
        std::mutex mu;
        std::unordered_map<Token, std::string> words;
    };
    auto vocab = std::make_shared<Vocab>();
    return {"whitespace",
            [vocab](std::string_view text) {
                TokenSeq out;
                std::size_t i = 0;
                while (i < text.size()) {
                    while (i < text.size() && is_space(text[i]))
                        ++i;
                    std::size_t j = i;
                    while (j < text.size() && !is_space(text[j]))
                        ++j;
                    if (j > i) {
                        auto word = text.substr(i, j - i);
                        Token id = fnv1a32(word) & 0x7fffffffu;
                        {
                            std::lock_guard lock(vocab->mu);
                            vocab->words.try_emplace(id, word);
                        }
                        out.push_back(id);
                    }
                    i = j;
                }
                return out;
            },
            [vocab](const TokenSeq &tokens) {
                std::string out;
                std::lock_guard lock(vocab->mu);
                for (std::size_t k = 0; k < tokens.size(); ++k) {
                    if (k)
                        out.push_back(' ');
                    auto it = vocab->words.find(tokens[k]);
                    out += it != vocab->words.end() ? it->second : "<unk:" + std::to_string(tokens[k]) + ">";
                }
                return out;
            }};
}

// For corpora that already carry token ids. Encoding text is an error.
inline TokenizerAdapter pretokenized() {
    return {"pretokenized",
            [](std::string_view) -> TokenSeq {
                throw ValidationError("pretokenized input: record has text but no tokens");
            },
            [](const TokenSeq &tokens) {
                std::string out;
                for (std::size_t k = 0; k < tokens.size(); ++k) {
                    if (k)
                        out.push_back(' ');
                    out += std::to_string(tokens[k]);
                }
                return out;
            }};
}

inline TokenizerAdapter make_tokenizer(std::string_view name) {
    if (name == "bytes")
        return byte_tokenizer();
    if (name == "whitespace")
        return whitespace_tokenizer();
    if (name == "pretokenized")
        return pretokenized();
    throw ValidationError("unknown tokenizer '" + std::string(name) + "' (expected bytes|whitespace|pretokenized)");
}

} // namespace forge
