#pragma once

#include <zlib.h>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "forge/digest.hpp"
#include "forge/document.hpp"
#include "forge/error.hpp"
#include "forge/tokenizer.hpp"

namespace forge {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

// Line reader over plain or gzip files (chosen by the .gz extension).
class LineReader {
public:
    explicit LineReader(const fs::path &path) : path_(path) {
        if (path.extension() == ".gz") {
            gz_ = gzopen(path.string().c_str(), "rb");
            if (!gz_)
                throw IoError("cannot open " + path.string());
        } else {
            in_.open(path, std::ios::binary);
            if (!in_)
                throw IoError("cannot open " + path.string());
        }
    }
    ~LineReader() {
        if (gz_)
            gzclose(gz_);
    }
    LineReader(const LineReader &) = delete;
    LineReader &operator=(const LineReader &) = delete;

    bool next(std::string &line) {
        line.clear();
        if (!gz_) {
            if (!std::getline(in_, line))
                return false;
        } else {
            char buf[1 << 16];
            bool any = false;
            while (gzgets(gz_, buf, sizeof buf)) {
                any = true;
                line += buf;
                if (!line.empty() && line.back() == '\n') {
                    line.pop_back();
                    break;
                }
            }
            if (!any)
                return false;
        }
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        ++line_no_;
        return true;
    }

    std::size_t line_no() const noexcept { return line_no_; }
    const fs::path &path() const noexcept { return path_; }

private:
    fs::path path_;
    std::ifstream in_;
    gzFile gz_ = nullptr;
    std::size_t line_no_ = 0;
};

struct ReadCounters {
    std::uint64_t documents = 0;
    std::uint64_t skipped_empty = 0;
    std::uint64_t unknown_fields = 0;
};

namespace detail {

// SlimPajama ships {"text", "meta": {"redpajama_set_name": "RedPajamaC4"}};
// accept that shape as well as the {id, domain} one.
inline std::string domain_from_meta(const json &meta) {
    if (!meta.is_object())
        return {};
    auto it = meta.find("redpajama_set_name");
    if (it == meta.end() || !it->is_string())
        return {};
    std::string name = it->get<std::string>();
    constexpr std::string_view prefix = "RedPajama";
    if (name.rfind(prefix, 0) == 0)
        name = name.substr(prefix.size());
    return name;
}

} // namespace detail

// Parses one record. Returns nullopt for documents that are skipped (empty
// text). Throws FormatError for malformed lines.
inline std::optional<Document> parse_record(const std::string &line, const std::string &file, std::size_t line_no,
                                            const TokenizerAdapter &tokenizer, ReadCounters &counters) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::parse_error &e) {
        throw FormatError(file, line_no, std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object())
        throw FormatError(file, line_no, "record is not an object");

    Document doc;
    try {
        for (auto it = j.begin(); it != j.end(); ++it) {
            const auto &key = it.key();
            if (key == "id") {
                doc.id = it->is_string() ? it->get<std::string>() : it->dump();
            } else if (key == "domain") {
                doc.domain = it->get<std::string>();
            } else if (key == "text") {
                if (!it->is_null())
                    doc.text = it->get<std::string>();
            } else if (key == "tokens") {
                if (!it->is_null())
                    doc.tokens = it->get<TokenSeq>();
            } else if (key == "meta") {
                if (doc.domain.empty())
                    doc.domain = detail::domain_from_meta(*it);
            } else if (key == "token_count") {
                // derived; re-checked against tokens below
            } else {
                ++counters.unknown_fields;
            }
        }
    } catch (const json::exception &e) {
        throw FormatError(file, line_no, std::string("bad field type: ") + e.what());
    }

    if (doc.domain.empty())
        throw FormatError(file, line_no, "missing domain");
    if (doc.id.empty())
        doc.id = fs::path(file).filename().string() + ":" + std::to_string(line_no);
    if (!doc.text && !doc.tokens)
        throw FormatError(file, line_no, "record has neither text nor tokens");

    if (!doc.tokens) {
        if (doc.text->empty()) {
            ++counters.skipped_empty;
            return std::nullopt;
        }
        doc.tokens = tokenizer.encode(*doc.text);
    }
    if (doc.tokens->empty()) {
        ++counters.skipped_empty;
        return std::nullopt;
    }
    doc.token_count = doc.tokens->size();
    return doc;
}

// Streams documents from a list of files in file order, then line order.
class CorpusReader {
public:
    CorpusReader(std::vector<fs::path> paths, TokenizerAdapter tokenizer)
        : paths_(std::move(paths)), tokenizer_(std::move(tokenizer)) {}

    std::optional<Document> next() {
        std::string line;
        while (true) {
            if (!reader_) {
                if (file_index_ >= paths_.size())
                    return std::nullopt;
                reader_ = std::make_unique<LineReader>(paths_[file_index_++]);
            }
            if (!reader_->next(line)) {
                reader_.reset();
                continue;
            }
            if (line.find_first_not_of(" \t") == std::string::npos)
                continue;
            auto doc = parse_record(line, reader_->path().string(), reader_->line_no(), tokenizer_, counters_);
            if (doc) {
                ++counters_.documents;
                return doc;
            }
        }
    }

    template <typename Fn>
    void for_each(Fn &&fn) {
        while (auto doc = next())
            fn(std::move(*doc));
    }

    std::vector<Document> read_all() {
        std::vector<Document> out;
        for_each([&](Document d) { out.push_back(std::move(d)); });
        return out;
    }

    const ReadCounters &counters() const noexcept { return counters_; }

private:
    std::vector<fs::path> paths_;
    TokenizerAdapter tokenizer_;
    std::size_t file_index_ = 0;
    std::unique_ptr<LineReader> reader_;
    ReadCounters counters_;
};

inline std::vector<Document> read_corpus(const std::vector<fs::path> &paths, const TokenizerAdapter &tokenizer) {
    return CorpusReader(paths, tokenizer).read_all();
}

inline std::string serialize_record(const Document &doc) {
    ordered_json j;
    j["id"] = doc.id;
    j["domain"] = doc.domain;
    j["token_count"] = doc.token_count;
    if (doc.text)
        j["text"] = *doc.text;
    if (doc.tokens)
        j["tokens"] = *doc.tokens;
    return j.dump();
}

struct ShardInfo {
    std::string path; // relative to the manifest directory
    std::uint64_t documents = 0;
    std::uint64_t tokens = 0;
    std::string digest;

    friend bool operator==(const ShardInfo &, const ShardInfo &) = default;
};

struct DomainTally {
    std::uint64_t documents = 0;
    std::uint64_t tokens = 0;
    friend bool operator==(const DomainTally &, const DomainTally &) = default;
};

struct ShardManifest {
    fs::path dir;
    std::vector<ShardInfo> shards;
    std::map<std::string, DomainTally> domains;
    std::uint64_t total_documents = 0;
    std::uint64_t total_tokens = 0;
    std::string content_digest;
    std::string tokenizer;

    std::vector<fs::path> shard_paths() const {
        std::vector<fs::path> out;
        for (const auto &s : shards)
            out.push_back(dir / s.path);
        return out;
    }
};

inline constexpr const char *kManifestFile = "manifest.json";

inline ordered_json to_json(const ShardManifest &m) {
    ordered_json j;
    j["tokenizer"] = m.tokenizer;
    j["total_documents"] = m.total_documents;
    j["total_tokens"] = m.total_tokens;
    j["content_digest"] = m.content_digest;
    j["shards"] = ordered_json::array();
    for (const auto &s : m.shards)
        j["shards"].push_back({{"path", s.path}, {"documents", s.documents}, {"tokens", s.tokens}, {"digest", s.digest}});
    j["domains"] = ordered_json::object();
    for (const auto &[name, t] : m.domains)
        j["domains"][name] = {{"documents", t.documents}, {"tokens", t.tokens}};
    return j;
}

inline void write_text_file(const fs::path &path, const std::string &content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot write " + path.string());
    out << content;
    if (!out)
        throw IoError("write failed: " + path.string());
}

inline std::string read_text_file(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void save_manifest(const ShardManifest &m) { write_text_file(m.dir / kManifestFile, to_json(m).dump(2) + "\n"); }

// Accepts the manifest file itself or the directory containing it.
inline ShardManifest load_manifest(const fs::path &path) {
    fs::path file = fs::is_directory(path) ? path / kManifestFile : path;
    json j;
    try {
        j = json::parse(read_text_file(file));
    } catch (const json::parse_error &e) {
        throw FormatError(file.string(), 0, e.what());
    }
    ShardManifest m;
    m.dir = file.parent_path();
    try {
        m.tokenizer = j.value("tokenizer", "");
        m.total_documents = j.at("total_documents").get<std::uint64_t>();
        m.total_tokens = j.at("total_tokens").get<std::uint64_t>();
        m.content_digest = j.at("content_digest").get<std::string>();
        for (const auto &s : j.at("shards"))
            m.shards.push_back({s.at("path").get<std::string>(), s.at("documents").get<std::uint64_t>(),
                                s.at("tokens").get<std::uint64_t>(), s.value("digest", "")});
        if (j.contains("domains"))
            for (auto it = j["domains"].begin(); it != j["domains"].end(); ++it)
                m.domains[it.key()] = {it->at("documents").get<std::uint64_t>(), it->at("tokens").get<std::uint64_t>()};
    } catch (const json::exception &e) {
        throw FormatError(file.string(), 0, std::string("bad manifest: ") + e.what());
    }
    std::uint64_t sum = 0;
    for (const auto &s : m.shards)
        sum += s.tokens;
    if (sum != m.total_tokens)
        throw ValidationError(file.string() + ": shard token counts do not sum to total_tokens");
    return m;
}

inline CorpusReader open_corpus(const ShardManifest &m) { return CorpusReader(m.shard_paths(), pretokenized()); }

struct WriteOptions {
    std::uint64_t max_tokens_per_shard = 0;
    unsigned threads = 1;
    std::string tokenizer_name;
};

// Greedy shard assignment: a shard closes when the next document would push
// it past max_tokens_per_shard. Assignment is sequential; serialization of
// closed shards runs on up to `threads` workers, so bytes do not depend on
// the worker count.
class ShardWriter {
public:
    ShardWriter(fs::path out_dir, WriteOptions opts) : opts_(std::move(opts)) {
        if (opts_.max_tokens_per_shard == 0)
            throw ValidationError("max_tokens_per_shard must be positive");
        if (opts_.threads == 0)
            opts_.threads = 1;
        std::error_code ec;
        fs::create_directories(out_dir, ec);
        if (ec || !fs::is_directory(out_dir))
            throw IoError("cannot create output directory " + out_dir.string());
        manifest_.dir = std::move(out_dir);
        manifest_.tokenizer = opts_.tokenizer_name;
    }

    void add(Document doc) {
        if (doc.token_count > opts_.max_tokens_per_shard)
            throw ValidationError("document '" + doc.id + "' has " + std::to_string(doc.token_count) +
                                  " tokens, more than max_tokens_per_shard=" +
                                  std::to_string(opts_.max_tokens_per_shard));
        if (!current_.empty() && current_tokens_ + doc.token_count > opts_.max_tokens_per_shard)
            close_current();
        auto &tally = manifest_.domains[doc.domain];
        ++tally.documents;
        tally.tokens += doc.token_count;
        current_tokens_ += doc.token_count;
        current_.push_back(std::move(doc));
    }

    ShardManifest finish() {
        if (!current_.empty())
            close_current();
        flush();
        Fnv1a64 h;
        for (const auto &s : manifest_.shards) {
            manifest_.total_documents += s.documents;
            manifest_.total_tokens += s.tokens;
            h.update(s.digest);
        }
        manifest_.content_digest = h.hex();
        save_manifest(manifest_);
        return manifest_;
    }

private:
    struct Pending {
        std::size_t index;
        std::vector<Document> docs;
    };

    void close_current() {
        ShardInfo info;
        char name[32];
        std::snprintf(name, sizeof name, "shard-%05zu.jsonl", manifest_.shards.size());
        info.path = name;
        info.documents = current_.size();
        info.tokens = current_tokens_;
        pending_.push_back({manifest_.shards.size(), std::move(current_)});
        manifest_.shards.push_back(std::move(info));
        current_.clear();
        current_tokens_ = 0;
        if (pending_.size() >= opts_.threads)
            flush();
    }

    void flush() {
        auto write_one = [this](Pending &p) {
            std::string bytes;
            for (const auto &d : p.docs) {
                bytes += serialize_record(d);
                bytes.push_back('\n');
            }
            auto &info = manifest_.shards[p.index];
            info.digest = Fnv1a64{}.update(bytes).hex();
            write_text_file(manifest_.dir / info.path, bytes);
        };
        if (pending_.size() <= 1 || opts_.threads <= 1) {
            for (auto &p : pending_)
                write_one(p);
        } else {
            std::vector<std::exception_ptr> errors(pending_.size());
            std::vector<std::thread> workers;
            for (std::size_t i = 0; i < pending_.size(); ++i)
                workers.emplace_back([&, i] {
                    try {
                        write_one(pending_[i]);
                    } catch (...) {
                        errors[i] = std::current_exception();
                    }
                });
            for (auto &w : workers)
                w.join();
            for (auto &e : errors)
                if (e)
                    std::rethrow_exception(e);
        }
        pending_.clear();
    }

    WriteOptions opts_;
    ShardManifest manifest_;
    std::vector<Document> current_;
    std::uint64_t current_tokens_ = 0;
    std::vector<Pending> pending_;
};

template <typename Range>
ShardManifest write_shards(Range &&docs, const fs::path &out_dir, WriteOptions opts) {
    ShardWriter writer(out_dir, std::move(opts));
    for (auto &&d : docs)
        writer.add(Document(d));
    return writer.finish();
}

} // namespace forge
