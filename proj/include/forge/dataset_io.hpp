#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "forge/corpus_io.hpp"
#include "forge/mixture.hpp"
#include "forge/packer.hpp"
#include "forge/parallel.hpp"

namespace forge {

inline constexpr const char *kDatasetFile = "dataset.json";
inline constexpr const char *kDrawsFile = "draws.jsonl";

// Count-level view of a sharded corpus, in shard order.
inline std::vector<DocRef> corpus_refs(const ShardManifest &m) {
    std::vector<DocRef> refs;
    refs.reserve(m.total_documents);
    open_corpus(m).for_each([&](Document d) { refs.push_back(ref_of(d)); });
    return refs;
}

struct StoredDataset {
    SampledDataset data;
    fs::path source_manifest;
    std::string source_digest;
};

inline void save_dataset(const SampledDataset &ds, const fs::path &dir, const fs::path &source_manifest,
                         const std::string &source_digest) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir))
        throw IoError("cannot create output directory " + dir.string());

    std::string draws;
    for (const auto &d : ds.draws) {
        nlohmann::ordered_json j;
        j["id"] = d.id;
        j["source_id"] = d.source_id;
        j["domain"] = d.domain;
        j["offset"] = d.offset;
        j["length"] = d.length;
        j["repeat"] = d.repeat;
        j["long"] = d.is_long;
        draws += j.dump();
        draws.push_back('\n');
    }
    write_text_file(dir / kDrawsFile, draws);

    nlohmann::ordered_json j;
    j["spec"] = to_json(ds.spec);
    j["source_manifest"] = fs::absolute(source_manifest).lexically_normal().string();
    j["source_digest"] = source_digest;
    j["draws_file"] = kDrawsFile;
    j["draws_digest"] = Fnv1a64{}.update(draws).hex();
    j["n_draws"] = ds.draws.size();
    j["total_tokens"] = ds.total_tokens;
    j["max_doc_len"] = ds.max_doc_len;
    j["original_shares"] = ds.original_shares;
    j["target_shares"] = ds.target_shares;
    auto &w = j["weights"] = nlohmann::ordered_json::object();
    for (const auto &[d, cw] : ds.weights)
        w[d] = {{"w_short", cw.w_short}, {"w_long", cw.w_long}, {"unreachable", cw.unreachable}};
    auto &t = j["tallies"] = nlohmann::ordered_json::object();
    for (const auto &[d, tl] : ds.tallies)
        t[d] = {{"draws", tl.draws}, {"tokens", tl.tokens}, {"long_draws", tl.long_draws}, {"long_tokens", tl.long_tokens}};
    j["warnings"] = ds.warnings;
    write_text_file(dir / kDatasetFile, j.dump(2) + "\n");
}

inline StoredDataset load_dataset(const fs::path &dir) {
    StoredDataset out;
    auto file = dir / kDatasetFile;
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text_file(file));
    } catch (const nlohmann::json::parse_error &e) {
        throw FormatError(file.string(), 0, e.what());
    }
    auto &ds = out.data;
    try {
        ds.spec = mixture_spec_from_json(j.at("spec"));
        out.source_manifest = j.at("source_manifest").get<std::string>();
        out.source_digest = j.value("source_digest", "");
        ds.total_tokens = j.at("total_tokens").get<std::uint64_t>();
        ds.max_doc_len = j.value("max_doc_len", std::uint64_t{0});
        ds.original_shares = j.at("original_shares").get<std::map<std::string, double>>();
        ds.target_shares = j.at("target_shares").get<std::map<std::string, double>>();
        for (auto it = j["weights"].begin(); it != j["weights"].end(); ++it)
            ds.weights[it.key()] = {it->at("w_short").get<double>(), it->at("w_long").get<double>(),
                                    it->at("unreachable").get<bool>()};
        for (auto it = j["tallies"].begin(); it != j["tallies"].end(); ++it)
            ds.tallies[it.key()] = {it->at("draws").get<std::uint64_t>(), it->at("tokens").get<std::uint64_t>(),
                                    it->at("long_draws").get<std::uint64_t>(), it->at("long_tokens").get<std::uint64_t>()};
        ds.warnings = j.value("warnings", std::vector<std::string>{});
    } catch (const nlohmann::json::exception &e) {
        throw FormatError(file.string(), 0, std::string("bad dataset file: ") + e.what());
    }

    LineReader reader(dir / j.value("draws_file", std::string(kDrawsFile)));
    std::string line;
    while (reader.next(line)) {
        if (line.empty())
            continue;
        try {
            auto d = nlohmann::json::parse(line);
            ds.draws.push_back({d.at("id").get<std::string>(), d.at("source_id").get<std::string>(),
                                d.at("domain").get<std::string>(), d.at("offset").get<std::uint64_t>(),
                                d.at("length").get<std::uint64_t>(), d.at("repeat").get<std::uint32_t>(),
                                d.at("long").get<bool>()});
        } catch (const nlohmann::json::exception &e) {
            throw FormatError(reader.path().string(), reader.line_no(), e.what());
        }
    }
    return out;
}

struct PackOptions {
    std::uint64_t chunk_len = kDefaultChunkLen;
    std::optional<Token> separator = kByteEot;
    std::size_t chunks_per_shard = 64;
    unsigned threads = 1;
};

struct PackOutput {
    PackReport report;
    std::vector<std::string> shard_files;
};

// Resolves every draw to its tokens in the source corpus, packs them in draw
// order, and writes chunk shards plus pack.json into out_dir.
inline PackOutput pack_dataset(const StoredDataset &stored, const fs::path &out_dir, const PackOptions &opts) {
    auto manifest = load_manifest(stored.source_manifest);
    if (!stored.source_digest.empty() && manifest.content_digest != stored.source_digest)
        throw ValidationError("source corpus digest changed since the dataset was sampled");

    std::unordered_map<std::string, TokenSeq> tokens;
    {
        std::unordered_map<std::string, bool> wanted;
        for (const auto &d : stored.data.draws)
            wanted[d.source_id] = true;
        open_corpus(manifest).for_each([&](Document doc) {
            if (wanted.count(doc.id))
                tokens[doc.id] = std::move(*doc.tokens);
        });
    }

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec || !fs::is_directory(out_dir))
        throw IoError("cannot create output directory " + out_dir.string());

    PackOutput out;
    std::vector<std::vector<PackedChunk>> pending;
    std::vector<PackedChunk> group;
    auto flush = [&] {
        std::vector<std::string> names(pending.size());
        for (std::size_t i = 0; i < pending.size(); ++i) {
            char name[32];
            std::snprintf(name, sizeof name, "chunks-%05zu.jsonl", out.shard_files.size() + i);
            names[i] = name;
        }
        detail::parallel_for(pending.size(), opts.threads, [&](std::size_t i) {
            std::string bytes;
            for (const auto &c : pending[i]) {
                bytes += serialize_chunk(c);
                bytes.push_back('\n');
            }
            write_text_file(out_dir / names[i], bytes);
        });
        out.shard_files.insert(out.shard_files.end(), names.begin(), names.end());
        pending.clear();
    };

    ChunkPacker packer(opts.chunk_len, opts.separator, [&](PackedChunk &&c) {
        group.push_back(std::move(c));
        if (group.size() == opts.chunks_per_shard) {
            pending.push_back(std::move(group));
            group.clear();
            if (pending.size() >= std::max(1u, opts.threads))
                flush();
        }
    });
    for (const auto &d : stored.data.draws) {
        auto it = tokens.find(d.source_id);
        if (it == tokens.end())
            throw ValidationError("draw '" + d.id + "' refers to document '" + d.source_id + "' missing from the corpus");
        if (d.offset + d.length > it->second.size())
            throw ValidationError("draw '" + d.id + "' exceeds its source document");
        packer.add(d.id, d.repeat,
                   std::span<const Token>(it->second.data() + d.offset, static_cast<std::size_t>(d.length)), d.offset);
    }
    out.report = packer.finish();
    if (!group.empty())
        pending.push_back(std::move(group));
    flush();

    nlohmann::ordered_json rep;
    rep["n_chunks"] = out.report.n_chunks;
    rep["dropped_tokens"] = out.report.dropped_tokens;
    rep["total_tokens"] = out.report.total_tokens;
    rep["chunk_len"] = opts.chunk_len;
    rep["separator"] = opts.separator ? nlohmann::ordered_json(*opts.separator) : nlohmann::ordered_json(nullptr);
    rep["shards"] = out.shard_files;
    write_text_file(out_dir / "pack.json", rep.dump(2) + "\n");
    return out;
}

} // namespace forge
