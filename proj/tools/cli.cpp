#include "cli.hpp"

#include <glob.h>

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "forge/forge.hpp"

namespace forge::cli {
namespace {

using nlohmann::ordered_json;

std::shared_ptr<spdlog::logger> logger() {
    static auto log = [] {
        auto l = spdlog::stderr_logger_mt("forge");
        l->set_pattern("[%Y-%m-%d %H:%M:%S.%e] [%l] %v");
        return l;
    }();
    return log;
}

struct Globals {
    std::optional<std::uint64_t> seed;
    unsigned threads = 1;
    std::string log_level = "info";
};

std::vector<fs::path> expand_globs(const std::vector<std::string> &patterns) {
    std::vector<fs::path> out;
    for (const auto &p : patterns) {
        glob_t g{};
        int rc = ::glob(p.c_str(), 0, nullptr, &g);
        if (rc == GLOB_NOMATCH || (rc == 0 && g.gl_pathc == 0)) {
            globfree(&g);
            throw IoError("no input matches '" + p + "'");
        }
        if (rc != 0) {
            globfree(&g);
            throw IoError("cannot expand '" + p + "'");
        }
        for (std::size_t i = 0; i < g.gl_pathc; ++i)
            out.emplace_back(g.gl_pathv[i]);
        globfree(&g);
    }
    return out;
}

std::string file_digest(const fs::path &path) {
    if (fs::is_directory(path)) {
        if (fs::exists(path / kManifestFile))
            return file_digest(path / kManifestFile);
        if (fs::exists(path / kDatasetFile))
            return file_digest(path / kDatasetFile);
        return "";
    }
    return Fnv1a64{}.update(read_text_file(path)).hex();
}

void ensure_dir(const fs::path &dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir))
        throw IoError("cannot create output directory " + dir.string());
}

// Records the resolved configuration and input digests next to the outputs.
void write_run_manifest(const fs::path &dir, const std::vector<std::string> &args, const std::string &command,
                        const ordered_json &config, const std::vector<fs::path> &inputs) {
    ordered_json j;
    j["command"] = command;
    j["argv"] = args;
    j["config"] = config;
    auto &in = j["inputs"] = ordered_json::array();
    for (const auto &p : inputs)
        in.push_back({{"path", fs::absolute(p).lexically_normal().string()}, {"digest", file_digest(p)}});
    write_text_file(dir / run_manifest_name(command), j.dump(2) + "\n");
}

std::string fmt_double(double v, const char *f = "%.6f") {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::vector<Document> load_documents(const fs::path &path, const TokenizerAdapter &tokenizer) {
    if (fs::is_directory(path) || path.filename() == kManifestFile)
        return CorpusReader(load_manifest(path).shard_paths(), tokenizer).read_all();
    return read_corpus({path}, tokenizer);
}

std::optional<Token> parse_separator(const std::string &s, Token eot) {
    if (s == "none")
        return std::nullopt;
    if (s == "eot")
        return eot;
    try {
        std::size_t pos = 0;
        auto v = std::stoul(s, &pos);
        if (pos == s.size())
            return static_cast<Token>(v);
    } catch (const std::exception &) {
    }
    throw ValidationError("separator must be 'eot', 'none' or a token id");
}

} // namespace

std::string run_manifest_name(const std::string &command) {
    std::string name = "run-" + command + ".json";
    std::replace(name.begin(), name.end(), ' ', '-');
    return name;
}

int run(const std::vector<std::string> &args, std::ostream &out) {
    auto log = logger();
    CLI::App app{"Long-context data recipes: stats, mixtures, packing, needle grids and loss reports", "forge"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--seed", g.seed, "Override the seed of the mixture spec");
    app.add_option("--threads", g.threads, "Worker threads (outputs do not depend on this)")->capture_default_str();
    app.add_option("--log-level", g.log_level, "trace|debug|info|warn|error|off")->capture_default_str();

    std::function<void()> action;
    std::string command;

    // ingest
    std::vector<std::string> ingest_in;
    std::string ingest_tok = "bytes", ingest_out, ingest_shard = "50M";
    auto *ingest = app.add_subcommand("ingest", "Tokenize line-delimited records into sharded output with a manifest");
    ingest->add_option("--in", ingest_in, "Input files or glob patterns (.jsonl, .jsonl.gz)")->required();
    ingest->add_option("--tokenizer", ingest_tok, "bytes|whitespace|pretokenized")->capture_default_str();
    ingest->add_option("--out", ingest_out, "Output directory")->required();
    ingest->add_option("--shard-tokens", ingest_shard, "Max tokens per shard (e.g. 50M)")->capture_default_str();
    ingest->callback([&] {
        command = "ingest";
        action = [&] {
            auto paths = expand_globs(ingest_in);
            auto tokenizer = make_tokenizer(ingest_tok);
            CorpusReader reader(paths, tokenizer);
            ShardWriter writer(ingest_out, {parse_count(ingest_shard), g.threads, ingest_tok});
            reader.for_each([&](Document d) { writer.add(std::move(d)); });
            auto m = writer.finish();
            const auto &c = reader.counters();
            if (c.skipped_empty)
                log->warn("skipped {} documents with empty text", c.skipped_empty);
            if (c.unknown_fields)
                log->warn("ignored {} unknown record fields", c.unknown_fields);
            log->info("ingested {} documents, {} tokens into {} shards", m.total_documents, m.total_tokens,
                      m.shards.size());
            out << "documents\t" << m.total_documents << "\ntokens\t" << m.total_tokens << "\nshards\t" << m.shards.size()
                << "\nskipped_empty\t" << c.skipped_empty << "\n";
            ordered_json cfg{{"in", ingest_in}, {"tokenizer", ingest_tok}, {"shard_tokens", parse_count(ingest_shard)}};
            write_run_manifest(ingest_out, args, command, cfg, paths);
        };
    });

    // stats
    std::string stats_in, stats_out, stats_edges;
    std::uint64_t stats_threshold = kDefaultLongThreshold;
    auto *stats = app.add_subcommand("stats", "Per-domain shares, long fractions and length histograms");
    stats->add_option("--in", stats_in, "Corpus manifest (file or directory)")->required();
    stats->add_option("--threshold", stats_threshold, "Long-document threshold in tokens")->capture_default_str();
    stats->add_option("--edges", stats_edges, "Comma-separated histogram edges (default: powers of two 256..262144)");
    stats->add_option("--out", stats_out, "Output directory (default: <manifest dir>/stats)");
    stats->callback([&] {
        command = "stats";
        action = [&] {
            auto m = load_manifest(stats_in);
            std::vector<std::uint64_t> edges = LengthHistogram::default_edges();
            if (!stats_edges.empty()) {
                edges.clear();
                std::stringstream ss(stats_edges);
                for (std::string e; std::getline(ss, e, ',');)
                    edges.push_back(parse_count(e, SuffixBase::binary));
            }
            StatsAccumulator acc(stats_threshold);
            LengthHistogram hist(edges);
            open_corpus(m).for_each([&](const Document &d) {
                acc.add(d);
                hist.add(d);
            });
            auto table = stats_table(acc); // throws "no documents" on an empty corpus
            fs::path dir = stats_out.empty() ? m.dir / "stats" : fs::path(stats_out);
            ensure_dir(dir);
            write_text_file(dir / "stats.tsv", table);
            write_text_file(dir / "histogram.tsv", histogram_table(hist));
            write_text_file(dir / "histogram.svg", [&] {
                auto total = hist.total();
                std::uint64_t peak = 1;
                for (auto v : total.tokens)
                    peak = std::max(peak, v);
                const double bw = 32, h = 240, top = 30, base = 200;
                SvgCanvas svg(60 + bw * static_cast<double>(hist.bin_count()), h + 20);
                for (std::size_t i = 0; i < hist.bin_count(); ++i) {
                    double bh = (base - top) * static_cast<double>(total.tokens[i]) / static_cast<double>(peak);
                    double x = 40 + bw * static_cast<double>(i);
                    svg.rect(x, base - bh, bw - 4, bh, "#4c72b0");
                    auto hi = hist.bin_high(i);
                    svg.text(x + bw / 2, base + 14, hi ? "<=" + std::to_string(*hi / 1024) + "K" : ">", 8, "middle");
                }
                svg.text(40, 18, "token mass per length bin (all domains)", 12);
                return svg.str();
            }());
            auto total = acc.total();
            auto lf = long_fraction_of(total);
            out << "documents\t" << total.doc_count << "\ntokens\t" << total.token_count << "\nlong_doc_fraction\t"
                << fmt_double(*lf.doc_fraction) << "\nlong_token_fraction\t" << fmt_double(*lf.token_fraction) << "\n";
            ordered_json cfg{{"in", stats_in}, {"threshold", stats_threshold}, {"edges", edges}};
            write_run_manifest(dir, args, command, cfg, {stats_in});
        };
    });

    // mix
    std::string mix_spec, mix_in, mix_out;
    AuditTolerances mix_tol;
    auto *mix = app.add_subcommand("mix", "Sample a dataset with one of the five mixture strategies");
    mix->add_option("--spec", mix_spec, "Mixture spec (JSON)")->required();
    mix->add_option("--in", mix_in, "Corpus manifest")->required();
    mix->add_option("--out", mix_out, "Output directory")->required();
    mix->add_option("--share-tol", mix_tol.share_tol, "Audit tolerance on domain shares")->capture_default_str();
    mix->add_option("--long-tol", mix_tol.long_tol, "Audit tolerance on long fractions")->capture_default_str();
    mix->callback([&] {
        command = "mix";
        action = [&] {
            nlohmann::json sj;
            try {
                sj = nlohmann::json::parse(read_text_file(mix_spec));
            } catch (const nlohmann::json::parse_error &e) {
                throw FormatError(mix_spec, 0, e.what());
            }
            auto spec = mixture_spec_from_json(sj);
            if (g.seed)
                spec.seed = *g.seed;
            auto m = load_manifest(mix_in);
            auto refs = corpus_refs(m);
            auto ds = build_mixture(refs, spec, {g.threads});
            for (const auto &w : ds.warnings)
                log->warn("{}", w);
            save_dataset(ds, mix_out, fs::is_directory(mix_in) ? fs::path(mix_in) / kManifestFile : fs::path(mix_in),
                         m.content_digest);
            auto audit = verify_mixture(ds, mix_tol);
            write_text_file(fs::path(mix_out) / "audit.tsv", audit_table(audit));
            log->info("sampled {} draws, {} tokens ({})", ds.draws.size(), ds.total_tokens, to_string(spec.strategy));
            out << "draws\t" << ds.draws.size() << "\ntokens\t" << ds.total_tokens << "\naudit\t"
                << (audit.pass ? "pass" : "FAIL") << "\n";
            ordered_json cfg{{"spec", to_json(spec)}, {"in", mix_in}, {"share_tol", mix_tol.share_tol},
                             {"long_tol", mix_tol.long_tol}};
            write_run_manifest(mix_out, args, command, cfg, {mix_spec, mix_in});
        };
    });

    // audit
    std::string audit_dataset;
    AuditTolerances audit_tol;
    bool audit_failed = false;
    auto *audit = app.add_subcommand("audit", "Check a sampled dataset against its targets");
    audit->add_option("--dataset", audit_dataset, "Dataset directory written by mix")->required();
    audit->add_option("--share-tol", audit_tol.share_tol)->capture_default_str();
    audit->add_option("--long-tol", audit_tol.long_tol)->capture_default_str();
    audit->callback([&] {
        command = "audit";
        action = [&] {
            auto stored = load_dataset(audit_dataset);
            auto a = verify_mixture(stored.data, audit_tol);
            auto table = audit_table(a);
            write_text_file(fs::path(audit_dataset) / "audit.tsv", table);
            out << table;
            audit_failed = !a.pass;
            write_run_manifest(audit_dataset, args, command,
                               {{"share_tol", audit_tol.share_tol}, {"long_tol", audit_tol.long_tol}}, {audit_dataset});
            if (audit_failed)
                log->error("audit failed");
        };
    });

    // pack
    std::string pack_dataset_dir, pack_out, pack_chunk = "80K", pack_sep = "eot";
    Token pack_eot = kByteEot;
    std::size_t pack_per_shard = 64;
    auto *pack = app.add_subcommand("pack", "Pack a sampled dataset into fixed-length chunks");
    pack->add_option("--dataset", pack_dataset_dir, "Dataset directory written by mix")->required();
    pack->add_option("--chunk-len", pack_chunk, "Chunk length; K/M suffixes are binary (80K = 81920)")
        ->capture_default_str();
    pack->add_option("--separator", pack_sep, "eot|none|<token id>")->capture_default_str();
    pack->add_option("--eot-id", pack_eot, "Token id used for --separator eot")->capture_default_str();
    pack->add_option("--chunks-per-shard", pack_per_shard)->capture_default_str();
    pack->add_option("--out", pack_out, "Output directory (default: <dataset>/packed)");
    pack->callback([&] {
        command = "pack";
        action = [&] {
            auto stored = load_dataset(pack_dataset_dir);
            PackOptions opts;
            opts.chunk_len = parse_count(pack_chunk, SuffixBase::binary);
            opts.separator = parse_separator(pack_sep, pack_eot);
            opts.chunks_per_shard = std::max<std::size_t>(pack_per_shard, 1);
            opts.threads = g.threads;
            fs::path dir = pack_out.empty() ? fs::path(pack_dataset_dir) / "packed" : fs::path(pack_out);
            auto res = pack_dataset(stored, dir, opts);
            log->info("packed {} chunks of {} tokens, dropped {}", res.report.n_chunks, opts.chunk_len,
                      res.report.dropped_tokens);
            out << "n_chunks\t" << res.report.n_chunks << "\ndropped_tokens\t" << res.report.dropped_tokens << "\n";
            ordered_json cfg{{"dataset", pack_dataset_dir},
                             {"chunk_len", opts.chunk_len},
                             {"separator", opts.separator ? ordered_json(*opts.separator) : ordered_json(nullptr)},
                             {"chunks_per_shard", opts.chunks_per_shard}};
            write_run_manifest(dir, args, command, cfg, {pack_dataset_dir});
        };
    });

    // plan
    std::string plan_tokens, plan_batch = "4M", plan_profile = "7b-80k-8xA100", plan_profiles, plan_out;
    bool plan_decimal = false;
    auto *plan = app.add_subcommand("plan", "Optimization steps and wall-clock estimate for a token budget");
    plan->add_option("--tokens", plan_tokens, "Token budget (e.g. 5e9, 5B)")->required();
    plan->add_option("--batch", plan_batch, "Batch size in tokens; 4M = 2^22 unless --decimal-batch")
        ->capture_default_str();
    plan->add_flag("--decimal-batch", plan_decimal, "Read K/M suffixes of --batch as powers of 1000");
    plan->add_option("--profile", plan_profile, "Hardware profile name")->capture_default_str();
    plan->add_option("--profiles", plan_profiles, "Extra profiles (JSON list)");
    plan->add_option("--out", plan_out, "Also write plan.json here");
    plan->callback([&] {
        command = "plan";
        action = [&] {
            ProfileTable table;
            if (!plan_profiles.empty())
                table.add_json(nlohmann::json::parse(read_text_file(plan_profiles)));
            auto p = training_plan(parse_count(plan_tokens),
                                   parse_count(plan_batch, plan_decimal ? SuffixBase::decimal : SuffixBase::binary),
                                   table.at(plan_profile));
            out << "token_budget\t" << p.token_budget << "\nbatch_tokens\t" << p.batch_tokens << "\nsteps\t" << p.steps
                << "\nprofile\t" << p.profile.name << "\nestimated_days\t" << fmt_double(p.estimated_days, "%.1f")
                << "\n";
            if (!plan_out.empty()) {
                ensure_dir(plan_out);
                ordered_json j{{"token_budget", p.token_budget}, {"batch_tokens", p.batch_tokens},
                               {"steps", p.steps},           {"profile", p.profile.name},
                               {"days_per_10b", p.profile.days_per_10b}, {"estimated_days", p.estimated_days}};
                write_text_file(fs::path(plan_out) / "plan.json", j.dump(2) + "\n");
                std::vector<fs::path> inputs;
                if (!plan_profiles.empty())
                    inputs.emplace_back(plan_profiles);
                write_run_manifest(plan_out, args, command, j, inputs);
            }
        };
    });

    // needle
    auto *needle = app.add_subcommand("needle", "Needle-in-a-haystack grids");
    needle->require_subcommand(1);
    std::string gen_spec, gen_filler, gen_out, gen_tok = "bytes";
    auto *gen = needle->add_subcommand("gen", "Generate the (length x depth) case grid");
    gen->add_option("--spec", gen_spec, "Needle spec (JSON); defaults to the 16x10 grid");
    gen->add_option("--filler", gen_filler, "Filler corpus: manifest, directory or .jsonl file")->required();
    gen->add_option("--tokenizer", gen_tok, "bytes|whitespace")->capture_default_str();
    gen->add_option("--out", gen_out, "Output directory")->required();
    gen->callback([&] {
        command = "needle gen";
        action = [&] {
            NeedleSpec spec;
            if (!gen_spec.empty())
                spec = needle_spec_from_json(nlohmann::json::parse(read_text_file(gen_spec)));
            auto tokenizer = make_tokenizer(gen_tok);
            auto filler = load_documents(gen_filler, tokenizer);
            auto cases = generate_grid(spec, filler, tokenizer, g.threads);
            ensure_dir(gen_out);
            std::string bytes;
            for (const auto &c : cases)
                bytes += serialize_case(c, tokenizer) + "\n";
            write_text_file(fs::path(gen_out) / "cases.jsonl", bytes);
            write_text_file(fs::path(gen_out) / "needle_spec.json", to_json(spec).dump(2) + "\n");
            log->info("wrote {} needle cases", cases.size());
            out << "cases\t" << cases.size() << "\n";
            std::vector<fs::path> inputs{gen_filler};
            if (!gen_spec.empty())
                inputs.emplace_back(gen_spec);
            write_run_manifest(gen_out, args, command, {{"spec", to_json(spec)}, {"tokenizer", gen_tok}}, inputs);
        };
    });

    std::string score_cases, score_responses, score_out;
    auto *score = needle->add_subcommand("score", "Score model transcripts against the cases");
    score->add_option("--cases", score_cases, "Directory written by needle gen")->required();
    score->add_option("--responses", score_responses, "JSONL of {case_id, output_text}")->required();
    score->add_option("--out", score_out, "Output directory (default: the cases directory)");
    score->callback([&] {
        command = "needle score";
        action = [&] {
            std::vector<NeedleCase> cases;
            {
                LineReader reader(fs::path(score_cases) / "cases.jsonl");
                std::string line;
                while (reader.next(line)) {
                    if (line.empty())
                        continue;
                    try {
                        auto j = nlohmann::json::parse(line);
                        j.erase("prompt_tokens");
                        cases.push_back(parse_case(j));
                    } catch (const nlohmann::json::exception &e) {
                        throw FormatError(reader.path().string(), reader.line_no(), e.what());
                    }
                }
            }
            std::map<std::string, std::string> responses;
            {
                LineReader reader(score_responses);
                std::string line;
                while (reader.next(line)) {
                    if (line.empty())
                        continue;
                    try {
                        auto j = nlohmann::json::parse(line);
                        responses[j.at("case_id").get<std::string>()] = j.at("output_text").get<std::string>();
                    } catch (const nlohmann::json::exception &e) {
                        throw FormatError(reader.path().string(), reader.line_no(), e.what());
                    }
                }
            }
            std::map<std::string, bool> known;
            for (const auto &c : cases)
                known[c.case_id] = true;
            for (const auto &[id, _] : responses)
                if (!known.count(id))
                    throw ValidationError("response for unknown case '" + id + "'");
            std::string tsv = "case_id\tcontext_len\tdepth\tscore\n";
            std::size_t missing = 0;
            double sum = 0.0;
            for (const auto &c : cases) {
                auto it = responses.find(c.case_id);
                if (it == responses.end())
                    ++missing;
                double s = score_response(c, it == responses.end() ? std::string() : it->second);
                sum += s;
                tsv += c.case_id + "\t" + std::to_string(c.context_len) + "\t" + fmt_double(c.depth_fraction, "%.10g") +
                       "\t" + fmt_double(s) + "\n";
            }
            if (missing)
                log->warn("{} cases have no response and score 0", missing);
            fs::path dir = score_out.empty() ? fs::path(score_cases) : fs::path(score_out);
            ensure_dir(dir);
            write_text_file(dir / "scores.tsv", tsv);
            write_run_manifest(dir, args, command, ordered_json::object(),
                               {fs::path(score_cases) / "cases.jsonl", score_responses});
            out << "scored\t" << cases.size() << "\nmean\t" << fmt_double(cases.empty() ? 0.0 : sum / cases.size())
                << "\n";
        };
    });

    std::string report_scores, report_out, report_train;
    double report_green = 0.8;
    auto *report = needle->add_subcommand("report", "Heatmap table and image from scores");
    report->add_option("--scores", report_scores, "scores.tsv written by needle score")->required();
    report->add_option("--green", report_green, "Scores at or above this are green")->capture_default_str();
    report->add_option("--train-len", report_train, "Training context length for the dashed marker (e.g. 80K)");
    report->add_option("--out", report_out, "Output directory (default: next to the scores)");
    report->callback([&] {
        command = "needle report";
        action = [&] {
            std::vector<ScoredCell> cells;
            for (const auto &row : read_delimited(report_scores)) {
                if (!row.fields.empty() && row.fields[0] == "case_id")
                    continue;
                if (row.fields.size() != 4)
                    throw FormatError(report_scores, row.line, "expected case_id, context_len, depth, score");
                cells.push_back({parse_count(row.fields[1]), parse_real(row.fields[2], report_scores, row.line),
                                 parse_real(row.fields[3], report_scores, row.line)});
            }
            auto grid = aggregate_heatmap(cells);
            std::optional<std::uint64_t> train;
            if (!report_train.empty())
                train = parse_count(report_train, SuffixBase::binary);
            auto r = render_heatmap(grid, report_green, train);
            fs::path dir = report_out.empty() ? fs::path(report_scores).parent_path() : fs::path(report_out);
            if (dir.empty())
                dir = ".";
            ensure_dir(dir);
            write_text_file(dir / "heatmap.tsv", r.tsv);
            write_text_file(dir / "heatmap.svg", r.svg);
            write_run_manifest(dir, args, command,
                               {{"green", report_green}, {"train_len", train ? ordered_json(*train) : ordered_json(nullptr)}},
                               {report_scores});
            out << "mean\t" << fmt_double(grid.mean) << "\nneedle_score\t" << fmt_double(grid.mean * 100.0, "%.1f")
                << "\n";
        };
    });

    // lossdiff
    std::string ld_baseline, ld_out;
    std::vector<std::string> ld_variants;
    double ld_threshold = kDefaultSignificance;
    auto *lossdiff = app.add_subcommand("lossdiff", "Per-domain loss differences against a baseline run");
    lossdiff->add_option("--baseline", ld_baseline, "Baseline loss records")->required();
    lossdiff->add_option("--variant", ld_variants, "Variant loss records (repeatable)")->required();
    lossdiff->add_option("--threshold", ld_threshold, "Significance threshold")->capture_default_str();
    lossdiff->add_option("--out", ld_out, "Output directory (default: next to the baseline)");
    lossdiff->callback([&] {
        command = "lossdiff";
        action = [&] {
            auto base = read_loss_records(ld_baseline);
            std::vector<LossRecord> variants;
            for (const auto &v : ld_variants) {
                auto r = read_loss_records(v);
                variants.insert(variants.end(), r.begin(), r.end());
            }
            auto rep = loss_diff_table(base, variants, ld_threshold);
            fs::path dir = ld_out.empty() ? fs::path(ld_baseline).parent_path() : fs::path(ld_out);
            if (dir.empty())
                dir = ".";
            ensure_dir(dir);
            write_text_file(dir / "lossdiff.tsv", loss_diff_tsv(rep));
            write_text_file(dir / "lossdiff_grid.tsv", loss_diff_grid(rep));
            std::vector<fs::path> inputs{ld_baseline};
            inputs.insert(inputs.end(), ld_variants.begin(), ld_variants.end());
            write_run_manifest(dir, args, command, {{"threshold", ld_threshold}}, inputs);
            std::size_t imp = 0, reg = 0;
            for (const auto &r : rep.rows) {
                imp += r.cls == Significance::improvement;
                reg += r.cls == Significance::regression;
            }
            out << "cells\t" << rep.rows.size() << "\nimprovements\t" << imp << "\nregressions\t" << reg << "\n";
        };
    });

    // curve
    std::string curve_points, curve_out;
    auto *curve = app.add_subcommand("curve", "Data-scaling curve table and image");
    curve->add_option("--points", curve_points, "trained_tokens, validation_loss, needle_mean_score")->required();
    curve->add_option("--out", curve_out, "Output directory (default: next to the points)");
    curve->callback([&] {
        command = "curve";
        action = [&] {
            auto c = scaling_curve(read_curve_points(curve_points));
            fs::path dir = curve_out.empty() ? fs::path(curve_points).parent_path() : fs::path(curve_out);
            if (dir.empty())
                dir = ".";
            ensure_dir(dir);
            write_text_file(dir / "curve.tsv", curve_tsv(c));
            write_text_file(dir / "curve.svg", curve_svg(c));
            write_run_manifest(dir, args, command, ordered_json::object(), {curve_points});
            out << "points\t" << c.size() << "\n";
        };
    });

    // replay
    std::string replay_manifest;
    auto *replay = app.add_subcommand("replay", "Re-run a command from its recorded run-<command>.json");
    replay->add_option("manifest", replay_manifest, "run manifest written by a previous command")->required();
    bool replaying = false;
    replay->callback([&] {
        command = "replay";
        replaying = true;
    });

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp &) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError &e) {
        std::cerr << "forge: " << e.what() << "\n";
        return kUsage;
    }

    auto level = spdlog::level::from_str(g.log_level);
    log->set_level(level);

    try {
        if (replaying) {
            auto j = nlohmann::json::parse(read_text_file(replay_manifest));
            auto recorded = j.at("argv").get<std::vector<std::string>>();
            if (j.value("command", "") == "replay")
                throw ValidationError("run manifest records a replay");
            log->info("replaying: {}", j.value("command", ""));
            return run(recorded, out);
        }
        action();
    } catch (const FormatError &e) {
        log->error("{}", e.what());
        return kFormat;
    } catch (const ValidationError &e) {
        log->error("{}", e.what());
        return kValidation;
    } catch (const IoError &e) {
        log->error("{}", e.what());
        return kMissingInput;
    } catch (const nlohmann::json::exception &e) {
        log->error("{}", e.what());
        return kFormat;
    } catch (const std::exception &e) {
        log->error("{}", e.what());
        return kInternal;
    }
    return audit_failed ? kAuditFailed : kOk;
}

} // namespace forge::cli
