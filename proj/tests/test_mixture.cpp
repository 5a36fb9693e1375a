#include <gtest/gtest.h>

#include <cmath>

#include "forge/mixture.hpp"
#include "support/oracles.hpp"
#include "support/synthetic_corpus.hpp"

using namespace forge;
using namespace forge::testing;

namespace {

MixtureSpec make_spec(Strategy s, std::uint64_t budget, std::uint64_t seed = 1) {
    MixtureSpec spec;
    spec.strategy = s;
    spec.token_budget = budget;
    spec.seed = seed;
    return spec;
}

std::vector<DocRef> two_domain_corpus() {
    SyntheticSpec s;
    s.shares = {{"A", 0.8}, {"B", 0.2}};
    return synthetic_refs(s);
}

std::vector<DocRef> book_heavy_corpus() {
    SyntheticSpec s;
    s.long_fraction = 0.05;
    s.long_fraction_for = {{domains::kBook, 0.9}};
    return synthetic_refs(s);
}

std::map<std::string, double> realized_shares(const SampledDataset &ds) {
    std::map<std::string, double> out;
    for (const auto &[d, t] : ds.tallies)
        out[d] = static_cast<double>(t.tokens) / static_cast<double>(ds.total_tokens);
    return out;
}

} // namespace

TEST(CutDocuments, HandDivision) {
    std::vector<DocRef> c{{"d", "A", 10000, "d", 0}};
    auto out = cut_documents(c, 4096);
    ASSERT_EQ(out.size(), 3u);
    EXPECT_EQ(out[0].token_count, 4096u);
    EXPECT_EQ(out[1].token_count, 4096u);
    EXPECT_EQ(out[2].token_count, 1808u);
    EXPECT_EQ(out[2].offset, 8192u);
    EXPECT_EQ(out[1].source_id, "d");
    EXPECT_EQ(out[0].domain, "A");
    EXPECT_NE(out[0].id, out[1].id);
}

TEST(CutDocuments, ShortAndBelow128KUnchanged) {
    std::vector<DocRef> c{{"s", "A", 1000, "s", 0}, {"l", "B", 130000, "l", 0}};
    auto at4k = cut_documents(c, 4096);
    EXPECT_EQ(at4k.front(), c.front());
    auto at128k = cut_documents(c, 131072);
    EXPECT_EQ(at128k, c);
}

TEST(CutDocuments, ConcatenationReproducesTokens) {
    Rng rng(3);
    std::vector<Document> docs;
    for (int i = 0; i < 30; ++i) {
        Document d;
        d.id = "doc" + std::to_string(i);
        d.domain = i % 2 ? "A" : "B";
        std::uint64_t n = 1 + uniform_index(rng, 20000);
        d.tokens = TokenSeq(n);
        for (auto &t : *d.tokens)
            t = static_cast<Token>(uniform_index(rng, 50000));
        d.token_count = n;
        docs.push_back(std::move(d));
    }
    for (std::uint64_t cut : {1ull, 7ull, 4096ull, 131072ull}) {
        auto chunks = cut_documents(docs, cut);
        std::size_t k = 0;
        for (const auto &d : docs) {
            TokenSeq joined;
            std::uint64_t expect_chunks = (d.token_count + cut - 1) / cut;
            for (std::uint64_t c = 0; c < expect_chunks; ++c, ++k) {
                ASSERT_LT(k, chunks.size());
                EXPECT_EQ(chunks[k].domain, d.domain);
                EXPECT_LE(chunks[k].token_count, cut);
                joined.insert(joined.end(), chunks[k].tokens->begin(), chunks[k].tokens->end());
            }
            EXPECT_EQ(joined, *d.tokens);
        }
        EXPECT_EQ(k, chunks.size());
    }
}

TEST(WeightSolver, HandExample) {
    auto w = solve_class_weight(700, 300, 0.7);
    EXPECT_NEAR(w.w_long, 49.0 / 9.0, 1e-12);
    EXPECT_DOUBLE_EQ(w.w_short, 1.0);
    EXPECT_NEAR(expected_long_fraction(w, 700, 300), 0.7, 1e-12);
}

TEST(WeightSolver, FixedPointAndDownsampling) {
    EXPECT_NEAR(solve_class_weight(700, 300, 0.3).w_long, 1.0, 1e-12);
    auto down = solve_class_weight(700, 300, 0.1);
    EXPECT_LT(down.w_long, 1.0);
    EXPECT_NEAR(expected_long_fraction(down, 700, 300), 0.1, 1e-12);
}

TEST(WeightSolver, Degenerate) {
    auto all_long = solve_class_weight(0, 300, 0.7);
    EXPECT_TRUE(all_long.unreachable);
    EXPECT_DOUBLE_EQ(expected_long_fraction(all_long, 0, 300), 1.0);
    try {
        solve_class_weight(700, 0, 0.7);
        FAIL();
    } catch (const ValidationError &e) {
        EXPECT_NE(std::string(e.what()).find("no long documents"), std::string::npos);
    }
    EXPECT_THROW(solve_class_weight(1, 1, 0.0), ValidationError);
    EXPECT_THROW(solve_class_weight(1, 1, 1.0), ValidationError);
}

TEST(WeightSolver, PlugBackOracle) {
    Rng rng(2024);
    for (int i = 0; i < 2000; ++i) {
        double S = 1 + unit_double(rng) * 1e9;
        double L = 1 + unit_double(rng) * 1e9;
        double f = 0.001 + unit_double(rng) * 0.998;
        auto w = solve_class_weight(S, L, f);
        EXPECT_NEAR(w.w_long, oracle_w_long(S, L, f), 1e-9 * oracle_w_long(S, L, f));
        EXPECT_NEAR(oracle_plug_back(w.w_long, S, L), f, 1e-12);
    }
}

TEST(WeightSolver, MonotoneInTarget) {
    Rng rng(7);
    for (int i = 0; i < 200; ++i) {
        double S = 1 + unit_double(rng) * 1e6, L = 1 + unit_double(rng) * 1e6;
        double prev = 0.0;
        for (double f = 0.05; f < 1.0; f += 0.05) {
            double w = solve_class_weight(S, L, f).w_long;
            EXPECT_GE(w, prev);
            prev = w;
        }
    }
}

TEST(WeightSolver, PerDomainWeights) {
    auto refs = synthetic_refs({});
    auto stats = collect_stats(refs);
    auto weights = solve_upsample_weights(stats.domains(), 0.7);
    ASSERT_EQ(weights.size(), 7u);
    for (const auto &[d, w] : weights) {
        const auto &s = stats.domains().at(d);
        EXPECT_NEAR(expected_long_fraction(w, s.short_tokens, s.long_tokens), 0.7, 1e-12);
        EXPECT_NEAR(w.w_long, 49.0 / 9.0, 1e-9); // every domain sits at exactly 30% long mass
    }
    std::map<std::string, DomainStats> no_long{{"X", DomainStats{"X", 1, 10, 10, 0, 0}}};
    EXPECT_THROW(solve_upsample_weights(no_long, 0.7), ValidationError);
}

TEST(MixtureSpecTest, ValidationRules) {
    auto spec = make_spec(Strategy::per_source_upsample, 100);
    EXPECT_NO_THROW(validate(spec));
    spec.target_long_fraction = 1.0;
    EXPECT_THROW(validate(spec), ValidationError);
    spec.target_long_fraction = 0.7;
    spec.token_budget = 0;
    EXPECT_THROW(validate(spec), ValidationError);
    spec.token_budget = 100;
    spec.target_domain_shares = std::map<std::string, double>{{"A", 0.5}, {"B", 0.4}};
    EXPECT_THROW(validate(spec), ValidationError);
    spec.target_domain_shares = std::map<std::string, double>{{"A", 0.5}, {"B", 0.5}};
    EXPECT_NO_THROW(validate(spec));
}

TEST(MixtureSpecTest, JsonRoundTrip) {
    auto spec = make_spec(Strategy::domain_upsample, 5'000'000'000ULL, 42);
    spec.boosted_domains = {{"Book", 5.0}, {"Arxiv", 3.0}};
    spec.target_long_fraction = 0.65;
    spec.long_mass = LongMass::documents;
    auto back = mixture_spec_from_json(nlohmann::json::parse(to_json(spec).dump()));
    EXPECT_EQ(to_json(back), to_json(spec));
    auto list = mixture_spec_from_json(
        nlohmann::json::parse(R"({"strategy":"domain_upsample","boosted_domains":["Book"],"token_budget":5e9})"));
    EXPECT_DOUBLE_EQ(list.boosted_domains.at("Book"), kDefaultBoost);
    EXPECT_EQ(list.token_budget, 5'000'000'000ULL);
    EXPECT_EQ(mixture_spec_from_json(nlohmann::json::parse(R"({"strategy":"cut_128k","token_budget":1})")).effective_cut_len(),
              131072u);
    EXPECT_THROW(mixture_spec_from_json(nlohmann::json::parse(R"({"strategy":"nope","token_budget":1})")),
                 ValidationError);
}

TEST(AllocateBudget, LargestRemainder) {
    auto a = detail::allocate_budget({{"A", 1.0 / 3}, {"B", 1.0 / 3}, {"C", 1.0 / 3}}, 100);
    EXPECT_EQ(a["A"] + a["B"] + a["C"], 100u);
    auto shares = slimpajama_shares();
    for (std::uint64_t budget : {1ull, 999ull, 1'000'000ull, 5'000'000'000ull}) {
        auto alloc = detail::allocate_budget(shares, budget);
        std::uint64_t sum = 0;
        for (const auto &[d, v] : alloc) {
            EXPECT_LE(std::abs(static_cast<double>(v) - shares.at(d) * static_cast<double>(budget)), 1.0);
            sum += v;
        }
        EXPECT_EQ(sum, budget);
    }
}

TEST(PerSource, TwoDomainsHitSharesAndLongFraction) {
    auto refs = two_domain_corpus();
    auto spec = make_spec(Strategy::per_source_upsample, 1'000'000);
    auto ds = build_mixture(refs, spec);
    auto shares = realized_shares(ds);
    EXPECT_NEAR(shares.at("A"), 0.8, 0.01);
    EXPECT_NEAR(shares.at("B"), 0.2, 0.01);
    for (const auto &[d, t] : ds.tallies)
        EXPECT_NEAR(static_cast<double>(t.long_tokens) / static_cast<double>(t.tokens), 0.7, 0.02) << d;
    EXPECT_TRUE(verify_mixture(ds).pass);
}

TEST(PerSource, ExplicitTargetShares) {
    auto refs = two_domain_corpus();
    auto spec = make_spec(Strategy::per_source_upsample, 1'000'000);
    spec.target_domain_shares = std::map<std::string, double>{{"A", 0.5}, {"B", 0.5}};
    auto ds = build_mixture(refs, spec);
    auto shares = realized_shares(ds);
    EXPECT_NEAR(shares.at("A"), 0.5, 0.01);
    EXPECT_TRUE(verify_mixture(ds).pass);
    spec.target_domain_shares = std::map<std::string, double>{{"A", 0.5}, {"Z", 0.5}};
    EXPECT_THROW(build_mixture(refs, spec), ValidationError);
}

TEST(PerSource, SlimPajamaAuditPassesAcrossSeeds) {
    for (std::uint64_t corpus_seed : {11ull, 12ull, 13ull}) {
        SyntheticSpec s;
        s.seed = corpus_seed;
        auto refs = synthetic_refs(s);
        for (std::uint64_t seed = 1; seed <= 4; ++seed) {
            auto ds = build_mixture(refs, make_spec(Strategy::per_source_upsample, 1'000'000, seed));
            auto audit = verify_mixture(ds, {0.01, 0.02});
            EXPECT_TRUE(audit.pass) << "corpus " << corpus_seed << " seed " << seed << "\n" << audit_table(audit);
        }
    }
}

TEST(PerSource, DeviationShrinksWithBudget) {
    auto refs = synthetic_refs({});
    auto mean_dev = [&](std::uint64_t budget) {
        double sum = 0;
        int n = 0;
        for (std::uint64_t seed = 1; seed <= 6; ++seed) {
            auto a = verify_mixture(build_mixture(refs, make_spec(Strategy::per_source_upsample, budget, seed)));
            for (const auto &r : a.rows) {
                sum += r.share_deviation + *r.long_deviation;
                ++n;
            }
        }
        return sum / n;
    };
    EXPECT_LT(mean_dev(4'000'000), mean_dev(200'000));
}

TEST(PerSource, DomainWithoutLongDocsIsFlaggedNotFailed) {
    std::vector<DocRef> refs;
    for (int i = 0; i < 200; ++i)
        refs.push_back({"s" + std::to_string(i), "S", 100, "s" + std::to_string(i), 0});
    SyntheticSpec s;
    s.shares = {{"A", 1.0}};
    s.total_tokens = 100'000;
    auto more = synthetic_refs(s);
    refs.insert(refs.end(), more.begin(), more.end());
    auto ds = build_mixture(refs, make_spec(Strategy::per_source_upsample, 200'000));
    EXPECT_FALSE(ds.weights.count("S"));
    EXPECT_FALSE(ds.warnings.empty());
    auto audit = verify_mixture(ds);
    for (const auto &r : audit.rows)
        if (r.domain == "S")
            EXPECT_TRUE(r.flagged);
}

TEST(PerSource, AllLongDomainUnreachable) {
    std::vector<DocRef> refs;
    for (int i = 0; i < 20; ++i)
        refs.push_back({"l" + std::to_string(i), "L", 5000, "l" + std::to_string(i), 0});
    for (int i = 0; i < 100; ++i)
        refs.push_back({"m" + std::to_string(i), "M", i % 3 ? 200u : 6000u, "m" + std::to_string(i), 0});
    auto ds = build_mixture(refs, make_spec(Strategy::per_source_upsample, 300'000));
    EXPECT_TRUE(ds.weights.at("L").unreachable);
    auto audit = verify_mixture(ds);
    for (const auto &r : audit.rows)
        if (r.domain == "L") {
            EXPECT_TRUE(r.flagged);
            EXPECT_DOUBLE_EQ(*r.realized_long_token_fraction, 1.0);
        }
}

TEST(GlobalUpsample, LongHeavyDomainGainsShare) {
    auto refs = book_heavy_corpus();
    auto original = oracle_shares(refs);
    auto expected = oracle_expected_shares(refs, oracle_pooled_weights(refs, 0.7, 4096));
    EXPECT_GT(expected.at(domains::kBook), original.at(domains::kBook));
    // ~1500 long Book draws per run keeps sampling noise near 0.005
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        auto ds = build_mixture(refs, make_spec(Strategy::global_upsample, 50'000'000, seed));
        auto shares = realized_shares(ds);
        EXPECT_GT(shares.at(domains::kBook), original.at(domains::kBook));
        EXPECT_NEAR(shares.at(domains::kBook), expected.at(domains::kBook), 0.02);
        auto audit = verify_mixture(ds);
        EXPECT_FALSE(audit.pass);
        for (const auto &r : audit.rows)
            if (r.domain == domains::kBook)
                EXPECT_FALSE(r.pass);
        EXPECT_NEAR(*audit.overall.realized_long_token_fraction, 0.7, 0.02);
    }
}

TEST(GlobalUpsample, DriftSignsFollowExpectation) {
    auto refs = book_heavy_corpus();
    auto original = oracle_shares(refs);
    auto expected = oracle_expected_shares(refs, oracle_pooled_weights(refs, 0.7, 4096));
    auto ds = build_mixture(refs, make_spec(Strategy::global_upsample, 4'000'000, 5));
    auto shares = realized_shares(ds);
    for (const auto &[d, e] : expected) {
        double drift = e - original.at(d);
        if (std::abs(drift) > 0.01)
            EXPECT_EQ(shares.at(d) > original.at(d), drift > 0) << d;
    }
}

TEST(GlobalUpsample, PooledWeightMatchesOracle) {
    auto refs = book_heavy_corpus();
    auto ds = build_mixture(refs, make_spec(Strategy::global_upsample, 10'000));
    auto w = oracle_pooled_weights(refs, 0.7, 4096);
    double w_long = *std::max_element(w.begin(), w.end());
    EXPECT_NEAR(ds.weights.at("*").w_long, w_long, 1e-12 * w_long);
}

TEST(FirstDraw, MatchesExhaustiveEnumeration) {
    std::vector<DocRef> refs;
    Rng rng(17);
    for (int i = 0; i < 18; ++i) {
        auto len = i % 3 == 0 ? 4097 + uniform_index(rng, 20000) : 1 + uniform_index(rng, 4096);
        refs.push_back({"d" + std::to_string(i), i % 2 ? "A" : "B", len, "d" + std::to_string(i), 0});
    }
    auto oracle = oracle_first_draw(oracle_pooled_weights(refs, 0.7, 4096));

    // exact probabilities of the sampler the pooled strategies use
    auto ds = build_mixture(refs, make_spec(Strategy::global_upsample, 1));
    std::vector<double> weights;
    for (const auto &d : refs)
        weights.push_back(d.token_count > 4096 ? ds.weights.at("*").w_long : ds.weights.at("*").w_short);
    WeightedIndex index(weights);
    for (std::size_t i = 0; i < refs.size(); ++i)
        EXPECT_NEAR(index.probability(i), oracle[i], 1e-12) << i;

    // and the first draw of build_mixture follows it
    std::map<std::string, int> hits;
    const int runs = 20000;
    for (int s = 0; s < runs; ++s)
        ++hits[build_mixture(refs, make_spec(Strategy::global_upsample, 1, s)).draws.front().id];
    for (std::size_t i = 0; i < refs.size(); ++i) {
        double p = oracle[i];
        double sigma = std::sqrt(p * (1 - p) / runs);
        EXPECT_NEAR(hits[refs[i].id] / static_cast<double>(runs), p, 5 * sigma + 1e-9) << refs[i].id;
    }
}

TEST(CutStrategies, Cut4kHasNoLongDraws) {
    auto refs = synthetic_refs({});
    auto ds = build_mixture(refs, make_spec(Strategy::cut_4k, 1'000'000));
    for (const auto &d : ds.draws)
        ASSERT_LE(d.length, 4096u);
    EXPECT_EQ(ds.max_doc_len, 4096u);
    for (const auto &[dom, t] : ds.tallies)
        EXPECT_EQ(t.long_tokens, 0u);
}

TEST(CutStrategies, Cut128kPreservesShares) {
    // i.i.d. draws: shares settle to +-0.01 only once small domains hold
    // enough long documents, hence the larger corpus
    SyntheticSpec big;
    big.total_tokens = 20'000'000;
    auto refs = synthetic_refs(big);
    std::uint64_t corpus_tokens = 0;
    for (const auto &r : refs)
        corpus_tokens += r.token_count;
    auto ds = build_mixture(refs, make_spec(Strategy::cut_128k, corpus_tokens));
    auto shares = realized_shares(ds);
    for (const auto &[d, s] : slimpajama_shares())
        EXPECT_NEAR(shares.at(d), s, 0.01) << d;
    EXPECT_TRUE(verify_mixture(ds).pass);
}

TEST(BudgetInvariant, PooledStrategiesCrossBudgetOnce) {
    auto refs = synthetic_refs({});
    for (auto s : {Strategy::cut_4k, Strategy::cut_128k, Strategy::global_upsample})
        for (std::uint64_t budget : {1000ull, 123'457ull, 1'000'000ull}) {
            auto ds = build_mixture(refs, make_spec(s, budget));
            EXPECT_GE(ds.total_tokens, budget);
            EXPECT_LT(ds.total_tokens, budget + ds.max_doc_len);
            std::uint64_t before_last = ds.total_tokens - ds.draws.back().length;
            EXPECT_LT(before_last, budget);
        }
}

TEST(BudgetInvariant, BudgetBelowOneDocument) {
    std::vector<DocRef> refs{{"a", "A", 5000, "a", 0}, {"b", "A", 6000, "b", 0}, {"c", "B", 7000, "c", 0}};
    for (auto s : {Strategy::per_source_upsample, Strategy::global_upsample, Strategy::cut_128k}) {
        auto ds = build_mixture(refs, make_spec(s, 10));
        ASSERT_EQ(ds.draws.size(), 1u) << to_string(s);
        EXPECT_FALSE(ds.warnings.empty()) << to_string(s);
    }
}

TEST(DomainUpsample, BoostedShareRenormalized) {
    auto refs = synthetic_refs({});
    auto spec = make_spec(Strategy::domain_upsample, 2'000'000);
    spec.boosted_domains = {{domains::kBook, 5.0}, {"Nowhere", 2.0}};
    auto ds = build_mixture(refs, spec);
    double s = 0.045;
    double boosted = 5 * s / (1 + 4 * s);
    EXPECT_NEAR(ds.target_shares.at(domains::kBook), boosted, 1e-12);
    auto shares = realized_shares(ds);
    EXPECT_NEAR(shares.at(domains::kBook), boosted, 0.01);
    EXPECT_NEAR(shares.at(domains::kCommonCrawl), 0.67 / (1 + 4 * s), 0.01);
    // no length reweighting: long mass stays near the corpus' 30%
    for (const auto &[d, t] : ds.tallies)
        if (t.tokens > 100'000)
            EXPECT_NEAR(static_cast<double>(t.long_tokens) / static_cast<double>(t.tokens), 0.3, 0.08) << d;
    EXPECT_NE(std::find_if(ds.warnings.begin(), ds.warnings.end(),
                           [](const std::string &w) { return w.find("Nowhere") != std::string::npos; }),
              ds.warnings.end());
}

TEST(Determinism, SameSpecSameDraws) {
    auto refs = synthetic_refs({});
    for (auto s : {Strategy::cut_4k, Strategy::per_source_upsample, Strategy::global_upsample,
                   Strategy::domain_upsample}) {
        auto spec = make_spec(s, 300'000, 9);
        spec.boosted_domains = {{domains::kArxiv, 5.0}};
        auto a = build_mixture(refs, spec, {1});
        auto b = build_mixture(refs, spec, {8});
        EXPECT_EQ(a.draws, b.draws) << to_string(s);
        spec.seed = 10;
        auto c = build_mixture(refs, spec, {1});
        EXPECT_NE(a.draws, c.draws) << to_string(s);
    }
}

TEST(Draws, RepeatIndicesCountEarlierDraws) {
    auto refs = synthetic_refs({});
    auto ds = build_mixture(refs, make_spec(Strategy::per_source_upsample, 1'000'000));
    std::map<std::string, std::uint32_t> next;
    bool any_repeat = false;
    for (const auto &d : ds.draws) {
        EXPECT_EQ(d.repeat, next[d.id]++);
        any_repeat = any_repeat || d.repeat > 0;
    }
    EXPECT_TRUE(any_repeat);
}

TEST(Audit, ExactTargetsPass) {
    SampledDataset ds;
    ds.spec = make_spec(Strategy::per_source_upsample, 100);
    ds.target_shares = {{"A", 0.6}, {"B", 0.4}};
    ds.weights = {{"A", {1, 2, false}}, {"B", {1, 3, false}}};
    ds.tallies = {{"A", {3, 60, 1, 42}}, {"B", {2, 40, 1, 28}}};
    ds.total_tokens = 100;
    auto a = verify_mixture(ds);
    EXPECT_TRUE(a.pass);
    for (const auto &r : a.rows) {
        EXPECT_NEAR(r.share_deviation, 0.0, 1e-15);
        EXPECT_NEAR(*r.long_deviation, 0.0, 1e-15);
    }
    ds.tallies["B"].long_tokens = 10;
    EXPECT_FALSE(verify_mixture(ds).pass);
}

TEST(Audit, EmptyCorpusRejected) {
    std::vector<DocRef> none;
    EXPECT_THROW(build_mixture(none, make_spec(Strategy::cut_4k, 10)), ValidationError);
}
