#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <queue>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "forge/digest.hpp"
#include "forge/document.hpp"
#include "forge/error.hpp"
#include "forge/parallel.hpp"
#include "forge/sampling.hpp"
#include "forge/stats.hpp"

namespace forge {

enum class Strategy { cut_4k, cut_128k, per_source_upsample, global_upsample, domain_upsample };

inline const char *to_string(Strategy s) {
    switch (s) {
    case Strategy::cut_4k: return "cut_4k";
    case Strategy::cut_128k: return "cut_128k";
    case Strategy::per_source_upsample: return "per_source_upsample";
    case Strategy::global_upsample: return "global_upsample";
    case Strategy::domain_upsample: return "domain_upsample";
    }
    return "?";
}

inline Strategy parse_strategy(const std::string &s) {
    for (auto v : {Strategy::cut_4k, Strategy::cut_128k, Strategy::per_source_upsample, Strategy::global_upsample,
                   Strategy::domain_upsample})
        if (s == to_string(v))
            return v;
    throw ValidationError("unknown strategy '" + s + "'");
}

// Which mass the long-fraction target is stated over.
enum class LongMass { tokens, documents };

inline constexpr std::uint64_t kCut4k = 4096;
inline constexpr std::uint64_t kCut128k = 131072;
inline constexpr double kDefaultBoost = 5.0;

struct MixtureSpec {
    Strategy strategy = Strategy::per_source_upsample;
    std::optional<std::uint64_t> cut_len; // defaults by strategy
    std::uint64_t long_threshold = kDefaultLongThreshold;
    double target_long_fraction = 0.7;
    LongMass long_mass = LongMass::tokens;
    std::optional<std::map<std::string, double>> target_domain_shares;
    std::map<std::string, double> boosted_domains; // domain_upsample only
    std::uint64_t token_budget = 0;
    std::uint64_t seed = 0;

    std::uint64_t effective_cut_len() const {
        if (cut_len)
            return *cut_len;
        return strategy == Strategy::cut_128k ? kCut128k : kCut4k;
    }

    bool is_cut() const { return strategy == Strategy::cut_4k || strategy == Strategy::cut_128k; }
};

inline void validate(const MixtureSpec &spec) {
    if (!(spec.target_long_fraction > 0.0 && spec.target_long_fraction < 1.0))
        throw ValidationError("target_long_fraction must be strictly between 0 and 1");
    if (spec.token_budget == 0)
        throw ValidationError("token_budget must be positive");
    if (spec.is_cut() && spec.effective_cut_len() == 0)
        throw ValidationError("cut_len must be positive");
    if (spec.target_domain_shares) {
        double sum = 0.0;
        for (const auto &[d, s] : *spec.target_domain_shares) {
            if (!(s >= 0.0))
                throw ValidationError("target share for '" + d + "' is negative");
            sum += s;
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw ValidationError("target_domain_shares must sum to 1 (got " + std::to_string(sum) + ")");
    }
    for (const auto &[d, m] : spec.boosted_domains)
        if (!(m > 0.0))
            throw ValidationError("boost multiplier for '" + d + "' must be positive");
}

inline nlohmann::ordered_json to_json(const MixtureSpec &s) {
    nlohmann::ordered_json j;
    j["strategy"] = to_string(s.strategy);
    j["cut_len"] = s.effective_cut_len();
    j["long_threshold"] = s.long_threshold;
    j["target_long_fraction"] = s.target_long_fraction;
    j["long_mass"] = s.long_mass == LongMass::tokens ? "tokens" : "documents";
    if (s.target_domain_shares)
        j["target_domain_shares"] = *s.target_domain_shares;
    if (!s.boosted_domains.empty())
        j["boosted_domains"] = s.boosted_domains;
    j["token_budget"] = s.token_budget;
    j["seed"] = s.seed;
    return j;
}

// "boosted_domains" may be a map domain -> multiplier or a list of domains
// (each gets the default 5x).
inline MixtureSpec mixture_spec_from_json(const nlohmann::json &j) {
    MixtureSpec s;
    try {
        s.strategy = parse_strategy(j.at("strategy").get<std::string>());
        if (j.contains("cut_len"))
            s.cut_len = j["cut_len"].get<std::uint64_t>();
        s.long_threshold = j.value("long_threshold", kDefaultLongThreshold);
        s.target_long_fraction = j.value("target_long_fraction", 0.7);
        auto mass = j.value("long_mass", std::string("tokens"));
        if (mass == "tokens")
            s.long_mass = LongMass::tokens;
        else if (mass == "documents")
            s.long_mass = LongMass::documents;
        else
            throw ValidationError("long_mass must be 'tokens' or 'documents'");
        if (j.contains("target_domain_shares"))
            s.target_domain_shares = j["target_domain_shares"].get<std::map<std::string, double>>();
        if (j.contains("boosted_domains")) {
            const auto &b = j["boosted_domains"];
            if (b.is_array())
                for (const auto &d : b)
                    s.boosted_domains[d.get<std::string>()] = kDefaultBoost;
            else
                s.boosted_domains = b.get<std::map<std::string, double>>();
        }
        auto budget = j.at("token_budget");
        s.token_budget = budget.is_number_float() ? static_cast<std::uint64_t>(std::llround(budget.get<double>()))
                                                  : budget.get<std::uint64_t>();
        s.seed = j.value("seed", std::uint64_t{0});
    } catch (const nlohmann::json::exception &e) {
        throw ValidationError(std::string("mixture spec: ") + e.what());
    }
    validate(s);
    return s;
}

// Splits every document longer than cut_len into consecutive chunks; chunk i
// covers [i*cut_len, min((i+1)*cut_len, L)) and gets the id suffix "#i".
// Documents that fit are passed through unchanged.
inline std::vector<DocRef> cut_documents(const std::vector<DocRef> &corpus, std::uint64_t cut_len) {
    if (cut_len == 0)
        throw ValidationError("cut_len must be positive");
    std::vector<DocRef> out;
    out.reserve(corpus.size());
    for (const auto &d : corpus) {
        if (d.token_count <= cut_len) {
            out.push_back(d);
            continue;
        }
        std::uint64_t n = (d.token_count + cut_len - 1) / cut_len;
        for (std::uint64_t i = 0; i < n; ++i) {
            DocRef c;
            c.id = d.id + "#" + std::to_string(i);
            c.domain = d.domain;
            c.source_id = d.source_id;
            c.offset = d.offset + i * cut_len;
            c.token_count = std::min((i + 1) * cut_len, d.token_count) - i * cut_len;
            out.push_back(std::move(c));
        }
    }
    return out;
}

inline std::vector<Document> cut_documents(const std::vector<Document> &corpus, std::uint64_t cut_len) {
    if (cut_len == 0)
        throw ValidationError("cut_len must be positive");
    std::vector<Document> out;
    for (const auto &d : corpus) {
        if (d.token_count <= cut_len) {
            out.push_back(d);
            continue;
        }
        if (!d.tokens)
            throw ValidationError("cut_documents: document '" + d.id + "' has no tokens");
        std::uint64_t n = (d.token_count + cut_len - 1) / cut_len;
        for (std::uint64_t i = 0; i < n; ++i) {
            Document c;
            c.id = d.id + "#" + std::to_string(i);
            c.domain = d.domain;
            auto begin = d.tokens->begin() + static_cast<std::ptrdiff_t>(i * cut_len);
            auto end = d.tokens->begin() + static_cast<std::ptrdiff_t>(std::min((i + 1) * cut_len, d.token_count));
            c.tokens = TokenSeq(begin, end);
            c.token_count = c.tokens->size();
            out.push_back(std::move(c));
        }
    }
    return out;
}

struct ClassWeight {
    double w_short = 1.0;
    double w_long = 1.0;
    // Target cannot be met: every document of the domain is long.
    bool unreachable = false;
};

using ClassWeights = std::map<std::string, ClassWeight>;

// Long-class multiplier that makes the expected long share of drawn mass
// equal to target when short documents keep weight 1:
//   w_long * long_mass / (w_long * long_mass + short_mass) == target.
inline ClassWeight solve_class_weight(double short_mass, double long_mass, double target) {
    if (!(target > 0.0 && target < 1.0))
        throw ValidationError("target long fraction must be strictly between 0 and 1");
    if (long_mass <= 0.0)
        throw ValidationError("domain has no long documents");
    if (short_mass <= 0.0)
        return {1.0, 1.0, true};
    return {1.0, target * short_mass / ((1.0 - target) * long_mass), false};
}

inline double expected_long_fraction(const ClassWeight &w, double short_mass, double long_mass) {
    double l = w.w_long * long_mass;
    double s = w.w_short * short_mass;
    return l / (l + s);
}

inline ClassWeights solve_upsample_weights(const std::map<std::string, DomainStats> &stats, double target,
                                           LongMass mass = LongMass::tokens) {
    ClassWeights out;
    for (const auto &[d, s] : stats) {
        if (s.long_tokens == 0)
            throw ValidationError("domain has no long documents: " + d);
        double short_mass = mass == LongMass::tokens ? static_cast<double>(s.short_tokens)
                                                     : static_cast<double>(s.doc_count - s.long_doc_count);
        double long_mass = mass == LongMass::tokens ? static_cast<double>(s.long_tokens)
                                                    : static_cast<double>(s.long_doc_count);
        out[d] = solve_class_weight(short_mass, long_mass, target);
    }
    return out;
}

struct Draw {
    std::string id;        // sampled unit (document or cut chunk)
    std::string source_id; // originating document
    std::string domain;
    std::uint64_t offset = 0;
    std::uint64_t length = 0;
    std::uint32_t repeat = 0; // earlier draws of the same id
    bool is_long = false;

    friend bool operator==(const Draw &, const Draw &) = default;
};

struct DomainTallies {
    std::uint64_t draws = 0;
    std::uint64_t tokens = 0;
    std::uint64_t long_draws = 0;
    std::uint64_t long_tokens = 0;
};

struct SampledDataset {
    MixtureSpec spec;
    std::vector<Draw> draws;
    std::map<std::string, DomainTallies> tallies;
    std::map<std::string, double> original_shares; // token shares of the source corpus
    std::map<std::string, double> target_shares;   // what the strategy aims for
    ClassWeights weights;
    std::vector<std::string> warnings;
    std::uint64_t total_tokens = 0;
    std::uint64_t max_doc_len = 0;
};

struct MixtureOptions {
    unsigned threads = 1;
};

namespace detail {

// Largest-remainder split of `budget` by `shares` (shares sum to 1).
inline std::map<std::string, std::uint64_t> allocate_budget(const std::map<std::string, double> &shares,
                                                            std::uint64_t budget) {
    std::map<std::string, std::uint64_t> out;
    std::vector<std::pair<double, std::string>> remainders;
    std::uint64_t assigned = 0;
    double sum = 0.0;
    for (const auto &[d, s] : shares)
        sum += s;
    for (const auto &[d, s] : shares) {
        double exact = static_cast<double>(budget) * s / sum;
        auto base = static_cast<std::uint64_t>(std::floor(exact));
        out[d] = base;
        assigned += base;
        remainders.emplace_back(exact - static_cast<double>(base), d);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto &a, const auto &b) { return a.first > b.first; });
    for (std::size_t i = 0; assigned < budget && i < remainders.size(); ++i, ++assigned)
        ++out[remainders[i].second];
    return out;
}

inline Draw make_draw(const DocRef &d, std::uint64_t long_threshold) {
    return {d.id, d.source_id, d.domain, d.offset, d.token_count, 0, d.token_count > long_threshold};
}

// Uniform draws from `docs` until the drawn mass is as close as possible to
// `quota`: the draw that crosses the quota is kept only if it lands no
// farther from it than stopping short would.
inline std::uint64_t fill_closest(const std::vector<const DocRef *> &docs, double quota, Rng &rng,
                                  std::uint64_t long_threshold, std::vector<Draw> &out) {
    std::uint64_t realized = 0;
    if (docs.empty())
        return 0;
    while (static_cast<double>(realized) < quota) {
        const DocRef &d = *docs[uniform_index(rng, docs.size())];
        double after = static_cast<double>(realized + d.token_count);
        if (after >= quota) {
            if (after - quota <= quota - static_cast<double>(realized)) {
                out.push_back(make_draw(d, long_threshold));
                realized += d.token_count;
            }
            break;
        }
        out.push_back(make_draw(d, long_threshold));
        realized += d.token_count;
    }
    return realized;
}

// Weighted draws with replacement until the drawn mass reaches `budget`.
inline void fill_weighted(const std::vector<const DocRef *> &docs, const std::vector<double> &weights,
                          std::uint64_t budget, Rng &rng, std::uint64_t long_threshold, std::vector<Draw> &out) {
    if (docs.empty() || budget == 0)
        return;
    WeightedIndex index(weights);
    std::uint64_t realized = 0;
    while (realized < budget) {
        const DocRef &d = *docs[index.sample(rng)];
        out.push_back(make_draw(d, long_threshold));
        realized += d.token_count;
    }
}

struct DomainPlan {
    std::string domain;
    std::vector<const DocRef *> docs;
    std::uint64_t allocation = 0;
    ClassWeight weight;
    bool has_weight = false;
    std::vector<Draw> draws;
    std::vector<std::string> warnings;
};

inline void sample_domain(DomainPlan &p, const MixtureSpec &spec) {
    Rng rng(derive_seed(spec.seed, p.domain));
    const auto threshold = spec.long_threshold;
    if (p.allocation == 0 || p.docs.empty())
        return;

    if (spec.strategy == Strategy::per_source_upsample && spec.long_mass == LongMass::tokens) {
        std::vector<const DocRef *> shorts, longs;
        double short_mass = 0.0, long_mass = 0.0;
        for (const auto *d : p.docs) {
            if (d->token_count > threshold) {
                longs.push_back(d);
                long_mass += static_cast<double>(d->token_count);
            } else {
                shorts.push_back(d);
                short_mass += static_cast<double>(d->token_count);
            }
        }
        // long share of the domain budget implied by the class weights
        double frac = p.has_weight ? expected_long_fraction(p.weight, short_mass, long_mass) : 0.0;
        double budget = static_cast<double>(p.allocation);
        std::uint64_t realized_long = fill_closest(longs, frac * budget, rng, threshold, p.draws);
        double short_quota = budget;
        if (frac >= 1.0)
            short_quota = 0.0;
        else if (frac > 0.0 && realized_long > 0)
            short_quota = static_cast<double>(realized_long) * (1.0 - frac) / frac;
        else if (frac > 0.0)
            short_quota = budget * (1.0 - frac);
        fill_closest(shorts, short_quota, rng, threshold, p.draws);
        seeded_shuffle(p.draws, rng);
        return;
    }

    std::vector<double> weights(p.docs.size(), 1.0);
    if (spec.strategy == Strategy::per_source_upsample && p.has_weight)
        for (std::size_t i = 0; i < p.docs.size(); ++i)
            weights[i] = p.docs[i]->token_count > threshold ? p.weight.w_long : p.weight.w_short;
    fill_weighted(p.docs, weights, p.allocation, rng, threshold, p.draws);
}

// Merge per-domain draw lists, always taking from the domain that is least
// far through its allocation (ties by name).
inline std::vector<Draw> interleave(std::vector<DomainPlan> &plans) {
    using Key = std::tuple<double, std::string, std::size_t>;
    std::priority_queue<Key, std::vector<Key>, std::greater<>> heap;
    std::vector<std::size_t> pos(plans.size(), 0);
    std::vector<std::uint64_t> emitted(plans.size(), 0);
    std::size_t total = 0;
    for (std::size_t i = 0; i < plans.size(); ++i) {
        total += plans[i].draws.size();
        if (!plans[i].draws.empty())
            heap.emplace(0.0, plans[i].domain, i);
    }
    std::vector<Draw> out;
    out.reserve(total);
    while (!heap.empty()) {
        auto [progress, name, i] = heap.top();
        heap.pop();
        auto &p = plans[i];
        out.push_back(std::move(p.draws[pos[i]]));
        emitted[i] += out.back().length;
        if (++pos[i] < p.draws.size())
            heap.emplace(static_cast<double>(emitted[i]) / static_cast<double>(std::max<std::uint64_t>(p.allocation, 1)),
                         p.domain, i);
    }
    return out;
}

} // namespace detail

// Builds the sampled dataset for `spec` over a count-level view of the corpus.
// Draws are with replacement and fully determined by (corpus, spec).
inline SampledDataset build_mixture(const std::vector<DocRef> &corpus, const MixtureSpec &spec,
                                    MixtureOptions opts = {}) {
    validate(spec);
    if (corpus.empty())
        throw ValidationError("no documents");

    SampledDataset ds;
    ds.spec = spec;
    const auto threshold = spec.long_threshold;

    auto original = collect_stats(corpus, threshold);
    ds.original_shares = domain_mixture(original).token_share;

    std::vector<DocRef> cut_storage;
    const std::vector<DocRef> *units = &corpus;
    if (spec.is_cut()) {
        cut_storage = cut_documents(corpus, spec.effective_cut_len());
        units = &cut_storage;
    }
    for (const auto &d : *units)
        ds.max_doc_len = std::max(ds.max_doc_len, d.token_count);

    auto long_mass_of = [&](const DomainStats &s) {
        return spec.long_mass == LongMass::tokens ? static_cast<double>(s.long_tokens)
                                                  : static_cast<double>(s.long_doc_count);
    };
    auto short_mass_of = [&](const DomainStats &s) {
        return spec.long_mass == LongMass::tokens ? static_cast<double>(s.short_tokens)
                                                  : static_cast<double>(s.doc_count - s.long_doc_count);
    };

    if (spec.is_cut() || spec.strategy == Strategy::global_upsample) {
        ds.target_shares = ds.original_shares;
        std::vector<const DocRef *> docs;
        docs.reserve(units->size());
        for (const auto &d : *units)
            docs.push_back(&d);
        std::vector<double> weights(docs.size(), 1.0);
        if (spec.strategy == Strategy::global_upsample) {
            auto pooled = original.total();
            try {
                auto w = solve_class_weight(short_mass_of(pooled), long_mass_of(pooled), spec.target_long_fraction);
                ds.weights["*"] = w;
                if (w.unreachable)
                    ds.warnings.push_back("corpus has only long documents; long-fraction target unreachable");
                for (std::size_t i = 0; i < docs.size(); ++i)
                    weights[i] = docs[i]->token_count > threshold ? w.w_long : w.w_short;
            } catch (const ValidationError &) {
                ds.warnings.push_back("corpus has no long documents; long-fraction target unreachable");
            }
        }
        Rng rng(derive_seed(spec.seed, "*pool*"));
        detail::fill_weighted(docs, weights, spec.token_budget, rng, threshold, ds.draws);
    } else {
        // per-domain strategies: deterministic budget allocation, stochastic draws inside each domain
        std::map<std::string, double> shares;
        if (spec.strategy == Strategy::per_source_upsample) {
            shares = spec.target_domain_shares ? *spec.target_domain_shares : ds.original_shares;
        } else {
            for (const auto &[d, s] : ds.original_shares) {
                auto it = spec.boosted_domains.find(d);
                shares[d] = s * (it == spec.boosted_domains.end() ? 1.0 : it->second);
            }
            double sum = 0.0;
            for (const auto &[d, s] : shares)
                sum += s;
            for (auto &[d, s] : shares)
                s /= sum;
            for (const auto &[d, m] : spec.boosted_domains)
                if (!ds.original_shares.count(d))
                    ds.warnings.push_back("boosted domain '" + d + "' not present in corpus");
        }
        for (const auto &[d, s] : shares)
            if (s > 0.0 && !original.domains().count(d))
                throw ValidationError("target share given for domain '" + d + "' which has no documents");
        ds.target_shares = shares;

        auto alloc = detail::allocate_budget(shares, spec.token_budget);
        std::map<std::string, std::size_t> index_of;
        std::vector<detail::DomainPlan> plans;
        for (const auto &[d, a] : alloc) {
            index_of[d] = plans.size();
            detail::DomainPlan p;
            p.domain = d;
            p.allocation = a;
            plans.push_back(std::move(p));
        }
        for (const auto &u : *units) {
            auto it = index_of.find(u.domain);
            if (it != index_of.end())
                plans[it->second].docs.push_back(&u);
        }
        if (spec.strategy == Strategy::per_source_upsample) {
            for (auto &p : plans) {
                const auto &s = original.domains().at(p.domain);
                try {
                    p.weight = solve_class_weight(short_mass_of(s), long_mass_of(s), spec.target_long_fraction);
                    p.has_weight = true;
                    ds.weights[p.domain] = p.weight;
                    if (p.weight.unreachable)
                        ds.warnings.push_back("domain '" + p.domain + "' has only long documents; target unreachable");
                } catch (const ValidationError &) {
                    ds.warnings.push_back("domain '" + p.domain + "' has no long documents; target unreachable");
                }
            }
        }
        if (spec.strategy == Strategy::per_source_upsample && plans.size() > 1) {
            // The largest domain is sampled last, at an allocation scaled by
            // how far the others landed from theirs.
            std::size_t anchor = 0;
            for (std::size_t i = 1; i < plans.size(); ++i)
                if (plans[i].allocation > plans[anchor].allocation)
                    anchor = i;
            detail::parallel_for(plans.size(), opts.threads, [&](std::size_t i) {
                if (i != anchor)
                    detail::sample_domain(plans[i], spec);
            });
            std::uint64_t planned = 0, realized = 0;
            for (std::size_t i = 0; i < plans.size(); ++i) {
                if (i == anchor || plans[i].docs.empty())
                    continue;
                planned += plans[i].allocation;
                for (const auto &d : plans[i].draws)
                    realized += d.length;
            }
            if (planned > 0 && realized > 0)
                plans[anchor].allocation = static_cast<std::uint64_t>(std::llround(
                    static_cast<double>(plans[anchor].allocation) * static_cast<double>(realized) /
                    static_cast<double>(planned)));
            detail::sample_domain(plans[anchor], spec);
        } else {
            detail::parallel_for(plans.size(), opts.threads,
                                 [&](std::size_t i) { detail::sample_domain(plans[i], spec); });
        }
        ds.draws = detail::interleave(plans);
        if (ds.draws.empty()) {
            // budget below half a document everywhere: fall back to one draw
            auto largest = std::max_element(plans.begin(), plans.end(), [](const auto &a, const auto &b) {
                return a.docs.empty() < b.docs.empty() || (a.docs.empty() == b.docs.empty() && a.allocation < b.allocation);
            });
            if (largest != plans.end() && !largest->docs.empty()) {
                Rng rng(derive_seed(spec.seed, largest->domain));
                ds.draws.push_back(detail::make_draw(*largest->docs[uniform_index(rng, largest->docs.size())], threshold));
            }
        }
    }
    if (ds.draws.size() == 1 && ds.draws.front().length > spec.token_budget)
        ds.warnings.push_back("token budget smaller than one document; single draw overshoots the budget");

    std::map<std::string, std::uint32_t> seen;
    for (auto &d : ds.draws) {
        d.repeat = seen[d.id]++;
        auto &t = ds.tallies[d.domain];
        ++t.draws;
        t.tokens += d.length;
        if (d.is_long) {
            ++t.long_draws;
            t.long_tokens += d.length;
        }
        ds.total_tokens += d.length;
    }
    return ds;
}

struct AuditTolerances {
    double share_tol = 0.01;
    double long_tol = 0.02;
};

struct AuditRow {
    std::string domain;
    double target_share = 0.0;
    double realized_share = 0.0;
    double share_deviation = 0.0;
    std::optional<double> target_long;
    std::optional<double> realized_long_token_fraction;
    std::optional<double> realized_long_doc_fraction;
    std::optional<double> long_deviation;
    bool flagged = false; // target unreachable
    bool pass = true;
};

struct MixtureAudit {
    std::vector<AuditRow> rows;
    AuditRow overall;
    AuditTolerances tolerances;
    bool pass = true;
};

inline MixtureAudit verify_mixture(const SampledDataset &ds, AuditTolerances tol = {}) {
    MixtureAudit audit;
    audit.tolerances = tol;
    const auto &spec = ds.spec;
    const bool per_domain_long = spec.strategy == Strategy::per_source_upsample;
    const bool pooled_long = spec.strategy == Strategy::global_upsample;

    auto fill_long = [&](AuditRow &r, const DomainTallies &t) {
        if (t.tokens > 0)
            r.realized_long_token_fraction = static_cast<double>(t.long_tokens) / static_cast<double>(t.tokens);
        if (t.draws > 0)
            r.realized_long_doc_fraction = static_cast<double>(t.long_draws) / static_cast<double>(t.draws);
    };
    auto realized_long = [&](const AuditRow &r) {
        return spec.long_mass == LongMass::tokens ? r.realized_long_token_fraction : r.realized_long_doc_fraction;
    };

    std::map<std::string, bool> names;
    for (const auto &[d, s] : ds.target_shares)
        names[d] = true;
    for (const auto &[d, t] : ds.tallies)
        names[d] = true;

    DomainTallies all;
    for (const auto &[d, _] : names) {
        AuditRow r;
        r.domain = d;
        auto ts = ds.target_shares.find(d);
        r.target_share = ts == ds.target_shares.end() ? 0.0 : ts->second;
        DomainTallies t;
        if (auto it = ds.tallies.find(d); it != ds.tallies.end())
            t = it->second;
        all.draws += t.draws;
        all.tokens += t.tokens;
        all.long_draws += t.long_draws;
        all.long_tokens += t.long_tokens;
        r.realized_share = ds.total_tokens ? static_cast<double>(t.tokens) / static_cast<double>(ds.total_tokens) : 0.0;
        r.share_deviation = std::abs(r.realized_share - r.target_share);
        fill_long(r, t);
        if (per_domain_long && r.target_share > 0.0) {
            auto w = ds.weights.find(d);
            r.flagged = w == ds.weights.end() || w->second.unreachable;
            r.target_long = spec.target_long_fraction;
            if (auto v = realized_long(r))
                r.long_deviation = std::abs(*v - spec.target_long_fraction);
        }
        r.pass = r.share_deviation <= tol.share_tol;
        if (r.long_deviation && !r.flagged)
            r.pass = r.pass && *r.long_deviation <= tol.long_tol;
        audit.pass = audit.pass && r.pass;
        audit.rows.push_back(std::move(r));
    }

    auto &o = audit.overall;
    o.domain = "ALL";
    o.target_share = 1.0;
    o.realized_share = 1.0;
    fill_long(o, all);
    if (pooled_long) {
        o.target_long = spec.target_long_fraction;
        auto w = ds.weights.find("*");
        o.flagged = w == ds.weights.end() || w->second.unreachable;
        if (auto v = realized_long(o))
            o.long_deviation = std::abs(*v - spec.target_long_fraction);
        if (o.long_deviation && !o.flagged)
            o.pass = *o.long_deviation <= tol.long_tol;
        audit.pass = audit.pass && o.pass;
    }
    return audit;
}

inline std::string audit_table(const MixtureAudit &a) {
    std::string out = "domain\ttarget_share\trealized_share\tshare_dev\ttarget_long\trealized_long_token_fraction\t"
                      "realized_long_doc_fraction\tlong_dev\tflag\tpass\n";
    auto row = [&](const AuditRow &r) {
        out += r.domain + "\t" + detail::fmt_fraction(r.target_share) + "\t" + detail::fmt_fraction(r.realized_share) +
               "\t" + detail::fmt_fraction(r.share_deviation) + "\t" + detail::fmt_fraction(r.target_long) + "\t" +
               detail::fmt_fraction(r.realized_long_token_fraction) + "\t" +
               detail::fmt_fraction(r.realized_long_doc_fraction) + "\t" + detail::fmt_fraction(r.long_deviation) +
               "\t" + (r.flagged ? "unreachable" : "-") + "\t" + (r.pass ? "pass" : "FAIL") + "\n";
    };
    for (const auto &r : a.rows)
        row(r);
    row(a.overall);
    return out;
}

} // namespace forge
