#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "forge/error.hpp"

namespace forge {

// 4M read as 2^22 tokens; pass 4'000'000 for the decimal reading.
inline constexpr std::uint64_t kDefaultBatchTokens = 4'194'304;

struct HardwareProfile {
    std::string name;
    std::string model;
    std::uint64_t context = 0;
    unsigned gpus = 0;
    double days_per_10b = 0.0;
};

// Measured 8x / 16x 80G A100 throughput for LLaMA-2 continual pretraining.
inline std::vector<HardwareProfile> builtin_profiles() {
    return {
        {"7b-4k-8xA100", "LLaMA-2 7B", 4096, 8, 3.0},
        {"7b-80k-8xA100", "LLaMA-2 7B", 81920, 8, 10.0},
        {"13b-4k-8xA100", "LLaMA-2 13B", 4096, 8, 5.0},
        {"13b-64k-8xA100", "LLaMA-2 13B", 65536, 8, 13.0},
        {"7b-4k-16xA100", "LLaMA-2 7B", 4096, 16, 2.0},
        {"7b-80k-16xA100", "LLaMA-2 7B", 81920, 16, 7.0},
        {"13b-4k-16xA100", "LLaMA-2 13B", 4096, 16, 4.0},
        {"13b-64k-16xA100", "LLaMA-2 13B", 65536, 16, 10.0},
    };
}

class ProfileTable {
public:
    ProfileTable() {
        for (auto &p : builtin_profiles())
            add(std::move(p));
    }

    void add(HardwareProfile p) {
        if (p.name.empty())
            throw ValidationError("hardware profile needs a name");
        if (!(p.days_per_10b >= 0.0))
            throw ValidationError("profile '" + p.name + "': days_per_10b must be non-negative");
        profiles_[p.name] = std::move(p);
    }

    // [{"name", "model", "context", "gpus", "days_per_10b"}, ...]
    void add_json(const nlohmann::json &j) {
        try {
            for (const auto &e : j)
                add({e.at("name").get<std::string>(), e.value("model", ""), e.value("context", std::uint64_t{0}),
                     e.value("gpus", 0u), e.at("days_per_10b").get<double>()});
        } catch (const nlohmann::json::exception &e) {
            throw ValidationError(std::string("profile table: ") + e.what());
        }
    }

    const HardwareProfile &at(const std::string &name) const {
        auto it = profiles_.find(name);
        if (it == profiles_.end())
            throw ValidationError("unknown hardware profile '" + name + "'");
        return it->second;
    }

    const std::map<std::string, HardwareProfile> &all() const noexcept { return profiles_; }

private:
    std::map<std::string, HardwareProfile> profiles_;
};

struct TrainingPlan {
    std::uint64_t token_budget = 0;
    std::uint64_t batch_tokens = 0;
    std::uint64_t steps = 0;
    HardwareProfile profile;
    double estimated_days = 0.0;
};

inline TrainingPlan training_plan(std::uint64_t token_budget, std::uint64_t batch_tokens,
                                  const HardwareProfile &profile) {
    if (batch_tokens == 0)
        throw ValidationError("batch_tokens must be positive");
    TrainingPlan p;
    p.token_budget = token_budget;
    p.batch_tokens = batch_tokens;
    p.steps = token_budget / batch_tokens;
    p.profile = profile;
    p.estimated_days = static_cast<double>(token_budget) / 1e10 * profile.days_per_10b;
    return p;
}

} // namespace forge
