#pragma once

// The three built-in evaluation protocols as declarative plans, plus the
// fusion-training epoch sampler. Nothing here touches pixels; protocols name
// datasets and groups, and the runner binds them to manifests.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fbench/core.hpp"
#include "fbench/image.hpp"
#include "fbench/rng.hpp"

namespace fbench {

struct DatasetRef {
    std::string dataset;
    Split split = Split::Test;
    bool operator==(const DatasetRef&) const = default;
};

struct EvalGroup {
    std::string name;
    std::vector<DatasetRef> refs;
};

struct Aggregate {
    std::string column;
    std::vector<std::string> groups;  // group names to average, unweighted
};

struct ProtocolSpec {
    std::string name;
    std::vector<DatasetRef> train_refs;
    std::vector<EvalGroup> eval_groups;
    std::vector<Aggregate> aggregates;
};

inline void check_protocol(const ProtocolSpec& spec) {
    std::set<std::string> names;
    for (const auto& g : spec.eval_groups)
        if (!names.insert(g.name).second)
            throw BenchError("DuplicateGroup",
                             "group '" + g.name + "' defined twice in protocol '" +
                                 spec.name + "'");
    for (const auto& agg : spec.aggregates)
        for (const auto& g : agg.groups)
            if (!names.count(g))
                throw BenchError("UnknownGroup", "aggregate '" + agg.column +
                                                     "' references missing group '" +
                                                     g + "'");
}

inline ProtocolSpec builtin_protocol(const std::string& name) {
    ProtocolSpec spec;
    spec.name = name;
    const auto single = [](std::string group, std::string dataset) {
        return EvalGroup{std::move(group), {{std::move(dataset), Split::Test}}};
    };
    if (name == "aigc") {
        // Train within one diffusion corpus, test across generator families.
        spec.train_refs = {{"DiffusionForensics", Split::Train}};
        spec.eval_groups = {
            single("DiffusionForensics", "DiffusionForensics"),
            single("ADM", "GenImage-ADM"),
            single("BigGAN", "GenImage-BigGAN"),
            single("Midjourney", "GenImage-Midjourney"),
            single("VQDM", "GenImage-VQDM"),
            single("GLIDE", "GenImage-GLIDE"),
            single("SD V1.4", "GenImage-SDV1.4"),
            single("SD V1.5", "GenImage-SDV1.5"),
            single("Wukong", "GenImage-Wukong"),
        };
        spec.aggregates = {{"Average_C",
                            {"ADM", "BigGAN", "Midjourney", "VQDM", "GLIDE",
                             "SD V1.4", "SD V1.5", "Wukong"}}};
    } else if (name == "doc") {
        spec.train_refs = {{"DocTamper", Split::Train}};
        spec.eval_groups = {
            single("DocTamperFCD", "DocTamperFCD"),
            single("DocTamperSCD", "DocTamperSCD"),
            single("DocTamperTest", "DocTamperTest"),
            single("T-SROIE", "T-SROIE"),
            single("OSTF", "OSTF"),
            single("TPIC-13", "TPIC-13"),
            single("RTM", "RTM"),
        };
        spec.aggregates = {
            {"Average_W", {"DocTamperFCD", "DocTamperSCD", "DocTamperTest"}},
            {"Average_C", {"T-SROIE", "OSTF", "TPIC-13", "RTM"}},
            {"Average_All",
             {"DocTamperFCD", "DocTamperSCD", "DocTamperTest", "T-SROIE", "OSTF",
              "TPIC-13", "RTM"}},
        };
    } else if (name == "iff") {
        // One training pool per domain; the document pool is a union.
        spec.train_refs = {
            {"FaceForensics++", Split::Train}, {"CASIAv2", Split::Train},
            {"GenImage", Split::Train},        {"OSTF", Split::Train},
            {"RealTextManipulation", Split::Train},
            {"T-SROIE", Split::Train},         {"Tampered-IC13", Split::Train},
        };
        spec.eval_groups = {
            single("FF-c40", "FF-c40"),
            single("CDFv2", "CDFv2"),
            single("DFD", "DFD"),
            single("Columbia", "Columbia"),
            single("IMD2020", "IMD2020"),
            single("Autosplice", "Autosplice"),
            single("DF", "DiffusionForensics"),
            single("GenImage", "GenImage"),
            single("T-SROIE", "T-SROIE"),
            single("OSTF", "OSTF"),
            single("RTM", "RealTextManipulation"),
        };
        spec.aggregates = {{"Average",
                            {"FF-c40", "CDFv2", "DFD", "Columbia", "IMD2020",
                             "Autosplice", "DF", "GenImage", "T-SROIE", "OSTF",
                             "RTM"}}};
    } else {
        throw BenchError("UnknownProtocol", "no builtin protocol '" + name + "'");
    }
    check_protocol(spec);
    return spec;
}

// ---------------------------------------------------------------------------
// Fusion-training epoch sampler
// ---------------------------------------------------------------------------

struct EpochPlan {
    std::uint64_t seed = 0;
    std::uint64_t epoch = 0;
    std::uint64_t epoch_size = 0;
    std::map<Domain, std::vector<std::string>> draws;
};

namespace detail {

inline std::uint64_t domain_stream(Domain d) {
    return static_cast<std::uint64_t>(d) + 1;
}

}  // namespace detail

// Equal-count per-domain draw: without replacement via a partial
// Fisher-Yates shuffle, with replacement only when the pool is undersized.
// The draw depends only on (seed, epoch, domain, pool order).
inline EpochPlan iff_epoch_plan(
    const std::map<Domain, std::vector<std::string>>& pools,
    std::optional<std::uint64_t> epoch_size, std::uint64_t seed,
    std::uint64_t epoch) {
    if (pools.empty())
        throw BenchError("EmptyPool", "no domain pools supplied");
    for (const auto& [domain, ids] : pools)
        if (ids.empty())
            throw BenchError("EmptyPool", "empty pool for domain " +
                                              std::string(to_string(domain)));

    EpochPlan plan;
    plan.seed = seed;
    plan.epoch = epoch;
    if (epoch_size) {
        if (*epoch_size == 0)
            throw BenchError("EmptyPool", "epoch_size must be positive");
        plan.epoch_size = *epoch_size;
    } else {
        std::uint64_t smallest = UINT64_MAX;
        for (const auto& [domain, ids] : pools)
            smallest = std::min(smallest, static_cast<std::uint64_t>(ids.size()));
        plan.epoch_size = smallest;
    }

    for (const auto& [domain, ids] : pools) {
        CounterRng rng(seed, epoch, detail::domain_stream(domain));
        std::vector<std::string> draw;
        draw.reserve(plan.epoch_size);
        const std::uint64_t n = ids.size();
        if (n >= plan.epoch_size) {
            std::vector<std::uint32_t> idx(ids.size());
            for (std::uint32_t i = 0; i < idx.size(); ++i) idx[i] = i;
            for (std::uint64_t i = 0; i < plan.epoch_size; ++i) {
                const std::uint64_t j = i + rng.bounded(n - i);
                std::swap(idx[i], idx[j]);
                draw.push_back(ids[idx[i]]);
            }
        } else {
            for (std::uint64_t i = 0; i < plan.epoch_size; ++i)
                draw.push_back(ids[rng.bounded(n)]);
        }
        plan.draws.emplace(domain, std::move(draw));
    }
    return plan;
}

inline std::string serialize_epoch_plan(const EpochPlan& plan) {
    std::string out;
    ordered_json header;
    header["seed"] = plan.seed;
    header["epoch"] = plan.epoch;
    header["epoch_size"] = plan.epoch_size;
    out += header.dump();
    out += '\n';
    for (const auto& [domain, ids] : plan.draws)
        for (const auto& id : ids) {
            ordered_json line;
            line["domain"] = std::string(to_string(domain));
            line["id"] = id;
            out += line.dump();
            out += '\n';
        }
    return out;
}

inline EpochPlan parse_epoch_plan(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    if (!std::getline(in, line))
        throw BenchError("PlanParse", "empty epoch plan");
    ordered_json header = ordered_json::parse(line, nullptr, false);
    if (header.is_discarded() || !header.is_object())
        throw BenchError("PlanParse", "plan header is not a JSON object");
    EpochPlan plan;
    plan.seed = header.at("seed").get<std::uint64_t>();
    plan.epoch = header.at("epoch").get<std::uint64_t>();
    plan.epoch_size = header.at("epoch_size").get<std::uint64_t>();
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        ordered_json j = ordered_json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw BenchError("PlanParse",
                             "line " + std::to_string(line_no) + " is not valid JSON");
        plan.draws[domain_from_string(j.at("domain").get<std::string>())].push_back(
            j.at("id").get<std::string>());
    }
    for (const auto& [domain, ids] : plan.draws) {
        (void)domain;
        if (ids.size() != plan.epoch_size)
            throw BenchError("PlanParse", "draw count does not match epoch_size");
    }
    return plan;
}

// Image-level score of a localization model: max pooling over the map.
inline double mask_to_label(const ScoreMap& mask_scores) {
    if (mask_scores.values.empty())
        throw BenchError("EmptyMask", "cannot pool an empty score map");
    double best = 0.0;
    for (double v : mask_scores.values) best = std::max(best, v);
    return best;
}

// ---------------------------------------------------------------------------
// Binding a protocol to concrete manifests
// ---------------------------------------------------------------------------

struct ResolvedGroup {
    std::string name;
    std::vector<SampleRecord> records;
};

struct ResolvedProtocol {
    std::string name;
    std::vector<SampleRecord> train;
    std::vector<ResolvedGroup> groups;
    std::vector<Aggregate> aggregates;
};

namespace detail {

inline std::vector<SampleRecord> records_for_ref(
    const DatasetRef& ref, const std::map<std::string, DatasetManifest>& manifests) {
    const auto it = manifests.find(ref.dataset);
    if (it == manifests.end())
        throw BenchError("MissingDataset", ref.dataset);
    std::vector<SampleRecord> out;
    for (const auto& r : it->second.records)
        if (r.split == ref.split) out.push_back(r);
    if (out.empty())
        throw BenchError("MissingSplit", ref.dataset + " has no '" +
                                             std::string(to_string(ref.split)) +
                                             "' records");
    return out;
}

}  // namespace detail

inline ResolvedProtocol resolve_protocol(
    const ProtocolSpec& spec, const std::map<std::string, DatasetManifest>& manifests) {
    check_protocol(spec);
    ResolvedProtocol out;
    out.name = spec.name;
    out.aggregates = spec.aggregates;
    for (const auto& ref : spec.train_refs) {
        auto recs = detail::records_for_ref(ref, manifests);
        out.train.insert(out.train.end(), recs.begin(), recs.end());
    }
    for (const auto& g : spec.eval_groups) {
        ResolvedGroup rg;
        rg.name = g.name;
        for (const auto& ref : g.refs) {
            auto recs = detail::records_for_ref(ref, manifests);
            rg.records.insert(rg.records.end(), recs.begin(), recs.end());
        }
        out.groups.push_back(std::move(rg));
    }
    return out;
}

// Per-domain id pools from resolved training records, in record order.
inline std::map<Domain, std::vector<std::string>> training_pools(
    const ResolvedProtocol& resolved) {
    std::map<Domain, std::vector<std::string>> pools;
    for (const auto& r : resolved.train) pools[r.domain].push_back(r.id);
    return pools;
}

}  // namespace fbench
