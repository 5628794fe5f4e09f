#pragma once

// Run configuration: one JSON document that names the datasets, the
// protocol, the metric surface and where predictions come from. Parsing is
// strict; an unknown key anywhere fails with its full path so typos cannot
// silently change a benchmark.

#include <fbench/core.hpp>
#include <fbench/error.hpp>
#include <fbench/ingest.hpp>
#include <fbench/protocols.hpp>
#include <fbench/runner.hpp>
#include <fbench/subprocess.hpp>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

namespace fbench {

struct SplitLayout {
    Split split = Split::Test;
    LayoutSpec layout;
};

struct DatasetDecl {
    std::string name;
    Domain domain = Domain::Document;
    std::filesystem::path root;
    std::filesystem::path manifest;   // where the dataset's manifest lives
    std::vector<SplitLayout> splits;  // empty when the manifest pre-exists
};

struct ExecSpec {
    std::string command;
    int batch = 8;
    double timeout = 30.0;
};

// Exactly one of `files` (group name -> predictions JSONL) or `exec`.
struct PredictionsDecl {
    std::map<std::string, std::filesystem::path> files;
    std::optional<ExecSpec> exec;
};

struct RunConfig {
    std::string run_name = "run";
    std::vector<DatasetDecl> datasets;
    std::string protocol_name;                   // builtin, or:
    std::optional<ProtocolSpec> protocol_inline;
    std::string metric = "F1";
    double threshold = kDefaultThreshold;
    EvalMode mode = EvalMode::Image;
    PixelAveraging averaging = PixelAveraging::PerImageMean;
    std::optional<PredictionsDecl> predictions;
    std::uint64_t seed = 0;
    std::optional<int> workers;
    std::filesystem::path out = "out";
    std::string text;  // the raw document, for fingerprinting
};

namespace detail {

[[noreturn]] inline void config_fail(const std::string& path,
                                     const std::string& why) {
    throw BenchError("ConfigParse", path + ": " + why);
}

inline void expect_object(const ordered_json& j, const std::string& path) {
    if (!j.is_object()) config_fail(path, "expected an object");
}

inline void check_keys(const ordered_json& j, const std::set<std::string>& allowed,
                       const std::string& path) {
    expect_object(j, path);
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (!allowed.count(key))
            config_fail(path.empty() ? key : path + "." + key, "unknown key");
    }
}

inline const ordered_json& need(const ordered_json& j, const char* key,
                                const std::string& path) {
    if (!j.contains(key)) config_fail(path, std::string("missing key '") + key + "'");
    return j.at(key);
}

inline std::string need_str(const ordered_json& j, const char* key,
                            const std::string& path) {
    const auto& v = need(j, key, path);
    if (!v.is_string()) config_fail(path + "." + key, "expected a string");
    return v.get<std::string>();
}

inline std::string opt_str(const ordered_json& j, const char* key,
                           const std::string& path, const std::string& fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_string()) config_fail(path + "." + key, "expected a string");
    return j.at(key).get<std::string>();
}

inline double need_num(const ordered_json& j, const char* key,
                       const std::string& path) {
    const auto& v = need(j, key, path);
    if (!v.is_number()) config_fail(path + "." + key, "expected a number");
    return v.get<double>();
}

inline LayoutSpec parse_layout(const ordered_json& j, const std::string& path) {
    check_keys(j, {"kind", "real_dir", "fake_dir", "index_file", "mask_dir",
                   "mask_suffix"},
               path);
    LayoutSpec layout;
    const std::string kind = need_str(j, "kind", path);
    if (kind == "paired_dirs")
        layout.kind = LayoutKind::PairedDirs;
    else if (kind == "flat_index")
        layout.kind = LayoutKind::FlatWithIndex;
    else
        config_fail(path + ".kind", "unknown layout kind '" + kind + "'");
    if (j.contains("real_dir")) layout.real_dir = need_str(j, "real_dir", path);
    if (j.contains("fake_dir")) layout.fake_dir = need_str(j, "fake_dir", path);
    if (j.contains("index_file"))
        layout.index_file = need_str(j, "index_file", path);
    if (j.contains("mask_dir")) layout.mask_dir = need_str(j, "mask_dir", path);
    layout.mask_suffix = opt_str(j, "mask_suffix", path, layout.mask_suffix);
    return layout;
}

inline DatasetRef parse_ref(const ordered_json& j, const std::string& path) {
    check_keys(j, {"dataset", "split"}, path);
    DatasetRef ref;
    ref.dataset = need_str(j, "dataset", path);
    try {
        ref.split = split_from_string(need_str(j, "split", path));
    } catch (const BenchError& e) {
        config_fail(path + ".split", e.message());
    }
    return ref;
}

inline ProtocolSpec parse_protocol_inline(const ordered_json& j,
                                          const std::string& path) {
    check_keys(j, {"name", "train", "groups", "aggregates"}, path);
    ProtocolSpec spec;
    spec.name = need_str(j, "name", path);
    if (j.contains("train")) {
        const auto& train = j.at("train");
        if (!train.is_array()) config_fail(path + ".train", "expected an array");
        for (std::size_t i = 0; i < train.size(); ++i)
            spec.train_refs.push_back(parse_ref(
                train[i], path + ".train[" + std::to_string(i) + "]"));
    }
    const auto& groups = need(j, "groups", path);
    if (!groups.is_array()) config_fail(path + ".groups", "expected an array");
    for (std::size_t i = 0; i < groups.size(); ++i) {
        const std::string gpath = path + ".groups[" + std::to_string(i) + "]";
        check_keys(groups[i], {"name", "refs"}, gpath);
        EvalGroup group;
        group.name = need_str(groups[i], "name", gpath);
        const auto& refs = need(groups[i], "refs", gpath);
        if (!refs.is_array()) config_fail(gpath + ".refs", "expected an array");
        for (std::size_t k = 0; k < refs.size(); ++k)
            group.refs.push_back(
                parse_ref(refs[k], gpath + ".refs[" + std::to_string(k) + "]"));
        spec.eval_groups.push_back(std::move(group));
    }
    if (j.contains("aggregates")) {
        const auto& aggs = j.at("aggregates");
        if (!aggs.is_array())
            config_fail(path + ".aggregates", "expected an array");
        for (std::size_t i = 0; i < aggs.size(); ++i) {
            const std::string apath =
                path + ".aggregates[" + std::to_string(i) + "]";
            check_keys(aggs[i], {"column", "groups"}, apath);
            Aggregate agg;
            agg.column = need_str(aggs[i], "column", apath);
            const auto& members = need(aggs[i], "groups", apath);
            if (!members.is_array())
                config_fail(apath + ".groups", "expected an array");
            for (const auto& m : members) {
                if (!m.is_string())
                    config_fail(apath + ".groups", "expected strings");
                agg.groups.push_back(m.get<std::string>());
            }
            spec.aggregates.push_back(std::move(agg));
        }
    }
    return spec;
}

inline DatasetDecl parse_dataset(const ordered_json& j, const std::string& path) {
    check_keys(j, {"name", "domain", "root", "manifest", "splits"}, path);
    DatasetDecl decl;
    decl.name = need_str(j, "name", path);
    try {
        decl.domain = domain_from_string(need_str(j, "domain", path));
    } catch (const BenchError& e) {
        config_fail(path + ".domain", e.message());
    }
    decl.root = need_str(j, "root", path);
    decl.manifest = need_str(j, "manifest", path);
    if (j.contains("splits")) {
        const auto& splits = j.at("splits");
        if (!splits.is_array()) config_fail(path + ".splits", "expected an array");
        for (std::size_t i = 0; i < splits.size(); ++i) {
            const std::string spath = path + ".splits[" + std::to_string(i) + "]";
            check_keys(splits[i], {"split", "layout"}, spath);
            SplitLayout sl;
            try {
                sl.split = split_from_string(need_str(splits[i], "split", spath));
            } catch (const BenchError& e) {
                config_fail(spath + ".split", e.message());
            }
            sl.layout = parse_layout(need(splits[i], "layout", spath),
                                     spath + ".layout");
            decl.splits.push_back(std::move(sl));
        }
    }
    return decl;
}

inline PredictionsDecl parse_predictions_decl(const ordered_json& j,
                                              const std::string& path) {
    check_keys(j, {"files", "exec"}, path);
    PredictionsDecl decl;
    const bool has_files = j.contains("files");
    const bool has_exec = j.contains("exec");
    if (has_files == has_exec)
        config_fail(path, "needs exactly one of 'files' or 'exec'");
    if (has_files) {
        const auto& files = j.at("files");
        expect_object(files, path + ".files");
        for (const auto& [group, file] : files.items()) {
            if (!file.is_string())
                config_fail(path + ".files." + group, "expected a string");
            decl.files.emplace(group, file.get<std::string>());
        }
    } else {
        const auto& exec = j.at("exec");
        const std::string epath = path + ".exec";
        check_keys(exec, {"command", "batch", "timeout"}, epath);
        ExecSpec spec;
        spec.command = need_str(exec, "command", epath);
        if (exec.contains("batch")) {
            if (!exec.at("batch").is_number_integer() ||
                exec.at("batch").get<long long>() < 1)
                config_fail(epath + ".batch", "expected a positive integer");
            spec.batch = exec.at("batch").get<int>();
        }
        if (exec.contains("timeout")) {
            const double t = need_num(exec, "timeout", epath);
            if (t <= 0) config_fail(epath + ".timeout", "must be positive");
            spec.timeout = t;
        }
        decl.exec = std::move(spec);
    }
    return decl;
}

}  // namespace detail

inline RunConfig parse_run_config(const std::string& text) {
    ordered_json j = ordered_json::parse(text, nullptr, false);
    if (j.is_discarded()) throw BenchError("ConfigParse", "not valid JSON");
    detail::check_keys(j,
                       {"run_name", "datasets", "protocol", "metric", "threshold",
                        "mode", "averaging", "predictions", "seed", "workers",
                        "out"},
                       "");
    RunConfig config;
    config.text = text;
    config.run_name = detail::opt_str(j, "run_name", "", config.run_name);

    const auto& datasets = detail::need(j, "datasets", "");
    if (!datasets.is_array() || datasets.empty())
        detail::config_fail("datasets", "expected a non-empty array");
    std::set<std::string> names;
    for (std::size_t i = 0; i < datasets.size(); ++i) {
        auto decl = detail::parse_dataset(
            datasets[i], "datasets[" + std::to_string(i) + "]");
        if (!names.insert(decl.name).second)
            throw BenchError("DuplicateDataset",
                             "dataset '" + decl.name + "' declared twice");
        config.datasets.push_back(std::move(decl));
    }

    const auto& protocol = detail::need(j, "protocol", "");
    if (protocol.is_string())
        config.protocol_name = protocol.get<std::string>();
    else if (protocol.is_object())
        config.protocol_inline = detail::parse_protocol_inline(protocol, "protocol");
    else
        detail::config_fail("protocol", "expected a name or an object");

    config.metric = detail::opt_str(j, "metric", "", config.metric);
    if (j.contains("threshold")) {
        config.threshold = detail::need_num(j, "threshold", "");
        if (config.threshold < 0.0 || config.threshold > 1.0)
            detail::config_fail("threshold", "must lie in [0, 1]");
    }
    if (j.contains("mode")) {
        try {
            config.mode = eval_mode_from_string(detail::need_str(j, "mode", ""));
        } catch (const BenchError& e) {
            detail::config_fail("mode", e.message());
        }
    }
    if (j.contains("averaging")) {
        try {
            config.averaging =
                averaging_from_string(detail::need_str(j, "averaging", ""));
        } catch (const BenchError& e) {
            detail::config_fail("averaging", e.message());
        }
    }
    if (j.contains("predictions"))
        config.predictions =
            detail::parse_predictions_decl(j.at("predictions"), "predictions");
    if (j.contains("seed")) {
        if (!j.at("seed").is_number_unsigned())
            detail::config_fail("seed", "expected a non-negative integer");
        config.seed = j.at("seed").get<std::uint64_t>();
    }
    if (j.contains("workers")) {
        if (!j.at("workers").is_number_integer() ||
            j.at("workers").get<long long>() < 1)
            detail::config_fail("workers", "expected a positive integer");
        config.workers = j.at("workers").get<int>();
    }
    config.out = detail::opt_str(j, "out", "", config.out.string());
    return config;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw BenchError("IoFailure", "cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_run_config(buf.str());
}

// The protocol the config names, builtin or inline.
inline ProtocolSpec protocol_of(const RunConfig& config) {
    if (config.protocol_inline) {
        ProtocolSpec spec = *config.protocol_inline;
        check_protocol(spec);
        return spec;
    }
    return builtin_protocol(config.protocol_name);
}

// Worker-count precedence: command-line flag, then config, then the
// FORENSIC_BENCH_WORKERS environment variable, then the CPU count.
inline int resolve_workers(std::optional<int> flag, const RunConfig& config) {
    if (flag) {
        if (*flag < 1) throw BenchError("BadWorkers", "workers must be positive");
        return *flag;
    }
    if (config.workers) return *config.workers;
    if (const char* env = std::getenv("FORENSIC_BENCH_WORKERS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || v < 1)
            throw BenchError("BadWorkers",
                             std::string("FORENSIC_BENCH_WORKERS is not a "
                                         "positive integer: '") +
                                 env + "'");
        return static_cast<int>(v);
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

}  // namespace fbench
