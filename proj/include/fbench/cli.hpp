#pragma once

// Command-line front end. Subcommands mirror the benchmark workflow:
//
//   ingest    scan declared dataset trees, write + validate manifests
//   slice     cut large images into fixed tiles with aligned masks
//   plan      write deterministic per-epoch sampling plans
//   eval      score predictions against a protocol, write run results
//   report    turn run results into CSV and Markdown tables
//   extract   run a feature extractor over one image
//   run       ingest + eval + report in one go
//
// Exit codes: 0 success, 2 configuration or input problems, 3 evaluation
// failures (bad predictions, broken model child).

#include <fbench/config.hpp>
#include <fbench/core.hpp>
#include <fbench/error.hpp>
#include <fbench/image.hpp>
#include <fbench/ingest.hpp>
#include <fbench/metrics.hpp>
#include <fbench/preprocess.hpp>
#include <fbench/protocols.hpp>
#include <fbench/report.hpp>
#include <fbench/runner.hpp>
#include <fbench/subprocess.hpp>

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fbench {

namespace cli_detail {

namespace fs = std::filesystem;

// Loads every declared manifest, keyed by dataset name, with image and mask
// paths rebased onto the dataset root so later stages need no per-dataset
// context.
inline std::map<std::string, DatasetManifest> load_declared_manifests(
    const RunConfig& config) {
    std::map<std::string, DatasetManifest> out;
    for (const auto& decl : config.datasets) {
        DatasetManifest m = load_manifest(decl.manifest);
        if (m.name != decl.name)
            throw BenchError("ManifestMismatch",
                             decl.manifest.string() + " holds dataset '" + m.name +
                                 "', expected '" + decl.name + "'");
        for (auto& r : m.records) {
            r.image = (decl.root / r.image).generic_string();
            if (r.mask) r.mask = (decl.root / *r.mask).generic_string();
        }
        out.emplace(decl.name, std::move(m));
    }
    return out;
}

inline void ensure_parent_dir(const fs::path& path) {
    const fs::path parent = path.parent_path();
    if (!parent.empty()) fs::create_directories(parent);
}

inline void write_map_text(const ScoreMap& m, const fs::path& path) {
    std::string text =
        std::to_string(m.width) + " " + std::to_string(m.height) + "\n";
    for (int y = 0; y < m.height; ++y) {
        for (int x = 0; x < m.width; ++x) {
            if (x > 0) text += " ";
            text += detail::format_full(m.at(x, y));
        }
        text += "\n";
    }
    ensure_parent_dir(path);
    save_text(path, text);
}

inline bool selected(const std::vector<std::string>& only, const std::string& name) {
    return only.empty() || std::find(only.begin(), only.end(), name) != only.end();
}

inline int cmd_ingest(const RunConfig& config, const std::vector<std::string>& only) {
    int rc = 0;
    for (const auto& decl : config.datasets) {
        if (!selected(only, decl.name)) continue;
        if (decl.splits.empty()) {
            std::cout << decl.name << ": no layout declared, skipped\n";
            continue;
        }
        std::vector<SampleRecord> records;
        for (const auto& sl : decl.splits) {
            auto part = ingest_dataset(decl.root, sl.layout, decl.name,
                                       decl.domain, sl.split);
            records.insert(records.end(),
                           std::make_move_iterator(part.records.begin()),
                           std::make_move_iterator(part.records.end()));
        }
        const auto manifest = make_manifest(decl.name, decl.domain, std::move(records));
        ensure_parent_dir(decl.manifest);
        save_manifest(manifest, decl.manifest);
        const auto report = validate_manifest(manifest, decl.root);
        if (report.ok()) {
            std::cout << decl.name << ": ok (" << manifest.records.size()
                      << " records) -> " << decl.manifest.generic_string() << "\n";
        } else {
            rc = 2;
            for (const auto& issue : report.issues)
                std::cout << decl.name << ": " << issue.code << " " << issue.id
                          << ": " << issue.detail << "\n";
        }
    }
    return rc;
}

inline int cmd_slice(const RunConfig& config, const std::vector<std::string>& only,
                     int tile) {
    const fs::path tiles_root = config.out / "tiles";
    for (const auto& decl : config.datasets) {
        if (!selected(only, decl.name)) continue;
        const DatasetManifest manifest = load_manifest(decl.manifest);
        std::vector<SampleRecord> tile_records;
        for (const auto& rec : manifest.records) {
            const fs::path img_path = decl.root / rec.image;
            const std::string ext = img_path.extension().string();
            Image image;
            if (ext == ".pgm")
                image = load_pgm(img_path);
            else if (ext == ".ppm")
                image = load_ppm(img_path);
            else
                throw BenchError("UnsupportedImage",
                                 "cannot slice " + rec.image +
                                     ": only PGM/PPM inputs are readable");
            std::optional<Image> mask;
            if (rec.mask) mask = load_pgm(decl.root / *rec.mask);

            const TilePlan plan = tile_plan(image.width, image.height, tile);
            const auto tiles = slice_image_and_mask(
                image, mask ? &*mask : nullptr, plan, rec.label);
            for (const auto& t : tiles) {
                const std::string tid = tile_id(rec.id, t.x, t.y);
                const std::string img_ext = t.image.channels == 3 ? ".ppm" : ".pgm";
                const fs::path rel_img =
                    fs::path("tiles") / decl.name / (tid + img_ext);
                ensure_parent_dir(config.out / rel_img);
                if (t.image.channels == 3)
                    save_ppm(t.image, config.out / rel_img);
                else
                    save_pgm(t.image, config.out / rel_img);

                SampleRecord tr = rec;
                tr.id = tid;
                tr.image = rel_img.generic_string();
                tr.label = t.label;
                tr.mask.reset();
                if (t.mask) {
                    const fs::path rel_mask =
                        fs::path("tiles") / decl.name / (tid + "_mask.pgm");
                    save_pgm(*t.mask, config.out / rel_mask);
                    tr.mask = rel_mask.generic_string();
                }
                tr.orig_w = t.orig_w;
                tr.orig_h = t.orig_h;
                tile_records.push_back(std::move(tr));
            }
        }
        const auto tile_manifest =
            make_manifest(decl.name, decl.domain, std::move(tile_records));
        const fs::path out_path = tiles_root / (decl.name + ".jsonl");
        ensure_parent_dir(out_path);
        save_manifest(tile_manifest, out_path);
        std::cout << decl.name << ": " << tile_manifest.records.size()
                  << " tiles -> " << out_path.generic_string() << "\n";
    }
    return 0;
}

inline int cmd_plan(const RunConfig& config, std::uint64_t seed,
                    std::uint64_t epochs) {
    if (epochs == 0)
        throw BenchError("ConfigParse", "epochs must be a positive integer");
    const auto manifests = load_declared_manifests(config);
    const auto resolved = resolve_protocol(protocol_of(config), manifests);
    const auto pools = training_pools(resolved);
    fs::create_directories(config.out);
    for (std::uint64_t epoch = 0; epoch < epochs; ++epoch) {
        const auto plan = iff_epoch_plan(pools, std::nullopt, seed, epoch);
        const fs::path path =
            config.out / ("plan_epoch" + std::to_string(epoch) + ".jsonl");
        save_text(path, serialize_epoch_plan(plan));
        std::cout << "epoch " << epoch << ": " << plan.epoch_size
                  << " draws per domain -> " << path.generic_string() << "\n";
    }
    return 0;
}

inline PredictionSource prediction_source(const RunConfig& config) {
    const PredictionsDecl& decl = *config.predictions;
    if (decl.exec) {
        const ExecSpec spec = *decl.exec;
        return [spec](const ResolvedGroup& group) {
            DatasetManifest m = make_manifest(
                group.name,
                group.records.empty() ? Domain::Document : group.records[0].domain,
                group.records);
            ExecOptions options;
            options.batch = spec.batch;
            options.timeout = spec.timeout;
            return exec_model(spec.command, m, options);
        };
    }
    const auto files = decl.files;
    return [files](const ResolvedGroup& group) {
        const auto it = files.find(group.name);
        if (it == files.end())
            throw BenchError("MissingPrediction", "no predictions file declared");
        auto preds = parse_predictions(load_text(it->second));
        // score-map references live next to the predictions file
        const fs::path base = it->second.parent_path();
        for (auto& p : preds)
            if (p.mask_score_ref)
                p.mask_score_ref = (base / *p.mask_score_ref).generic_string();
        return preds;
    };
}

inline int cmd_eval(const RunConfig& config, std::optional<int> workers_flag,
                    bool write_timing) {
    const auto manifests = load_declared_manifests(config);
    const auto resolved = resolve_protocol(protocol_of(config), manifests);
    if (!config.predictions)
        throw BenchError("ConfigParse", "eval needs a 'predictions' section");
    EvalOptions options;
    options.mode = config.mode;
    options.threshold = config.threshold;
    options.averaging = config.averaging;
    options.workers = resolve_workers(workers_flag, config);
    fs::create_directories(config.out);

    const auto run = evaluate_run(resolved, prediction_source(config), options,
                                  fingerprint_of(config.text));
    const fs::path result_path = config.out / (config.run_name + ".result.json");
    save_run_result(result_path, run);
    // timing varies between runs, so it is opt-in to keep re-runs byte-identical
    if (write_timing)
        save_text(config.out / (config.run_name + ".timing.json"),
                  serialize_run_timing(run));
    for (const auto& g : run.groups) {
        std::cout << g.name << ":";
        for (const auto& [name, value] : g.metrics.values)
            std::cout << " " << name << "=" << detail::format_fixed(value, 4);
        std::cout << "\n";
    }
    std::cout << "wrote " << result_path.generic_string() << "\n";
    return 0;
}

// Run label in report tables: file name minus .json and a .result suffix.
inline std::string run_label(const fs::path& path) {
    std::string stem = path.stem().string();
    const std::string suffix = ".result";
    if (stem.size() > suffix.size() &&
        stem.compare(stem.size() - suffix.size(), suffix.size(), suffix) == 0)
        stem.resize(stem.size() - suffix.size());
    return stem;
}

// In "both" mode metric columns carry image_/pixel_ prefixes. A bare metric
// name in the config then resolves to the pixel column (the localization
// headline) and falls back to the image column.
inline std::string resolve_metric(const RunConfig& config,
                                  const RunResult& first) {
    if (config.mode != EvalMode::Both || first.groups.empty())
        return config.metric;
    const MetricSet& set = first.groups[0].metrics;
    if (set.has(config.metric)) return config.metric;
    for (const char* prefix : {"pixel_", "image_"}) {
        const std::string candidate = prefix + config.metric;
        if (set.has(candidate)) {
            std::cerr << "note: reporting '" << candidate << "' for metric '"
                      << config.metric << "'\n";
            return candidate;
        }
    }
    return config.metric;
}

inline int cmd_report(const RunConfig& config,
                      const std::vector<std::string>& result_paths) {
    const auto spec = protocol_of(config);
    ReportTable table;
    table.threshold = config.threshold;
    table.averaging = std::string(to_string(config.averaging)) +
                      " pixel averaging, unweighted aggregates";
    const std::string expected_fp = fingerprint_of(config.text);
    for (const auto& p : result_paths) {
        const auto result = load_run_result(p);
        if (result.fingerprint != expected_fp)
            std::cerr << "note: " << p
                      << " was produced under a different configuration\n";
        if (table.metric.empty()) table.metric = resolve_metric(config, result);
        add_row(table, run_label(p), aggregate(result, spec.aggregates, table.metric));
    }
    if (table.metric.empty()) table.metric = config.metric;
    fs::create_directories(config.out);
    const std::string csv = emit_csv(table);
    const std::string md = emit_markdown(table);
    save_text(config.out / "report.csv", csv);
    save_text(config.out / "report.md", md);
    std::cout << md;
    return 0;
}

inline int cmd_extract(const std::string& input, const std::string& extractor,
                       const std::string& output) {
    if (extractor == "fph")
        throw BenchError("DeclarationOnly", "fph is declaration-only");
    if (extractor == "sobel") {
        write_map_text(sobel_magnitude(load_pgm(input)), output);
    } else if (extractor == "dct") {
        const Image image = load_pgm(input);
        const ScoreMap coeffs = block_dct(image);
        double in_energy = 0.0, out_energy = 0.0;
        for (unsigned char p : image.pixels)
            in_energy += static_cast<double>(p) * p;
        for (double c : coeffs.values) out_energy += c * c;
        std::cout << "parseval: input energy " << detail::format_full(in_energy)
                  << ", coefficient energy " << detail::format_full(out_energy)
                  << "\n";
        write_map_text(coeffs, output);
    } else if (extractor == "bayar-demo") {
        // projection of a flat 5x5 kernel; applying it twice changes nothing
        const int n = 5;
        const auto projected = bayar_project(std::vector<double>(n * n, 1.0), n);
        ScoreMap m = make_score_map(n, n, 0);
        m.values = projected;
        write_map_text(m, output);
    } else {
        throw BenchError("UnknownExtractor",
                         "no extractor '" + extractor +
                             "' (try sobel, dct, bayar-demo)");
    }
    std::cout << "wrote " << output << "\n";
    return 0;
}

inline int cmd_run(const RunConfig& config, std::optional<int> workers_flag) {
    const int rc = cmd_ingest(config, {});
    if (rc != 0) return rc;
    const int erc = cmd_eval(config, workers_flag, false);
    if (erc != 0) return erc;
    const fs::path result_path = config.out / (config.run_name + ".result.json");
    return cmd_report(config, {result_path.generic_string()});
}

}  // namespace cli_detail

inline int cli_main(int argc, char** argv) {
    namespace cd = cli_detail;
    CLI::App app{"configuration-driven benchmark for fake-image detection and "
                 "localization"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<int> workers;
    std::optional<double> threshold;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_override;
    const auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "run configuration JSON file")
            ->required();
        cmd->add_option("--workers", workers, "parallel worker threads");
        cmd->add_option("--threshold", threshold, "decision threshold override");
        cmd->add_option("--seed", seed, "sampling seed override");
        cmd->add_option("--out", out_override, "output directory override");
    };

    std::vector<std::string> only_datasets;
    auto* ingest =
        app.add_subcommand("ingest", "scan datasets and write manifests");
    add_common(ingest);
    ingest->add_option("--dataset", only_datasets, "restrict to named datasets");

    auto* slice = app.add_subcommand("slice", "cut images into fixed tiles");
    add_common(slice);
    int tile = kDefaultTile;
    slice->add_option("--tile", tile, "tile side in pixels");
    slice->add_option("--dataset", only_datasets, "restrict to named datasets");

    auto* plan = app.add_subcommand("plan", "write per-epoch sampling plans");
    add_common(plan);
    std::uint64_t epochs = 1;
    plan->add_option("--epochs", epochs, "number of epochs to plan");

    auto* eval = app.add_subcommand("eval", "evaluate predictions");
    add_common(eval);
    bool write_timing = false;
    eval->add_flag("--timing", write_timing, "also write a timing sidecar file");

    auto* report = app.add_subcommand("report", "tabulate run results");
    add_common(report);
    std::vector<std::string> results;
    report->add_option("--results", results, "run result JSON files")->required();

    auto* extract =
        app.add_subcommand("extract", "run a feature extractor on one image");
    std::string input, extractor, output;
    extract->add_option("--input", input, "input PGM image")->required();
    extract->add_option("--extractor", extractor, "sobel, dct or bayar-demo")
        ->required();
    extract->add_option("--output", output, "output text file")->required();

    auto* run = app.add_subcommand("run", "ingest, evaluate and report");
    add_common(run);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (extract->parsed()) return cd::cmd_extract(input, extractor, output);
        RunConfig config = load_run_config(config_path);
        if (threshold) {
            if (*threshold < 0.0 || *threshold > 1.0)
                throw BenchError("ConfigParse", "threshold must lie in [0, 1]");
            config.threshold = *threshold;
        }
        if (out_override) config.out = *out_override;
        if (ingest->parsed()) return cd::cmd_ingest(config, only_datasets);
        if (slice->parsed()) return cd::cmd_slice(config, only_datasets, tile);
        if (plan->parsed())
            return cd::cmd_plan(config, seed.value_or(config.seed), epochs);
        if (eval->parsed()) return cd::cmd_eval(config, workers, write_timing);
        if (report->parsed()) return cd::cmd_report(config, results);
        if (run->parsed()) return cd::cmd_run(config, workers);
    } catch (const EvalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const BenchError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}

}  // namespace fbench
