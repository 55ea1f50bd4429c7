#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cfedit/diffusion.hpp"
#include "cfedit/imaging.hpp"
#include "cfedit/maskreg.hpp"
#include "cfedit/metrics.hpp"
#include "cfedit/pipeline.hpp"
#include "cfedit/probes.hpp"
#include "cfedit/rse.hpp"

namespace cfedit {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitParse = 2;
constexpr int kExitIo = 3;
constexpr int kExitConfig = 4;

struct SharedOptions {
    std::uint64_t seed = 0;
    int canvas = 512;
    fs::path out_dir = ".";
};

void add_shared(CLI::App* cmd, SharedOptions& shared) {
    cmd->add_option("--seed", shared.seed, "Run seed; sub-seeds derive by fixed offsets");
    cmd->add_option("--canvas", shared.canvas, "Working resolution (square)")->check(CLI::PositiveNumber);
    cmd->add_option("--out-dir", shared.out_dir, "Directory for artifacts");
}

struct RegistrationFlags {
    int bins = 64;
    double threshold = -0.88;
    int restarts = 8;
};

void add_registration(CLI::App* cmd, RegistrationFlags& flags) {
    cmd->add_option("--mi-bins", flags.bins, "Joint histogram bins per axis");
    cmd->add_option("--mi-threshold", flags.threshold, "Accept when negated MI <= threshold");
    cmd->add_option("--reg-restarts", flags.restarts, "Simplex restarts on the seed grid");
}

RegistrationConfig to_config(const RegistrationFlags& flags) {
    RegistrationConfig cfg;
    cfg.bins = flags.bins;
    cfg.threshold = flags.threshold;
    cfg.restarts = flags.restarts;
    return cfg;
}

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

ojson transform_json(const RigidTransform& t) {
    return ojson::array({t.angle, t.scale, t.tx, t.ty});
}

ojson instructions_json(const InstructionSet& instrs) {
    ojson list = ojson::array();
    for (const auto& instr : instrs) {
        ojson j;
        j["op"] = std::string(to_string(instr.operation));
        j["finding"] = instr.finding;
        if (instr.location) j["location"] = std::string(to_string(*instr.location));
        if (instr.severity) j["severity"] = std::string(to_string(*instr.severity));
        list.push_back(std::move(j));
    }
    return list;
}

FindingSet read_finding_file(const fs::path& path) {
    const auto doc = nlohmann::json::parse(read_text_file(path), nullptr, false);
    if (doc.is_discarded() || !doc.is_array()) {
        throw ConfigError("finding file must hold a JSON array: " + path.string());
    }
    FindingSet out;
    for (const auto& item : doc) {
        if (!item.is_object() || !item.contains("finding") || !item.at("finding").is_string()) {
            throw ConfigError("finding entry needs a \"finding\" string: " + path.string());
        }
        FindingState s{item.at("finding").get<std::string>(), std::nullopt, std::nullopt};
        if (item.contains("location") && item.at("location").is_string()) {
            s.location = parse_location(item.at("location").get<std::string>());
            if (!s.location) throw ConfigError("unknown location in " + path.string());
        }
        if (item.contains("severity") && item.at("severity").is_string()) {
            s.severity = parse_severity(item.at("severity").get<std::string>());
            if (!s.severity) throw ConfigError("unknown severity in " + path.string());
        }
        out.insert(std::move(s));
    }
    return out;
}

std::vector<GrayImage> read_png_dir(const fs::path& dir) {
    if (!fs::is_directory(dir)) {
        throw IoError("not a directory: " + dir.string());
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".png") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) {
        throw IoError("no PNG images in " + dir.string());
    }
    std::vector<GrayImage> images;
    for (const auto& f : files) images.push_back(read_png(f));
    return images;
}

std::vector<double> numbers(const nlohmann::json& j, const char* what) {
    if (!j.is_array()) throw ConfigError(std::string(what) + " must be an array of numbers");
    return j.get<std::vector<double>>();
}

// Accepts a flat probability vector or a per-image list of vectors (averaged).
std::vector<double> distribution_values(const nlohmann::json& j, std::size_t classes) {
    if (!j.is_array() || j.empty()) throw ConfigError("distribution must be a non-empty array");
    std::vector<double> out;
    if (j.front().is_array()) {
        out.assign(classes, 0.0);
        for (const auto& row : j) {
            const auto v = row.get<std::vector<double>>();
            if (v.size() != classes) throw ConfigError("distribution row length differs from class count");
            for (std::size_t k = 0; k < classes; ++k) out[k] += v[k];
        }
        for (double& v : out) v /= static_cast<double>(j.size());
    } else {
        out = j.get<std::vector<double>>();
    }
    if (out.size() != classes) throw ConfigError("distribution length differs from class count");
    return out;
}

double score_entry(const std::string& name, const nlohmann::json& entry, bool allow_correlation) {
    if (entry.contains("labels")) {
        ScoreSet s;
        s.labels = entry.at("labels").get<std::vector<int>>();
        s.scores = numbers(entry.at("scores"), "scores");
        return auroc(s);
    }
    if (allow_correlation && entry.contains("target")) {
        // Negative correlation retains nothing.
        return std::max(0.0, pearson(numbers(entry.at("target"), "target"), numbers(entry.at("predicted"), "predicted")));
    }
    throw ConfigError("score entry '" + name + "' needs labels/scores" +
                      std::string(allow_correlation ? " or target/predicted" : ""));
}

int cmd_edit(const fs::path& image_path, const std::string& text, const fs::path& world_path,
             const std::optional<fs::path>& mask_path, const EditConfig& cfg, const SharedOptions& shared,
             std::ostream& out) {
    const InstructionSet instrs = parse_instruction(text);
    const GrayImage image = resize(read_png(image_path), shared.canvas, shared.canvas);
    const NoiseSchedule schedule = NoiseSchedule::linear();
    const OracleDenoiser denoiser(BlobWorld::load(world_path), schedule);

    std::optional<MaskRegistry> registry;
    std::optional<Mask> user_mask;
    if (mask_path) {
        if (mask_path->extension() == ".json") {
            registry = MaskRegistry::load(*mask_path);
        } else {
            user_mask = user_mask_override(read_user_mask_png(*mask_path), shared.canvas, shared.canvas);
        }
    }

    const EditResult result =
        edit(image, instrs, user_mask, cfg, registry ? &*registry : nullptr, denoiser, schedule);

    fs::create_directories(shared.out_dir);
    write_png(shared.out_dir / "edited.png", result.image);
    write_overlay_png(shared.out_dir / "guidance.png", image, result.guidance.values);
    write_raw_grid(shared.out_dir / "guidance.bin", result.guidance.values, "guidance");
    write_mask_png(shared.out_dir / "mask.png", result.mask.mask);

    std::size_t changed = 0;
    for (std::size_t i = 0; i < image.size(); ++i) {
        if (image[i] != result.image[i]) ++changed;
    }
    ojson summary;
    summary["status"] = "ok";
    summary["text"] = render_instruction(instrs);
    summary["instructions"] = instructions_json(instrs);
    summary["width"] = image.width();
    summary["height"] = image.height();
    summary["tau"] = cfg.tau;
    summary["s_image"] = cfg.scales.image;
    summary["s_text"] = cfg.scales.text;
    summary["t_rel"] = cfg.t_rel;
    summary["steps"] = cfg.steps;
    summary["seed"] = cfg.seed;
    summary["pseudo_mask_pixels"] = count_ones(result.pseudo_mask);
    summary["edit_mask_pixels"] = count_ones(result.mask.mask);
    summary["changed_pixels"] = changed;
    summary["out_dir"] = shared.out_dir.generic_string();
    out << summary.dump() << '\n';
    return 0;
}

int cmd_eval(const fs::path& reference_dir, const fs::path& generated_dir, const std::optional<fs::path>& scores_path,
             const std::optional<fs::path>& world_path, const SharedOptions& shared, const std::optional<fs::path>& report_path,
             std::ostream& out) {
    const std::vector<GrayImage> reference = read_png_dir(reference_dir);
    const std::vector<GrayImage> generated = read_png_dir(generated_dir);

    MetricReport report;
    report.n = generated.size();

    const PooledProjectionExtractor extractor;
    report.fid = frechet_distance(embed_and_fit(reference, extractor), embed_and_fit(generated, extractor));

    nlohmann::json scores;
    if (scores_path) {
        scores = nlohmann::json::parse(read_text_file(*scores_path), nullptr, false);
        if (scores.is_discarded() || !scores.is_object()) {
            throw ConfigError("scores file must hold a JSON object");
        }
    }
    try {
        if (scores.contains("accuracy")) {
            for (const auto& [name, entry] : scores.at("accuracy").items()) {
                report.accuracy[name] = score_entry(name, entry, false);
            }
        }
        if (scores.contains("retention")) {
            for (const auto& [name, entry] : scores.at("retention").items()) {
                report.retention[name] = score_entry(name, entry, true);
            }
        }
        if (scores.contains("distributions")) {
            const auto& d = scores.at("distributions");
            const auto classes = d.at("classes").get<std::vector<std::string>>();
            const PathologyDistribution p{classes, distribution_values(d.at("reference"), classes.size())};
            const PathologyDistribution q{classes, distribution_values(d.at("generated"), classes.size())};
            report.kl = kl_divergence(p, q);
        } else if (world_path) {
            const BlobPresenceProbe probe(BlobWorld::load(*world_path));
            report.kl = kl_divergence(average_distribution(reference, probe), average_distribution(generated, probe));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("scores file: ") + e.what());
    }
    if (!report.accuracy.empty() && !report.retention.empty()) {
        std::vector<double> a, f;
        for (const auto& [name, v] : report.accuracy) a.push_back(v);
        for (const auto& [name, v] : report.retention) f.push_back(v);
        report.cmig = cmig(a, f);
    }

    const std::string text = report.to_json_text();
    const fs::path target = report_path ? *report_path : shared.out_dir / "metrics.json";
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    write_file_atomic(target, text + "\n");
    out << nlohmann::json::parse(text).dump() << '\n';
    return 0;
}

int cmd_register(const fs::path& fixed_path, const fs::path& moving_path, const RegistrationFlags& flags,
                 const SharedOptions& shared, std::ostream& out) {
    const GrayImage fixed = resize(read_png(fixed_path), shared.canvas, shared.canvas);
    const GrayImage moving = resize(read_png(moving_path), shared.canvas, shared.canvas);
    const RegistrationResult reg = register_rigid(bilateral_filter(fixed, 2.0, 50.0), bilateral_filter(moving, 2.0, 50.0),
                                                  to_config(flags));
    fs::create_directories(shared.out_dir);
    write_png(shared.out_dir / "registered.png", apply_rigid(moving, reg.transform));
    ojson j;
    j["transform"] = transform_json(reg.transform);
    j["mi"] = reg.score.value;
    j["accepted"] = reg.accepted;
    out << j.dump() << '\n';
    return 0;
}

int cmd_instruct(const std::optional<fs::path>& past, const std::optional<fs::path>& current,
                 const std::optional<std::string>& text, std::ostream& out) {
    InstructionSet instrs;
    if (text) {
        instrs = parse_instruction(*text);
    } else if (past && current) {
        instrs = generate_instructions(read_finding_file(*past), read_finding_file(*current));
    } else {
        throw ConfigError("instruct needs --text or both --past and --current");
    }
    ojson j;
    j["text"] = render_instruction(instrs);
    j["instructions"] = instructions_json(instrs);
    out << j.dump() << '\n';
    return 0;
}

int cmd_ingest(const fs::path& records_path, const std::string& view, const RegistrationFlags& flags,
               const SharedOptions& shared, std::ostream& out, std::ostream& err) {
    const std::vector<PairRecord> records = read_records(records_path);
    const ViewFilterResult filtered = filter_view(records, view);
    ManifestConfig cfg;
    cfg.canvas = shared.canvas;
    cfg.registration = to_config(flags);
    ManifestBuild build = build_manifest(filtered.kept, cfg);
    build.stats.dropped_view = filtered.dropped_unlabeled + filtered.dropped_other_view;

    fs::create_directories(shared.out_dir);
    write_file_atomic(shared.out_dir / "manifest.jsonl", manifest_text(build.entries));
    write_file_atomic(shared.out_dir / "stats.json", build.stats.to_json_text() + "\n");
    if (build.entries.empty()) {
        err << "warning: no pairs accepted; manifest is empty\n";
    }
    out << build.stats.to_json_text() << '\n';
    return 0;
}

int cmd_stats(const fs::path& manifest_path, std::ostream& out) {
    out << compute_stats(read_manifest(manifest_path)).to_json_text() << '\n';
    return 0;
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Region-restricted counterfactual image editing toolkit", "cfedit"};
    app.require_subcommand(1);

    SharedOptions shared;
    RegistrationFlags reg_flags;

    auto* ingest = app.add_subcommand("ingest", "Filter, register and gate image pairs into an instruction manifest");
    fs::path records_path;
    std::string view = "PA";
    ingest->add_option("--records", records_path, "Pair records (JSON Lines)")->required();
    ingest->add_option("--view", view, "View label to keep");
    add_shared(ingest, shared);
    add_registration(ingest, reg_flags);

    auto* reg = app.add_subcommand("register", "Rigidly register one image pair");
    fs::path fixed_path, moving_path;
    reg->add_option("--fixed", fixed_path)->required();
    reg->add_option("--moving", moving_path)->required();
    add_shared(reg, shared);
    add_registration(reg, reg_flags);

    auto* instruct = app.add_subcommand("instruct", "Build or canonicalize edit instructions");
    std::optional<fs::path> past_path, current_path;
    std::optional<std::string> text_opt;
    instruct->add_option("--past", past_path, "Past finding states (JSON array)");
    instruct->add_option("--current", current_path, "Current finding states (JSON array)");
    instruct->add_option("--text", text_opt, "Instruction text to canonicalize");

    auto* edit_cmd = app.add_subcommand("edit", "Apply a region-restricted edit");
    fs::path image_path, world_path;
    std::string instruction;
    std::optional<fs::path> mask_path;
    EditConfig edit_cfg;
    edit_cmd->add_option("--image", image_path)->required();
    edit_cmd->add_option("--instruction", instruction)->required();
    edit_cmd->add_option("--world", world_path, "Blob world JSON for the oracle denoiser")->required();
    edit_cmd->add_option("--mask", mask_path, "Registry JSON or user mask PNG");
    edit_cmd->add_option("--tau", edit_cfg.tau);
    edit_cmd->add_option("--s-image", edit_cfg.scales.image);
    edit_cmd->add_option("--s-text", edit_cfg.scales.text);
    edit_cmd->add_option("--t-rel", edit_cfg.t_rel);
    edit_cmd->add_option("--steps", edit_cfg.steps);
    add_shared(edit_cmd, shared);

    auto* eval = app.add_subcommand("eval", "Compute CMIG, KL and FID");
    fs::path reference_dir, generated_dir;
    std::optional<fs::path> scores_path, eval_world, report_path;
    eval->add_option("--reference", reference_dir)->required();
    eval->add_option("--generated", generated_dir)->required();
    eval->add_option("--scores", scores_path, "Probe score file (JSON)");
    eval->add_option("--world", eval_world, "Blob world for the synthetic pathology probe");
    eval->add_option("--report", report_path, "Report path (default <out-dir>/metrics.json)");
    add_shared(eval, shared);

    auto* stats = app.add_subcommand("stats", "Dataset statistics of a manifest");
    fs::path manifest_path;
    stats->add_option("--manifest", manifest_path)->required();

    std::vector<std::string> argv_storage{"cfedit"};
    argv_storage.insert(argv_storage.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& a : argv_storage) argv.push_back(a.data());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (ingest->parsed()) return cmd_ingest(records_path, view, reg_flags, shared, out, err);
        if (reg->parsed()) return cmd_register(fixed_path, moving_path, reg_flags, shared, out);
        if (instruct->parsed()) return cmd_instruct(past_path, current_path, text_opt, out);
        if (edit_cmd->parsed()) {
            edit_cfg.seed = shared.seed;
            return cmd_edit(image_path, instruction, world_path, mask_path, edit_cfg, shared, out);
        }
        if (eval->parsed()) return cmd_eval(reference_dir, generated_dir, scores_path, eval_world, shared, report_path, out);
        if (stats->parsed()) return cmd_stats(manifest_path, out);
    } catch (const ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitParse;
    } catch (const IoError& e) {
        err << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const ParameterError& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    }
    return kExitUsage;
}

} // namespace cfedit
