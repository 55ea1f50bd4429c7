#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cfedit/instruction.hpp"
#include "cfedit/registration.hpp"

namespace cfedit {

inline constexpr int kManifestSchema = 1;

enum class Split { Train, Holdout, Test, Validation };

std::string_view to_string(Split split);
std::optional<Split> parse_split(std::string_view token);

// Bucket a patient id into a split with the reference proportions
// (87.5% train, 10.2% holdout, 1.5% test, 0.8% validation).
Split split_for_patient(std::string_view patient_id);

struct PairRecord {
    std::string id;
    std::filesystem::path past;
    std::filesystem::path current;
    std::optional<std::string> view;
    FindingSet past_findings;
    FindingSet current_findings;
    Split split = Split::Train;
};

/// Records file, one JSON object per line:
///   {"id", "patient"?, "past", "current", "view"?,
///    "past_findings": [{"finding", "location"?, "severity"?}, ...],
///    "current_findings": [...], "split"?}
/// Relative image paths resolve against the records file's directory. When
/// "split" is absent it is derived from "patient" (or "id").
std::vector<PairRecord> read_records(const std::filesystem::path& path);

struct ViewFilterResult {
    std::vector<PairRecord> kept;
    std::size_t dropped_unlabeled = 0;
    std::size_t dropped_other_view = 0;
};

// Keeps records whose view label equals `keep`; unlabeled records are dropped and counted.
ViewFilterResult filter_view(const std::vector<PairRecord>& records, const std::string& keep = "PA");

struct ManifestEntry {
    PairRecord record;
    RegistrationResult registration;
    InstructionSet instructions;
    std::string text;
};

struct DatasetStats {
    std::map<Split, std::size_t> samples_per_split;
    std::size_t samples = 0;
    std::size_t add = 0;
    std::size_t remove = 0;
    std::size_t change_level = 0;
    std::size_t total_operations = 0;
    double add_percent = 0.0;
    double remove_percent = 0.0;
    double change_level_percent = 0.0;
    double average_operations = 0.0;

    // Pipeline bookkeeping, filled by build_manifest.
    std::size_t rejected = 0;
    std::size_t unreadable = 0;
    std::size_t unchanged = 0;
    std::size_t dropped_view = 0;

    std::string to_json_text() const;
};

// Percentages at one decimal, average operations per sample at two decimals.
DatasetStats compute_stats(const std::vector<ManifestEntry>& entries);

struct ManifestConfig {
    int canvas = 512;
    double bilateral_sigma_domain = 2.0;
    double bilateral_sigma_range = 50.0;
    RegistrationConfig registration{};
};

struct ManifestBuild {
    std::vector<ManifestEntry> entries;
    DatasetStats stats;
};

/// Per record: read both images, resize to the canvas, bilateral-filter,
/// register the current image onto the past one and gate on MI. Accepted
/// pairs with at least one finding change become entries, ordered by id.
ManifestBuild build_manifest(const std::vector<PairRecord>& records, const ManifestConfig& cfg);

// One JSONL line per entry (no trailing newline); re-parses its text and checks the instructions.
std::string manifest_line(const ManifestEntry& entry);
std::string manifest_text(const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
ManifestEntry parse_manifest_line(const std::string& line);

/// Command-line entry point. Subcommands: ingest, register, instruct, edit,
/// eval, stats. Exit codes: 0 ok, 1 usage, 2 instruction parse error,
/// 3 I/O error, 4 configuration error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace cfedit
