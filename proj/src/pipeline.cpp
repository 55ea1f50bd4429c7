#include "cfedit/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "cfedit/imaging.hpp"

namespace cfedit {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

FindingSet parse_findings(const nlohmann::json& list) {
    FindingSet out;
    if (list.is_null()) return out;
    if (!list.is_array()) {
        throw ConfigError("finding list must be an array");
    }
    for (const auto& item : list) {
        FindingState state{item.at("finding").get<std::string>(), std::nullopt, std::nullopt};
        if (item.contains("location") && !item.at("location").is_null()) {
            const auto name = item.at("location").get<std::string>();
            state.location = parse_location(name);
            if (!state.location) throw ConfigError("unknown location '" + name + "'");
        }
        if (item.contains("severity") && !item.at("severity").is_null()) {
            const auto name = item.at("severity").get<std::string>();
            state.severity = parse_severity(name);
            if (!state.severity) throw ConfigError("unknown severity '" + name + "'");
        }
        out.insert(std::move(state));
    }
    return out;
}

ojson instruction_json(const EditInstruction& instr) {
    ojson j;
    j["op"] = std::string(to_string(instr.operation));
    j["finding"] = instr.finding;
    if (instr.location) j["location"] = std::string(to_string(*instr.location));
    if (instr.severity) j["severity"] = std::string(to_string(*instr.severity));
    return j;
}

EditInstruction instruction_from_json(const nlohmann::json& j) {
    const auto op_name = j.at("op").get<std::string>();
    const auto op = parse_operation(op_name);
    if (!op) throw IoError("manifest: unknown operation '" + op_name + "'");
    EditInstruction instr{*op, j.at("finding").get<std::string>(), std::nullopt, std::nullopt};
    if (j.contains("location")) {
        instr.location = parse_location(j.at("location").get<std::string>());
        if (!instr.location) throw IoError("manifest: unknown location");
    }
    if (j.contains("severity")) {
        instr.severity = parse_severity(j.at("severity").get<std::string>());
        if (!instr.severity) throw IoError("manifest: unknown severity");
    }
    return instr;
}

double round_to(double value, int decimals) {
    const double factor = std::pow(10.0, decimals);
    return std::round(value * factor) / factor;
}

} // namespace

std::string_view to_string(Split split) {
    switch (split) {
    case Split::Train: return "train";
    case Split::Holdout: return "holdout";
    case Split::Test: return "test";
    case Split::Validation: return "validation";
    }
    return "unknown";
}

std::optional<Split> parse_split(std::string_view token) {
    for (Split s : {Split::Train, Split::Holdout, Split::Test, Split::Validation}) {
        if (to_string(s) == token) return s;
    }
    return std::nullopt;
}

Split split_for_patient(std::string_view patient_id) {
    const std::uint64_t bucket = fnv1a(patient_id) % 1000;
    if (bucket < 875) return Split::Train;
    if (bucket < 977) return Split::Holdout;
    if (bucket < 992) return Split::Test;
    return Split::Validation;
}

std::vector<PairRecord> read_records(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open records file " + path.string());
    }
    const fs::path base = path.parent_path();
    auto resolve = [&](const std::string& p) {
        const fs::path candidate(p);
        return candidate.is_absolute() ? candidate : base / candidate;
    };
    std::vector<PairRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            PairRecord r;
            r.id = j.at("id").get<std::string>();
            r.past = resolve(j.at("past").get<std::string>());
            r.current = resolve(j.at("current").get<std::string>());
            if (r.past == r.current) {
                throw ConfigError("past and current paths are identical");
            }
            if (j.contains("view") && !j.at("view").is_null()) r.view = j.at("view").get<std::string>();
            r.past_findings = parse_findings(j.value("past_findings", nlohmann::json::array()));
            r.current_findings = parse_findings(j.value("current_findings", nlohmann::json::array()));
            if (j.contains("split") && !j.at("split").is_null()) {
                const auto name = j.at("split").get<std::string>();
                const auto split = parse_split(name);
                if (!split) throw ConfigError("unknown split '" + name + "'");
                r.split = *split;
            } else {
                r.split = split_for_patient(j.value("patient", r.id));
            }
            records.push_back(std::move(r));
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("records line " + std::to_string(line_no) + ": " + e.what());
        } catch (const ConfigError& e) {
            throw ConfigError("records line " + std::to_string(line_no) + ": " + e.what());
        } catch (const ParameterError& e) {
            throw ConfigError("records line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return records;
}

ViewFilterResult filter_view(const std::vector<PairRecord>& records, const std::string& keep) {
    ViewFilterResult out;
    for (const auto& r : records) {
        if (!r.view) {
            ++out.dropped_unlabeled;
        } else if (*r.view != keep) {
            ++out.dropped_other_view;
        } else {
            out.kept.push_back(r);
        }
    }
    return out;
}

DatasetStats compute_stats(const std::vector<ManifestEntry>& entries) {
    DatasetStats s;
    for (Split split : {Split::Train, Split::Holdout, Split::Test, Split::Validation}) {
        s.samples_per_split[split] = 0;
    }
    for (const auto& e : entries) {
        ++s.samples_per_split[e.record.split];
        ++s.samples;
        for (const auto& instr : e.instructions) {
            switch (instr.operation) {
            case Operation::Add: ++s.add; break;
            case Operation::Remove: ++s.remove; break;
            case Operation::ChangeLevel: ++s.change_level; break;
            }
        }
    }
    s.total_operations = s.add + s.remove + s.change_level;
    if (s.total_operations > 0) {
        const double total = static_cast<double>(s.total_operations);
        s.add_percent = round_to(100.0 * static_cast<double>(s.add) / total, 1);
        s.remove_percent = round_to(100.0 * static_cast<double>(s.remove) / total, 1);
        s.change_level_percent = round_to(100.0 * static_cast<double>(s.change_level) / total, 1);
    }
    if (s.samples > 0) {
        s.average_operations = round_to(static_cast<double>(s.total_operations) / static_cast<double>(s.samples), 2);
    }
    return s;
}

std::string DatasetStats::to_json_text() const {
    ojson j;
    j["samples"] = samples;
    j["splits"] = ojson::object();
    for (const auto& [split, count] : samples_per_split) j["splits"][std::string(to_string(split))] = count;
    j["operations"] = {
        {"add", {{"count", add}, {"percent", add_percent}}},
        {"remove", {{"count", remove}, {"percent", remove_percent}}},
        {"change_level", {{"count", change_level}, {"percent", change_level_percent}}},
    };
    j["total_operations"] = total_operations;
    j["average_operations_per_sample"] = average_operations;
    j["rejected"] = rejected;
    j["unreadable"] = unreadable;
    j["unchanged"] = unchanged;
    j["dropped_view"] = dropped_view;
    return j.dump();
}

ManifestBuild build_manifest(const std::vector<PairRecord>& records, const ManifestConfig& cfg) {
    if (cfg.canvas <= 0) {
        throw ParameterError("manifest canvas must be positive");
    }
    enum class Outcome { Accepted, Rejected, Unreadable, Unchanged };
    struct Slot {
        Outcome outcome = Outcome::Unreadable;
        std::optional<ManifestEntry> entry;
    };
    std::vector<Slot> slots(records.size());

    auto process = [&](std::size_t index) {
        const PairRecord& r = records[index];
        Slot& slot = slots[index];
        GrayImage past(1, 1);
        GrayImage current(1, 1);
        try {
            past = resize(read_png(r.past), cfg.canvas, cfg.canvas);
            current = resize(read_png(r.current), cfg.canvas, cfg.canvas);
        } catch (const IoError&) {
            slot.outcome = Outcome::Unreadable;
            return;
        }
        const GrayImage past_f = bilateral_filter(past, cfg.bilateral_sigma_domain, cfg.bilateral_sigma_range);
        const GrayImage current_f = bilateral_filter(current, cfg.bilateral_sigma_domain, cfg.bilateral_sigma_range);
        const RegistrationResult reg = register_rigid(past_f, current_f, cfg.registration);
        if (!reg.accepted) {
            slot.outcome = Outcome::Rejected;
            return;
        }
        InstructionSet instrs = generate_instructions(r.past_findings, r.current_findings);
        if (instrs.empty()) {
            slot.outcome = Outcome::Unchanged;
            return;
        }
        std::string text = render_instruction(instrs);
        slot.entry = ManifestEntry{r, reg, std::move(instrs), std::move(text)};
        slot.outcome = Outcome::Accepted;
    };

    const unsigned workers = std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(),
                                                             static_cast<unsigned>(records.size())));
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < records.size(); i = next++) {
                try {
                    process(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);

    ManifestBuild build;
    std::size_t rejected = 0, unreadable = 0, unchanged = 0;
    for (auto& slot : slots) {
        switch (slot.outcome) {
        case Outcome::Accepted: build.entries.push_back(std::move(*slot.entry)); break;
        case Outcome::Rejected: ++rejected; break;
        case Outcome::Unreadable: ++unreadable; break;
        case Outcome::Unchanged: ++unchanged; break;
        }
    }
    std::stable_sort(build.entries.begin(), build.entries.end(),
                     [](const ManifestEntry& a, const ManifestEntry& b) { return a.record.id < b.record.id; });
    build.stats = compute_stats(build.entries);
    build.stats.rejected = rejected;
    build.stats.unreadable = unreadable;
    build.stats.unchanged = unchanged;
    return build;
}

std::string manifest_line(const ManifestEntry& entry) {
    if (parse_instruction(entry.text) != entry.instructions) {
        throw ParameterError("manifest entry '" + entry.record.id + "': text does not re-parse to its instructions");
    }
    const RigidTransform& t = entry.registration.transform;
    ojson j;
    j["schema"] = kManifestSchema;
    j["id"] = entry.record.id;
    j["past"] = entry.record.past.generic_string();
    j["current"] = entry.record.current.generic_string();
    j["view"] = entry.record.view ? ojson(*entry.record.view) : ojson(nullptr);
    j["transform"] = {t.angle, t.scale, t.tx, t.ty};
    j["mi"] = entry.registration.score.value;
    j["instructions"] = ojson::array();
    for (const auto& instr : entry.instructions) j["instructions"].push_back(instruction_json(instr));
    j["text"] = entry.text;
    j["split"] = std::string(to_string(entry.record.split));
    return j.dump();
}

std::string manifest_text(const std::vector<ManifestEntry>& entries) {
    std::string out;
    for (const auto& e : entries) {
        out += manifest_line(e);
        out += '\n';
    }
    return out;
}

ManifestEntry parse_manifest_line(const std::string& line) {
    try {
        const auto j = nlohmann::json::parse(line);
        if (j.at("schema").get<int>() != kManifestSchema) {
            throw ConfigError("manifest: unsupported schema version");
        }
        ManifestEntry e;
        e.record.id = j.at("id").get<std::string>();
        e.record.past = j.at("past").get<std::string>();
        e.record.current = j.at("current").get<std::string>();
        if (!j.at("view").is_null()) e.record.view = j.at("view").get<std::string>();
        const auto split = parse_split(j.at("split").get<std::string>());
        if (!split) throw ConfigError("manifest: unknown split");
        e.record.split = *split;
        const auto& t = j.at("transform");
        if (!t.is_array() || t.size() != 4) throw ConfigError("manifest: transform must have 4 numbers");
        e.registration.transform = {t[0].get<double>(), t[1].get<double>(), t[2].get<double>(), t[3].get<double>()};
        e.registration.score = {j.at("mi").get<double>()};
        e.registration.accepted = true;
        std::vector<EditInstruction> items;
        for (const auto& item : j.at("instructions")) items.push_back(instruction_from_json(item));
        e.instructions = InstructionSet(std::move(items));
        e.text = j.at("text").get<std::string>();
        return e;
    } catch (const nlohmann::json::exception& ex) {
        throw ConfigError(std::string("malformed manifest line: ") + ex.what());
    } catch (const ParameterError& ex) {
        throw ConfigError(std::string("malformed manifest line: ") + ex.what());
    }
}

std::vector<ManifestEntry> read_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open manifest " + path.string());
    }
    std::vector<ManifestEntry> entries;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        entries.push_back(parse_manifest_line(line));
    }
    return entries;
}

} // namespace cfedit
