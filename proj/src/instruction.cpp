#include "cfedit/instruction.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <tuple>

namespace cfedit {

namespace {

constexpr std::array<std::pair<Severity, std::string_view>, 6> kSeverityNames{{
    {Severity::Minimal, "minimal"},
    {Severity::Small, "small"},
    {Severity::Mild, "mild"},
    {Severity::Moderate, "moderate"},
    {Severity::Severe, "severe"},
    {Severity::Large, "large"},
}};

constexpr std::array<std::pair<Location, std::string_view>, 10> kLocationNames{{
    {Location::Left, "left"},
    {Location::Right, "right"},
    {Location::Bilateral, "bilateral"},
    {Location::LeftLowerLobe, "left_lower_lobe"},
    {Location::LeftUpperLobe, "left_upper_lobe"},
    {Location::RightLowerLobe, "right_lower_lobe"},
    {Location::RightUpperLobe, "right_upper_lobe"},
    {Location::RightBase, "right_base"},
    {Location::LeftBase, "left_base"},
    {Location::CardiacRegion, "cardiac_region"},
}};

constexpr std::size_t kMaxLocationWords = 3;

std::string spaced(std::string_view snake) {
    std::string out(snake);
    std::replace(out.begin(), out.end(), '_', ' ');
    return out;
}

std::string join(const std::vector<std::string>& words, std::size_t first, std::size_t last, char sep) {
    std::string out;
    for (std::size_t i = first; i < last; ++i) {
        if (i > first) out += sep;
        out += words[i];
    }
    return out;
}

std::vector<std::string> split_words(std::string_view text) {
    std::vector<std::string> words;
    std::string current;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!current.empty()) words.push_back(std::move(current));
            current.clear();
        } else {
            current += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        }
    }
    if (!current.empty()) words.push_back(std::move(current));
    return words;
}

// Splits on ';' and on the word pair "and then".
std::vector<std::vector<std::string>> split_clauses(std::string_view text) {
    std::vector<std::vector<std::string>> clauses;
    std::size_t start = 0;
    while (true) {
        const std::size_t semi = text.find(';', start);
        const std::vector<std::string> words =
            split_words(text.substr(start, semi == std::string_view::npos ? std::string_view::npos : semi - start));
        std::vector<std::string> clause;
        for (std::size_t i = 0; i < words.size(); ++i) {
            if (words[i] == "and" && i + 1 < words.size() && words[i + 1] == "then") {
                clauses.push_back(std::move(clause));
                clause.clear();
                ++i;
            } else {
                clause.push_back(words[i]);
            }
        }
        clauses.push_back(std::move(clause));
        if (semi == std::string_view::npos) break;
        start = semi + 1;
    }
    return clauses;
}

// Longest location phrase starting at words[pos]; advances pos on a match.
std::optional<Location> take_location(const std::vector<std::string>& words, std::size_t& pos, std::size_t end) {
    for (std::size_t n = std::min(kMaxLocationWords, end - pos); n >= 1; --n) {
        if (auto loc = parse_location(join(words, pos, pos + n, '_'))) {
            pos += n;
            return loc;
        }
    }
    return std::nullopt;
}

EditInstruction parse_clause(const std::vector<std::string>& words, const std::string& clause_text) {
    if (words.empty()) {
        throw ParseError("empty clause", clause_text);
    }
    EditInstruction out{Operation::Add, {}, std::nullopt, std::nullopt};
    std::size_t pos = 0;
    std::size_t end = words.size();

    if (words[0] == "add" || words[0] == "remove") {
        out.operation = words[0] == "add" ? Operation::Add : Operation::Remove;
        pos = 1;
        if (pos < end) {
            if (auto sev = parse_severity(words[pos])) {
                out.severity = sev;
                ++pos;
            }
        }
    } else if (words.size() >= 4 && words[0] == "change" && words[1] == "the" && words[2] == "level" &&
               words[3] == "of") {
        out.operation = Operation::ChangeLevel;
        pos = 4;
        if (end - pos < 2 || words[end - 2] != "to" || !parse_severity(words[end - 1])) {
            throw ParseError("level change must end with 'to <severity>': '" + clause_text + "'", clause_text);
        }
        out.severity = parse_severity(words[end - 1]);
        end -= 2;
    } else {
        throw ParseError("no operation keyword (add/remove/change the level of) in clause '" + clause_text + "'",
                         clause_text);
    }

    if (pos < end) {
        out.location = take_location(words, pos, end);
    }
    if (pos >= end) {
        throw ParseError("missing finding in clause '" + clause_text + "'", clause_text);
    }
    out.finding = join(words, pos, end, '_');
    if (!is_finding_identifier(out.finding)) {
        throw ParseError("invalid finding '" + join(words, pos, end, ' ') + "' in clause '" + clause_text + "'",
                         clause_text);
    }
    return out;
}

std::string location_sort_key(const std::optional<Location>& loc) {
    return loc ? std::string(to_string(*loc)) : std::string();
}

} // namespace

std::string_view to_string(Operation op) {
    switch (op) {
    case Operation::Add: return "add";
    case Operation::Remove: return "remove";
    case Operation::ChangeLevel: return "change_level";
    }
    return "unknown";
}

std::string_view to_string(Severity severity) {
    for (const auto& [value, name] : kSeverityNames) {
        if (value == severity) return name;
    }
    return "unknown";
}

std::string_view to_string(Location location) {
    for (const auto& [value, name] : kLocationNames) {
        if (value == location) return name;
    }
    return "unknown";
}

std::optional<Operation> parse_operation(std::string_view token) {
    if (token == "add") return Operation::Add;
    if (token == "remove") return Operation::Remove;
    if (token == "change_level") return Operation::ChangeLevel;
    return std::nullopt;
}

std::optional<Severity> parse_severity(std::string_view token) {
    for (const auto& [value, name] : kSeverityNames) {
        if (name == token) return value;
    }
    return std::nullopt;
}

std::optional<Location> parse_location(std::string_view token) {
    for (const auto& [value, name] : kLocationNames) {
        if (name == token) return value;
    }
    return std::nullopt;
}

const std::vector<Severity>& all_severities() {
    static const std::vector<Severity> values = [] {
        std::vector<Severity> v;
        for (const auto& entry : kSeverityNames) v.push_back(entry.first);
        return v;
    }();
    return values;
}

const std::vector<Location>& all_locations() {
    static const std::vector<Location> values = [] {
        std::vector<Location> v;
        for (const auto& entry : kLocationNames) v.push_back(entry.first);
        return v;
    }();
    return values;
}

const std::vector<std::string>& known_findings() {
    static const std::vector<std::string> findings{
        "atelectasis", "cardiomegaly", "consolidation", "edema",
        "lung_opacity", "pleural_effusion", "pneumonia", "pneumothorax",
    };
    return findings;
}

bool is_finding_identifier(std::string_view token) {
    if (token.empty() || token.front() == '_' || token.back() == '_') return false;
    char prev = '\0';
    for (char c : token) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
        if (!ok || (c == '_' && prev == '_')) return false;
        prev = c;
    }
    return true;
}

void EditInstruction::validate() const {
    if (!is_finding_identifier(finding)) {
        throw ParameterError("invalid finding identifier '" + finding + "'");
    }
    if (operation == Operation::ChangeLevel && !severity) {
        throw ParameterError("level change for '" + finding + "' has no target severity");
    }
}

InstructionSet::InstructionSet(std::vector<EditInstruction> items) {
    items_.reserve(items.size());
    for (auto& item : items) {
        push_back(std::move(item));
    }
}

void InstructionSet::push_back(EditInstruction item) {
    item.validate();
    for (const auto& existing : items_) {
        if (existing.operation == item.operation && existing.finding == item.finding &&
            existing.location == item.location) {
            throw ParameterError("duplicate instruction for '" + item.finding + "'");
        }
    }
    items_.push_back(std::move(item));
}

FindingSet::FindingSet(std::initializer_list<FindingState> states) {
    for (const auto& s : states) insert(s);
}

void FindingSet::insert(FindingState state) {
    if (!is_finding_identifier(state.finding)) {
        throw ParameterError("invalid finding identifier '" + state.finding + "'");
    }
    FindingKey key{state.finding, state.location};
    if (!states_.emplace(std::move(key), std::move(state)).second) {
        throw ParameterError("duplicate finding state");
    }
}

InstructionSet parse_instruction(std::string_view text) {
    InstructionSet out;
    for (const auto& words : split_clauses(text)) {
        const std::string clause_text = join(words, 0, words.size(), ' ');
        EditInstruction instr = parse_clause(words, clause_text);
        try {
            out.push_back(std::move(instr));
        } catch (const ParameterError& e) {
            throw ParseError(e.what(), clause_text);
        }
    }
    return out;
}

std::string render_clause(const EditInstruction& instruction) {
    std::string out;
    if (instruction.operation == Operation::ChangeLevel) {
        out = "change the level of ";
        if (instruction.location) out += spaced(to_string(*instruction.location)) + " ";
        out += spaced(instruction.finding);
        out += " to ";
        out += to_string(*instruction.severity);
        return out;
    }
    out = instruction.operation == Operation::Add ? "add " : "remove ";
    if (instruction.severity) out += std::string(to_string(*instruction.severity)) + " ";
    if (instruction.location) out += spaced(to_string(*instruction.location)) + " ";
    out += spaced(instruction.finding);
    return out;
}

std::string render_instruction(const InstructionSet& instructions) {
    std::string out;
    for (std::size_t i = 0; i < instructions.size(); ++i) {
        if (i > 0) out += " and then ";
        out += render_clause(instructions[i]);
    }
    return out;
}

InstructionSet generate_instructions(const FindingSet& past, const FindingSet& current) {
    std::vector<EditInstruction> diff;
    for (const auto& [key, state] : current.states()) {
        auto it = past.states().find(key);
        if (it == past.states().end()) {
            diff.push_back({Operation::Add, state.finding, state.location, state.severity});
        } else if (it->second.severity != state.severity && it->second.severity && state.severity) {
            diff.push_back({Operation::ChangeLevel, state.finding, state.location, state.severity});
        }
    }
    for (const auto& [key, state] : past.states()) {
        if (!current.states().contains(key)) {
            diff.push_back({Operation::Remove, state.finding, state.location, state.severity});
        }
    }
    std::sort(diff.begin(), diff.end(), [](const EditInstruction& a, const EditInstruction& b) {
        return std::forward_as_tuple(a.operation, a.finding, location_sort_key(a.location)) <
               std::forward_as_tuple(b.operation, b.finding, location_sort_key(b.location));
    });
    return InstructionSet(std::move(diff));
}

} // namespace cfedit
