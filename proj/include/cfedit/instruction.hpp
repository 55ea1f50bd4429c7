#pragma once

#include <compare>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cfedit/errors.hpp"

namespace cfedit {

enum class Operation { Add, Remove, ChangeLevel };

enum class Severity { Minimal, Small, Mild, Moderate, Severe, Large };

enum class Location {
    Left,
    Right,
    Bilateral,
    LeftLowerLobe,
    LeftUpperLobe,
    RightLowerLobe,
    RightUpperLobe,
    RightBase,
    LeftBase,
    CardiacRegion,
};

// Snake-case identifiers ("add", "change_level", "left_lower_lobe", ...).
std::string_view to_string(Operation op);
std::string_view to_string(Severity severity);
std::string_view to_string(Location location);

std::optional<Operation> parse_operation(std::string_view token);
std::optional<Severity> parse_severity(std::string_view token);
std::optional<Location> parse_location(std::string_view token);

const std::vector<Severity>& all_severities();
const std::vector<Location>& all_locations();

// The eight annotated findings of the reference grounding set.
const std::vector<std::string>& known_findings();

// Lowercase snake-case: [a-z0-9]+(_[a-z0-9]+)*
bool is_finding_identifier(std::string_view token);

struct EditInstruction {
    Operation operation;
    std::string finding;
    std::optional<Location> location;
    std::optional<Severity> severity;

    // Throws ParameterError on an invalid finding or a ChangeLevel without severity.
    void validate() const;

    friend bool operator==(const EditInstruction&, const EditInstruction&) = default;
};

// Ordered instructions with no repeated (operation, finding, location).
class InstructionSet {
public:
    InstructionSet() = default;
    explicit InstructionSet(std::vector<EditInstruction> items);

    void push_back(EditInstruction item);

    bool empty() const noexcept { return items_.empty(); }
    std::size_t size() const noexcept { return items_.size(); }
    const EditInstruction& operator[](std::size_t i) const { return items_[i]; }
    auto begin() const noexcept { return items_.begin(); }
    auto end() const noexcept { return items_.end(); }
    const std::vector<EditInstruction>& items() const noexcept { return items_; }

    friend bool operator==(const InstructionSet&, const InstructionSet&) = default;

private:
    std::vector<EditInstruction> items_;
};

struct FindingKey {
    std::string finding;
    std::optional<Location> location;

    friend auto operator<=>(const FindingKey&, const FindingKey&) = default;
};

struct FindingState {
    std::string finding;
    std::optional<Location> location;
    std::optional<Severity> severity;

    friend bool operator==(const FindingState&, const FindingState&) = default;
};

// At most one state per (finding, location).
class FindingSet {
public:
    FindingSet() = default;
    FindingSet(std::initializer_list<FindingState> states);

    // Throws ParameterError on a duplicate key or an invalid finding.
    void insert(FindingState state);

    bool empty() const noexcept { return states_.empty(); }
    std::size_t size() const noexcept { return states_.size(); }
    const std::map<FindingKey, FindingState>& states() const noexcept { return states_; }

private:
    std::map<FindingKey, FindingState> states_;
};

/// Parses instruction text. Clauses are separated by " and then " or ";".
/// Clause grammar:
///   add [severity] [location] <finding>
///   remove [severity] [location] <finding>
///   change the level of [location] <finding> to <severity>
/// Unknown severity or location words become part of the finding.
/// Throws ParseError naming the offending clause.
InstructionSet parse_instruction(std::string_view text);

// Canonical surface form; parse_instruction inverts it.
std::string render_instruction(const InstructionSet& instructions);
std::string render_clause(const EditInstruction& instruction);

/// Longitudinal diff of two finding sets. Keys only in `current` become Add,
/// keys only in `past` become Remove, keys whose severity changed become
/// ChangeLevel to the current severity. Ordered Add, Remove, ChangeLevel and
/// by (finding, location) within each group.
InstructionSet generate_instructions(const FindingSet& past, const FindingSet& current);

} // namespace cfedit
