#pragma once

#include <string>
#include <vector>

#include "ccotom/core.hpp"

namespace ccotom::constraints {

enum class ConstraintKind { Definitional, Dependency };

const char* to_string(ConstraintKind k);
std::optional<ConstraintKind> parse_kind(const std::string& s);

/// One constraint sentence with an {agent} placeholder. The template text is
/// fixed wording; rendering only substitutes the agent name.
struct ConstraintSpec {
    std::string id;
    DatasetFamily family = DatasetFamily::BigToM;
    ConstraintKind kind = ConstraintKind::Definitional;
    ToMDimension dimension = ToMDimension::Belief;
    std::string template_text;

    bool operator==(const ConstraintSpec&) const = default;
};

/// Holds the constraint catalogue: eight narrative-dataset entries and three
/// conversation-dataset entries by default, replaceable from a table file.
class ConstraintRegistry {
public:
    static ConstraintRegistry builtin();

    /// Reads a registry from a tab-separated table previously written by
    /// export_table. Throws ccotom::Error subclasses on malformed rows.
    static ConstraintRegistry import_table(const std::string& path);

    void export_table(const std::string& path) const;

    const std::vector<ConstraintSpec>& all() const { return specs_; }
    const ConstraintSpec& get(const std::string& id) const;
    std::vector<ConstraintSpec> for_family(DatasetFamily family) const;

    /// Constraint set attached to the step that infers `infer` within `task`,
    /// in prompt order. Throws StepNotInChain when the pair is not part of any
    /// chain for the family.
    std::vector<ConstraintSpec> select(DatasetFamily family, TaskType task,
                                       ToMDimension infer) const;

private:
    explicit ConstraintRegistry(std::vector<ConstraintSpec> specs);
    std::vector<ConstraintSpec> specs_;
};

/// Renders constraint sentences for one prompt: every {agent} occurrence is
/// replaced and the sentences are joined with single newlines.
std::string render_constraints(const std::vector<ConstraintSpec>& specs,
                               const std::string& agent);

}  // namespace ccotom::constraints
