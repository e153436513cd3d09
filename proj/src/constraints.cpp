#include "ccotom/constraints.hpp"

#include <fstream>
#include <sstream>

#include "ccotom/errors.hpp"

namespace ccotom::constraints {

const char* to_string(ConstraintKind k) {
    switch (k) {
        case ConstraintKind::Definitional: return "definitional";
        case ConstraintKind::Dependency: return "dependency";
    }
    return "?";
}

std::optional<ConstraintKind> parse_kind(const std::string& s) {
    if (s == "definitional") return ConstraintKind::Definitional;
    if (s == "dependency") return ConstraintKind::Dependency;
    return std::nullopt;
}

namespace {

std::vector<ConstraintSpec> builtin_specs() {
    using D = ToMDimension;
    using K = ConstraintKind;
    const auto big = DatasetFamily::BigToM;
    const auto fan = DatasetFamily::Fantom;
    return {
        {"bigtom.def.belief", big, K::Definitional, D::Belief,
         "Belief of {agent} is what {agent} believes about the state of the environment."},
        {"bigtom.def.percept", big, K::Definitional, D::Percept,
         "Percept of {agent} is whether or not {agent} perceives the causal event."},
        {"bigtom.def.causal_event", big, K::Definitional, D::Percept,
         "Causal event is the event that changes the state of the environment."},
        {"bigtom.def.action_past", big, K::Definitional, D::Action,
         "Action of {agent} is what {agent} does after the causal event."},
        {"bigtom.def.action_future", big, K::Definitional, D::Action,
         "Action of {agent} is what {agent} will do after the causal event."},
        {"bigtom.def.desire", big, K::Definitional, D::Desire,
         "Desire of {agent} is what {agent} wants."},
        {"bigtom.dep.belief", big, K::Dependency, D::Belief,
         "Belief of {agent} is determined by the percept of {agent}."},
        {"bigtom.dep.action", big, K::Dependency, D::Action,
         "Action of {agent} is determined by the belief of {agent} and the desire of {agent}."},
        {"fantom.def.percept", fan, K::Definitional, D::Percept,
         "The percept of {agent} about the fact question is whether or not {agent} perceives the "
         "information about the fact question."},
        {"fantom.dep.percept", fan, K::Dependency, D::Percept,
         "If {agent} is absent from the conversation where the information about the fact question "
         "is shared, {agent} does not perceive the information about the fact question. If {agent} "
         "is not absent from the conversation where the information about the fact question is "
         "shared, {agent} perceives the information about the fact question."},
        {"fantom.dep.belief", fan, K::Dependency, D::Belief,
         "What {agent} believes about the fact question is determined by the percept of {agent} "
         "about the fact question."},
    };
}

std::string replace_all(std::string text, const std::string& from, const std::string& to) {
    size_t pos = 0;
    while ((pos = text.find(from, pos)) != std::string::npos) {
        text.replace(pos, from.size(), to);
        pos += to.size();
    }
    return text;
}

}  // namespace

ConstraintRegistry::ConstraintRegistry(std::vector<ConstraintSpec> specs)
    : specs_(std::move(specs)) {}

ConstraintRegistry ConstraintRegistry::builtin() {
    return ConstraintRegistry(builtin_specs());
}

const ConstraintSpec& ConstraintRegistry::get(const std::string& id) const {
    for (const auto& spec : specs_) {
        if (spec.id == id) return spec;
    }
    throw UnknownConstraintId(id);
}

std::vector<ConstraintSpec> ConstraintRegistry::for_family(DatasetFamily family) const {
    std::vector<ConstraintSpec> out;
    for (const auto& spec : specs_) {
        if (spec.family == family) out.push_back(spec);
    }
    return out;
}

std::vector<ConstraintSpec> ConstraintRegistry::select(DatasetFamily family, TaskType task,
                                                       ToMDimension infer) const {
    using D = ToMDimension;
    using T = TaskType;
    auto pick = [&](std::initializer_list<const char*> ids) {
        std::vector<ConstraintSpec> out;
        for (const char* id : ids) out.push_back(get(id));
        return out;
    };
    if (family == DatasetFamily::BigToM) {
        switch (task) {
            case T::ForwardBelief:
                if (infer == D::Percept) return pick({"bigtom.def.percept", "bigtom.def.causal_event"});
                if (infer == D::Belief) return pick({"bigtom.def.belief", "bigtom.dep.belief"});
                break;
            case T::ForwardAction:
                if (infer == D::Percept) return pick({"bigtom.def.percept", "bigtom.def.causal_event"});
                if (infer == D::Belief) return pick({"bigtom.def.belief", "bigtom.dep.belief"});
                if (infer == D::Desire) return pick({"bigtom.def.desire"});
                if (infer == D::Action) return pick({"bigtom.def.action_future", "bigtom.dep.action"});
                break;
            case T::BackwardBelief:
                if (infer == D::Desire) return pick({"bigtom.def.desire"});
                if (infer == D::Action) return pick({"bigtom.def.action_past", "bigtom.def.causal_event"});
                if (infer == D::Belief) return pick({"bigtom.def.belief", "bigtom.dep.action"});
                break;
        }
    } else {
        if (task == T::ForwardBelief) {
            if (infer == D::Percept) return pick({"fantom.def.percept", "fantom.dep.percept"});
            if (infer == D::Belief) return pick({"fantom.dep.belief"});
        }
    }
    throw StepNotInChain(to_string(family), to_string(task), to_string(infer));
}

std::string render_constraints(const std::vector<ConstraintSpec>& specs, const std::string& agent) {
    std::ostringstream out;
    for (size_t i = 0; i < specs.size(); ++i) {
        if (i) out << '\n';
        out << replace_all(specs[i].template_text, "{agent}", agent);
    }
    return out.str();
}

void ConstraintRegistry::export_table(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write constraint table: " + path);
    out << "id\tfamily\tkind\tdimension\ttemplate\n";
    for (const auto& spec : specs_) {
        out << spec.id << '\t' << ccotom::to_string(spec.family) << '\t' << to_string(spec.kind)
            << '\t' << ccotom::to_string(spec.dimension) << '\t' << spec.template_text << '\n';
    }
}

ConstraintRegistry ConstraintRegistry::import_table(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read constraint table: " + path);
    std::string line;
    if (!std::getline(in, line) || line != "id\tfamily\tkind\tdimension\ttemplate")
        throw ConfigError("constraint table has unrecognized header: " + path);
    std::vector<ConstraintSpec> specs;
    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> cols;
        size_t start = 0;
        for (int i = 0; i < 4; ++i) {
            size_t tab = line.find('\t', start);
            if (tab == std::string::npos)
                throw ConfigError("constraint table row " + std::to_string(lineno) + " has too few columns");
            cols.push_back(line.substr(start, tab - start));
            start = tab + 1;
        }
        cols.push_back(line.substr(start));
        ConstraintSpec spec;
        spec.id = cols[0];
        if (cols[1] == "bigtom") spec.family = DatasetFamily::BigToM;
        else if (cols[1] == "fantom") spec.family = DatasetFamily::Fantom;
        else throw ConfigError("constraint table row " + std::to_string(lineno) + " has unknown family: " + cols[1]);
        auto kind = parse_kind(cols[2]);
        if (!kind) throw ConfigError("constraint table row " + std::to_string(lineno) + " has unknown kind: " + cols[2]);
        spec.kind = *kind;
        auto dim = parse_dimension(cols[3]);
        if (!dim) throw ConfigError("constraint table row " + std::to_string(lineno) + " has unknown dimension: " + cols[3]);
        spec.dimension = *dim;
        spec.template_text = cols[4];
        if (spec.id.empty() || spec.template_text.empty())
            throw ConfigError("constraint table row " + std::to_string(lineno) + " is incomplete");
        for (const auto& seen : specs) {
            if (seen.id == spec.id)
                throw ConfigError("constraint table row " + std::to_string(lineno) + " repeats id: " + spec.id);
        }
        specs.push_back(std::move(spec));
    }
    return ConstraintRegistry(std::move(specs));
}

}  // namespace ccotom::constraints
