#include "ccotom/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ccotom/datasets.hpp"
#include "ccotom/errors.hpp"
#include "ccotom/eval.hpp"
#include "ccotom/http_backend.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ccotom::cli {

namespace {

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << content;
}

std::unique_ptr<eval::Embedder> open_embedder(const std::string& spec) {
    if (spec == "test") return eval::make_embedder(json{{"type", "test"}});
    return eval::load_embedder(spec);
}

struct RunOutcome {
    int exit_code = 0;
    eval::EvalReport report;
};

RunOutcome run_once(const RunConfig& config) {
    auto examples = datasets::load(config.dataset_path, config.family);
    auto handle = backend::load_backend(config.backend_path);
    auto templates = config.templates_dir.empty()
                         ? prompting::TemplateLibrary::builtin()
                         : prompting::TemplateLibrary::load_directory(config.templates_dir);
    auto registry = config.constraints_path.empty()
                        ? constraints::ConstraintRegistry::builtin()
                        : constraints::ConstraintRegistry::import_table(config.constraints_path);

    chain::ChainSettings settings;
    settings.model = config.model_override.empty() ? handle.model : config.model_override;
    settings.ablation = config.ablation;
    chain::ChainExecutor executor(std::move(templates), std::move(registry), settings);

    const auto traces = executor.run_batch(examples, config.method, *handle.backend,
                                           config.workers);

    auto embedder = open_embedder(config.embedder);
    std::vector<eval::Verdict> verdicts;
    verdicts.reserve(examples.size());
    for (size_t i = 0; i < examples.size(); ++i) {
        verdicts.push_back(eval::score_answer(examples[i], traces[i].final_answer,
                                              traces[i].unparseable, traces[i].error.has_value(),
                                              *embedder, config.tau));
    }
    auto report = eval::aggregate(examples, verdicts, chain::to_string(config.method));

    fs::create_directories(config.out_dir);
    std::ostringstream trace_lines;
    for (const auto& t : traces) trace_lines << chain::trace_to_json(t).dump() << '\n';
    write_file(fs::path(config.out_dir) / "traces.jsonl", trace_lines.str());

    std::ostringstream verdict_lines;
    for (const auto& v : verdicts) verdict_lines << eval::verdict_to_json(v).dump() << '\n';
    write_file(fs::path(config.out_dir) / "verdicts.jsonl", verdict_lines.str());

    write_file(fs::path(config.out_dir) / "report.json", eval::report_to_json(report).dump(2) + "\n");
    const std::string table = eval::render_report_table(report);
    write_file(fs::path(config.out_dir) / "report.txt", table);
    if (!config.quiet) std::cout << table;

    const bool any_error = std::any_of(traces.begin(), traces.end(),
                                       [](const chain::ChainTrace& t) { return t.error.has_value(); });
    return {any_error ? 2 : 0, std::move(report)};
}

double headline_metric(const eval::EvalReport& report) {
    if (report.family == DatasetFamily::BigToM) {
        for (const auto& g : report.groups) {
            if (g.label == "overall.tb_and_fb") return g.accuracy;
        }
    }
    return report.overall_accuracy;
}

const char* headline_label(DatasetFamily family) {
    return family == DatasetFamily::BigToM ? "tb_and_fb" : "accuracy";
}

std::string fmt3(double v) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(3) << v;
    return out.str();
}

}  // namespace

int cmd_run(const RunConfig& config) { return run_once(config).exit_code; }

int cmd_ablate(const AblateConfig& config) {
    struct Entry {
        std::string name;
        RunConfig rc;
    };
    std::vector<Entry> entries;

    RunConfig base = config.base;
    base.method = chain::Method::CCoToM;
    base.ablation = {};
    base.quiet = true;

    Entry complete{"complete", base};
    complete.rc.out_dir = (fs::path(config.base.out_dir) / "complete").string();
    entries.push_back(complete);

    std::vector<ToMDimension> seen;
    for (ToMDimension dim : config.drop) {
        if (std::find(seen.begin(), seen.end(), dim) != seen.end()) continue;
        seen.push_back(dim);
        Entry e{"drop_" + dimension_word(dim), base};
        e.rc.ablation.dropped = {dim};
        e.rc.out_dir = (fs::path(config.base.out_dir) / e.name).string();
        entries.push_back(e);
    }
    if (config.no_constraints) {
        Entry e{"no_constraints", base};
        e.rc.ablation.drop_constraints = true;
        e.rc.out_dir = (fs::path(config.base.out_dir) / e.name).string();
        entries.push_back(e);
    }

    int exit_code = 0;
    std::vector<std::pair<std::string, double>> metrics;
    for (const auto& entry : entries) {
        RunOutcome outcome = run_once(entry.rc);
        exit_code = std::max(exit_code, outcome.exit_code);
        metrics.emplace_back(entry.name, headline_metric(outcome.report));
    }

    std::ostringstream summary;
    size_t width = 0;
    for (const auto& [name, _] : metrics) width = std::max(width, name.size());
    summary << std::left << std::setw(static_cast<int>(width) + 2) << "configuration"
            << std::setw(11) << headline_label(config.base.family) << "delta\n";
    const double baseline = metrics.front().second;
    for (size_t i = 0; i < metrics.size(); ++i) {
        summary << std::left << std::setw(static_cast<int>(width) + 2) << metrics[i].first
                << std::setw(11) << fmt3(metrics[i].second);
        if (i == 0) {
            summary << "-\n";
        } else {
            const double delta = metrics[i].second - baseline;
            summary << (delta >= 0 ? "+" : "") << fmt3(delta) << '\n';
        }
    }

    fs::create_directories(config.base.out_dir);
    write_file(fs::path(config.base.out_dir) / "summary.txt", summary.str());
    if (!config.base.quiet) std::cout << summary.str();
    return exit_code;
}

int cmd_score(const ScoreConfig& config) {
    auto examples = datasets::load(config.dataset_path, config.family);

    std::ifstream in(config.traces_path, std::ios::binary);
    if (!in) throw ConfigError("cannot read traces: " + config.traces_path);
    std::vector<chain::ChainTrace> traces;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            traces.push_back(chain::trace_from_json(json::parse(line)));
        } catch (const json::exception& e) {
            throw ConfigError("traces line " + std::to_string(lineno) + " is not valid json: " +
                              e.what());
        }
    }

    std::vector<ToMExample> ordered;
    ordered.reserve(traces.size());
    for (const auto& t : traces) ordered.push_back(datasets::find_example(examples, t.example_id));

    auto embedder = open_embedder(config.embedder);
    std::vector<eval::Verdict> verdicts;
    verdicts.reserve(traces.size());
    for (size_t i = 0; i < traces.size(); ++i) {
        verdicts.push_back(eval::score_answer(ordered[i], traces[i].final_answer,
                                              traces[i].unparseable,
                                              traces[i].error.has_value(), *embedder, config.tau));
    }

    std::string method = traces.empty() ? "none" : chain::to_string(traces.front().method);
    for (const auto& t : traces) {
        if (std::string(chain::to_string(t.method)) != method) {
            method = "mixed";
            break;
        }
    }
    auto report = eval::aggregate(ordered, verdicts, method);

    fs::create_directories(config.out_dir);
    std::ostringstream verdict_lines;
    for (const auto& v : verdicts) verdict_lines << eval::verdict_to_json(v).dump() << '\n';
    write_file(fs::path(config.out_dir) / "verdicts.jsonl", verdict_lines.str());
    write_file(fs::path(config.out_dir) / "report.json", eval::report_to_json(report).dump(2) + "\n");
    const std::string table = eval::render_report_table(report);
    write_file(fs::path(config.out_dir) / "report.txt", table);
    if (!config.quiet) std::cout << table;
    return 0;
}

namespace {

DatasetFamily family_from(const std::string& s) {
    if (s == "bigtom") return DatasetFamily::BigToM;
    if (s == "fantom") return DatasetFamily::Fantom;
    throw ConfigError("unknown family: " + s);
}

std::set<ToMDimension> dims_from(const std::vector<std::string>& words) {
    std::set<ToMDimension> out;
    for (const auto& w : words) {
        auto d = parse_dimension(w);
        if (!d) throw ConfigError("unknown dimension: " + w);
        out.insert(*d);
    }
    return out;
}

int cmd_dataset_validate(const std::string& path, DatasetFamily family) {
    const auto diagnostics = datasets::validate_file(path, family);
    for (const auto& d : diagnostics) std::cout << d << '\n';
    if (!diagnostics.empty()) {
        std::cout << diagnostics.size() << " problem(s) found\n";
        return 1;
    }
    const auto examples = datasets::load(path, family);
    std::cout << "ok: " << examples.size() << " examples\n";
    return 0;
}

int cmd_templates_export(const std::string& dir) {
    const auto lib = prompting::TemplateLibrary::builtin();
    lib.export_directory(dir);
    std::cout << "wrote " << lib.ids().size() << " templates to " << dir << '\n';
    return 0;
}

int cmd_templates_check(const std::string& dir) {
    const auto builtin = prompting::TemplateLibrary::builtin();
    const auto loaded = prompting::TemplateLibrary::load_directory(dir);
    int mismatches = 0;
    for (const auto& id : builtin.ids()) {
        if (!loaded.has(id)) {
            std::cout << "missing: " << id << '\n';
            ++mismatches;
        } else if (loaded.get(id).source() != builtin.get(id).source()) {
            std::cout << "differs: " << id << '\n';
            ++mismatches;
        }
    }
    for (const auto& id : loaded.ids()) {
        if (!builtin.has(id)) {
            std::cout << "extra: " << id << '\n';
            ++mismatches;
        }
    }
    if (mismatches) {
        std::cout << mismatches << " template(s) out of sync\n";
        return 1;
    }
    std::cout << "ok: " << builtin.ids().size() << " templates in sync\n";
    return 0;
}

int cmd_constraints_export(const std::string& path) {
    const auto registry = constraints::ConstraintRegistry::builtin();
    registry.export_table(path);
    std::cout << "wrote " << registry.all().size() << " constraints to " << path << '\n';
    return 0;
}

}  // namespace

int run(int argc, char** argv) {
    CLI::App app{"constrained theory-of-mind prompt chains over a chat-completions backend"};
    app.require_subcommand(1);

    std::string dataset_path, family = "bigtom", method = "ccotom", backend_path, out_dir;
    std::string model_override, embedder = "test", templates_dir, constraints_path, traces_path;
    std::vector<std::string> drop_words;
    bool no_constraints = false;
    int workers = 1;
    double tau = 0.4;

    auto add_dataset_opts = [&](CLI::App* cmd) {
        cmd->add_option("--dataset", dataset_path, "dataset jsonl file")
            ->required()
            ->check(CLI::ExistingFile);
        cmd->add_option("--family", family, "dataset family")
            ->check(CLI::IsMember({"bigtom", "fantom"}));
    };
    bool quiet = false;
    auto add_scoring_opts = [&](CLI::App* cmd) {
        cmd->add_option("--tau", tau, "distance threshold when no wrong answers exist");
        cmd->add_option("--embedder", embedder, "\"test\" or an embedder config json");
        cmd->add_option("--out", out_dir, "output directory")->required();
        cmd->add_flag("--quiet", quiet, "write files only, print nothing");
    };

    auto* run_cmd = app.add_subcommand("run", "run a dataset through a prompting method");
    add_dataset_opts(run_cmd);
    run_cmd->add_option("--method", method, "prompting method")
        ->check(CLI::IsMember({"ccotom", "onestep", "cot"}));
    run_cmd->add_option("--backend", backend_path, "backend config json")
        ->required()
        ->check(CLI::ExistingFile);
    run_cmd->add_option("--model", model_override, "override the config's model name");
    run_cmd->add_option("--workers", workers, "parallel workers")->check(CLI::PositiveNumber);
    run_cmd->add_option("--drop-dimension", drop_words, "ablation: drop this dimension's step")
        ->check(CLI::IsMember({"percept", "belief", "desire", "action"}));
    run_cmd->add_flag("--no-constraints", no_constraints, "ablation: strip constraint sentences");
    run_cmd->add_option("--templates", templates_dir, "directory replacing the built-in templates")
        ->check(CLI::ExistingDirectory);
    run_cmd
        ->add_option("--constraints-file", constraints_path,
                     "table replacing the built-in constraints")
        ->check(CLI::ExistingFile);
    add_scoring_opts(run_cmd);

    auto* ablate_cmd = app.add_subcommand("ablate", "compare ablated chains against the complete one");
    add_dataset_opts(ablate_cmd);
    ablate_cmd->add_option("--backend", backend_path, "backend config json")
        ->required()
        ->check(CLI::ExistingFile);
    ablate_cmd->add_option("--model", model_override, "override the config's model name");
    ablate_cmd->add_option("--workers", workers, "parallel workers")->check(CLI::PositiveNumber);
    ablate_cmd->add_option("--drop-dimension", drop_words, "dimension to drop in its own run")
        ->check(CLI::IsMember({"percept", "belief", "desire", "action"}));
    ablate_cmd->add_flag("--no-constraints", no_constraints, "add a constraint-free run");
    ablate_cmd->add_option("--templates", templates_dir, "directory replacing the built-in templates")
        ->check(CLI::ExistingDirectory);
    ablate_cmd
        ->add_option("--constraints-file", constraints_path,
                     "table replacing the built-in constraints")
        ->check(CLI::ExistingFile);
    add_scoring_opts(ablate_cmd);

    auto* score_cmd = app.add_subcommand("score", "rescore saved traces without backend calls");
    add_dataset_opts(score_cmd);
    score_cmd->add_option("--traces", traces_path, "traces.jsonl from a previous run")
        ->required()
        ->check(CLI::ExistingFile);
    add_scoring_opts(score_cmd);

    auto* dataset_cmd = app.add_subcommand("dataset", "dataset utilities");
    dataset_cmd->require_subcommand(1);
    auto* validate_cmd = dataset_cmd->add_subcommand("validate", "report every schema problem");
    add_dataset_opts(validate_cmd);

    auto* templates_cmd = app.add_subcommand("templates", "prompt template utilities");
    templates_cmd->require_subcommand(1);
    std::string template_out;
    auto* texport_cmd = templates_cmd->add_subcommand("export", "write built-in templates to a directory");
    texport_cmd->add_option("--dir", template_out, "target directory")->required();
    auto* tcheck_cmd = templates_cmd->add_subcommand("check", "compare a directory to the built-ins");
    tcheck_cmd->add_option("--dir", template_out, "directory to check")
        ->required()
        ->check(CLI::ExistingDirectory);

    auto* constraints_cmd = app.add_subcommand("constraints", "constraint catalogue utilities");
    constraints_cmd->require_subcommand(1);
    std::string constraints_out;
    auto* cexport_cmd = constraints_cmd->add_subcommand("export", "write the built-in constraint table");
    cexport_cmd->add_option("--out", constraints_out, "target file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (run_cmd->parsed()) {
            RunConfig rc;
            rc.dataset_path = dataset_path;
            rc.family = family_from(family);
            rc.method = *chain::parse_method(method);
            rc.ablation.dropped = dims_from(drop_words);
            rc.ablation.drop_constraints = no_constraints;
            rc.backend_path = backend_path;
            rc.model_override = model_override;
            rc.workers = workers;
            rc.out_dir = out_dir;
            rc.tau = tau;
            rc.embedder = embedder;
            rc.templates_dir = templates_dir;
            rc.constraints_path = constraints_path;
            rc.quiet = quiet;
            return cmd_run(rc);
        }
        if (ablate_cmd->parsed()) {
            AblateConfig ac;
            ac.base.dataset_path = dataset_path;
            ac.base.family = family_from(family);
            ac.base.backend_path = backend_path;
            ac.base.model_override = model_override;
            ac.base.workers = workers;
            ac.base.out_dir = out_dir;
            ac.base.tau = tau;
            ac.base.embedder = embedder;
            ac.base.templates_dir = templates_dir;
            ac.base.constraints_path = constraints_path;
            ac.base.quiet = quiet;
            for (const auto& w : drop_words) ac.drop.push_back(*parse_dimension(w));
            ac.no_constraints = no_constraints;
            return cmd_ablate(ac);
        }
        if (score_cmd->parsed()) {
            ScoreConfig sc;
            sc.dataset_path = dataset_path;
            sc.family = family_from(family);
            sc.traces_path = traces_path;
            sc.out_dir = out_dir;
            sc.tau = tau;
            sc.embedder = embedder;
            sc.quiet = quiet;
            return cmd_score(sc);
        }
        if (validate_cmd->parsed()) return cmd_dataset_validate(dataset_path, family_from(family));
        if (texport_cmd->parsed()) return cmd_templates_export(template_out);
        if (tcheck_cmd->parsed()) return cmd_templates_check(template_out);
        if (cexport_cmd->parsed()) return cmd_constraints_export(constraints_out);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}

}  // namespace ccotom::cli
