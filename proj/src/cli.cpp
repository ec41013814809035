// Copyright 2026 The svcca-toolkit Authors
//
// Licensed under the Apache License, Version 2.0

#include "svcca/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "svcca/errors.hpp"
#include "svcca/report.hpp"
#include "svcca/selftest.hpp"
#include "svcca/synthetic.hpp"

namespace svcca::cli {

namespace {

using nlohmann::ordered_json;
namespace fs = std::filesystem;

int parse_non_negative(const std::string& text, const char* what) {
    try {
        std::size_t used = 0;
        const int v = std::stoi(text, &used);
        if (used == text.size() && v >= 0) {
            return v;
        }
    } catch (const std::exception&) {
    }
    throw ConfigError(std::string("bad ") + what + " id '" + text + "'");
}

// Collects every file a report depends on, with its digest.
class InputLog {
public:
    void add(const fs::path& path) {
        const std::string key = path.lexically_normal().string();
        if (seen_.insert(key).second) {
            ordered_json e;
            e["path"] = key;
            e["bytes"] = fs::file_size(path);
            e["sha256"] = report::sha256_file(path);
            entries_.push_back(std::move(e));
        }
    }

    void add_run(const RunManifest& run) {
        add(run.manifest_path());
        for (const auto& e : run.entries()) {
            add(e.path);
        }
    }

    const ordered_json& entries() const { return entries_; }

private:
    std::set<std::string> seen_;
    ordered_json entries_ = ordered_json::array();
};

ordered_json header(const AnalysisJob& job) {
    ordered_json doc;
    doc["tool"] = report::kToolName;
    doc["version"] = report::kToolVersion;
    doc["command"] = to_string(job.command);
    return doc;
}

std::optional<ordered_json> load_metrics(const AnalysisJob& job, InputLog& inputs) {
    if (!job.metrics_fixture) {
        return std::nullopt;
    }
    std::ifstream in(*job.metrics_fixture);
    if (!in) {
        throw ConfigError("cannot open metrics fixture " + job.metrics_fixture->string());
    }
    ordered_json doc;
    try {
        doc = ordered_json::parse(in);
    } catch (const ordered_json::parse_error& e) {
        throw ConfigError("metrics fixture " + job.metrics_fixture->string() +
                          " is not valid JSON: " + e.what());
    }
    if (!doc.is_object()) {
        throw ConfigError("metrics fixture must be a JSON object mapping run to metrics");
    }
    inputs.add(*job.metrics_fixture);
    return doc;
}

ordered_json metrics_json(const std::optional<ordered_json>& metrics) {
    return metrics ? *metrics : ordered_json(nullptr);
}

std::map<int, double> mean_per_layer(const std::vector<TrajectorySeries>& series) {
    std::map<int, double> out;
    for (const auto& s : series) {
        double sum = 0.0;
        for (const auto& p : s.points) {
            sum += p.mean_coefficient;
        }
        out[s.layer] = sum / static_cast<double>(s.points.size());
    }
    return out;
}

std::string series_csv(const std::vector<TrajectorySeries>& series) {
    std::ostringstream csv;
    report::write_series_csv(csv, series);
    return csv.str();
}

void write_json(const fs::path& path, const ordered_json& doc) {
    report::write_text(path, doc.dump(2) + "\n");
}

std::vector<int> sorted_union(const std::vector<int>& a, const std::vector<int>& b) {
    std::set<int> s(a.begin(), a.end());
    s.insert(b.begin(), b.end());
    return {s.begin(), s.end()};
}

std::vector<std::string> do_compare_runs(const AnalysisJob& job, InputLog& inputs,
                                         ordered_json& summary) {
    if (job.inputs.size() != 2) {
        throw ConfigError("compare-runs needs --a and --b");
    }
    const RunManifest a = load_run(job.inputs[0]);
    const RunManifest b = load_run(job.inputs[1]);
    inputs.add_run(a);
    inputs.add_run(b);
    auto metrics = load_metrics(job, inputs);

    const auto layers = parse_id_list(job.layers, "layer");
    const auto epochs = parse_epoch_spec(job.epochs, sorted_union(a.epochs(), b.epochs()));
    const CrossModelResult result = cross_model_series(a, b, layers, epochs, job.cfg, job.align,
                                                       job.jobs, job.comparison_id);

    report::write_text(job.output_dir / "series.csv", series_csv(result.series));

    summary["comparison_id"] = result.series.front().comparison_id;
    summary["mode"] = to_string(SeriesMode::CrossModel);
    summary["runs"] = {{"a", a.model_id()}, {"b", b.model_id()}};
    summary["config"] = report::to_json(job.cfg);
    summary["alignment"] = {{"policy", job.align == EpochAlignment::Strict ? "strict" : "truncate"},
                            {"epochs", result.epochs},
                            {"dropped_epochs", result.dropped_epochs}};
    std::vector<int> used_layers;
    for (const auto& s : result.series) {
        used_layers.push_back(s.layer);
    }
    summary["layers"] = used_layers;
    summary["mean_per_layer"] = report::per_layer_json(mean_per_layer(result.series));
    summary["deviation"] = report::to_json(layer_deviation(result.series));
    summary["metrics"] = metrics_json(metrics);
    return {"series.csv", "summary.json"};
}

std::vector<std::string> do_convergence(const AnalysisJob& job, InputLog& inputs,
                                        ordered_json& summary) {
    if (job.inputs.empty()) {
        throw ConfigError("convergence needs at least one --run");
    }
    std::vector<RunManifest> runs;
    for (const auto& p : job.inputs) {
        runs.push_back(load_run(p));
        inputs.add_run(runs.back());
    }
    auto metrics = load_metrics(job, inputs);
    const auto layers = parse_id_list(job.layers, "layer");
    std::vector<int> all_epochs;
    for (const auto& r : runs) {
        all_epochs = sorted_union(all_epochs, r.epochs());
    }
    const auto epochs = parse_epoch_spec(job.epochs, all_epochs);

    summary["mode"] = to_string(SeriesMode::WithinModel);
    summary["reference"] = "final_epoch";
    summary["config"] = report::to_json(job.cfg);

    std::vector<TrajectorySeries> all_series;
    ordered_json run_docs = ordered_json::array();
    if (runs.size() == 1) {
        auto series = convergence_series(runs.front(), layers, epochs, job.cfg, job.jobs);
        ordered_json r;
        r["model_id"] = runs.front().model_id();
        r["final_epoch"] = runs.front().epochs().back();
        r["mean_per_layer"] = report::per_layer_json(mean_per_layer(series));
        r["deviation"] = report::to_json(layer_deviation(series));
        run_docs.push_back(std::move(r));
        all_series = std::move(series);
        summary["runs"] = std::move(run_docs);
    } else {
        const ConfigurationComparison cmp =
            compare_configurations(runs, layers, epochs, job.cfg, job.jobs, std::nullopt);
        for (std::size_t i = 0; i < cmp.bundles.size(); ++i) {
            const RunBundle& b = cmp.bundles[i];
            ordered_json r;
            r["model_id"] = b.model_id;
            r["final_epoch"] = runs[i].epochs().back();
            r["mean_per_layer"] = report::per_layer_json(b.mean_per_layer);
            r["deviation"] = report::to_json(b.deviation);
            r["final_layer_pairs"] = {{"epoch", b.final_pairs.epoch},
                                      {"mean", report::rounded(b.final_pair_mean)},
                                      {"spread", report::rounded(b.final_pair_spread)},
                                      {"matrix", report::to_json(b.final_pairs)}};
            run_docs.push_back(std::move(r));
            all_series.insert(all_series.end(), b.series.begin(), b.series.end());
        }
        summary["runs"] = std::move(run_docs);
        ordered_json ranking = ordered_json::array();
        for (std::size_t idx : cmp.ranking) {
            ranking.push_back(cmp.bundles[idx].model_id);
        }
        summary["ranking_statistic"] = "final_epoch_layer_pair_spread";
        summary["ranking"] = std::move(ranking);
    }
    summary["metrics"] = metrics_json(metrics);
    report::write_text(job.output_dir / "series.csv", series_csv(all_series));
    return {"series.csv", "summary.json"};
}

std::vector<std::string> do_layer_pairs(const AnalysisJob& job, InputLog& inputs,
                                        ordered_json& summary) {
    if (job.inputs.size() != 1) {
        throw ConfigError("layer-pairs needs exactly one --run");
    }
    const RunManifest run = load_run(job.inputs.front());
    inputs.add_run(run);
    auto metrics = load_metrics(job, inputs);
    const int epoch = job.epoch ? *job.epoch : run.epochs().back();
    std::vector<int> layers = parse_id_list(job.layers, "layer");
    if (!layers.empty()) {
        // Keep manifest order.
        std::vector<int> ordered;
        for (int l : run.layers()) {
            if (std::find(layers.begin(), layers.end(), l) != layers.end()) {
                ordered.push_back(l);
            }
        }
        for (int l : layers) {
            if (!run.has_layer(l)) {
                throw AlignmentError("run '" + run.model_id() + "' has no layer " +
                                     std::to_string(l));
            }
        }
        layers = std::move(ordered);
    }
    const LayerPairMatrix pairs = within_model_pairs(run, epoch, job.cfg, job.jobs, layers);

    std::ostringstream csv;
    report::write_pairs_csv(csv, pairs);
    report::write_text(job.output_dir / "layer_pairs.csv", csv.str());

    summary["config"] = report::to_json(job.cfg);
    summary["pairs"] = report::to_json(pairs);
    summary["metrics"] = metrics_json(metrics);
    return {"layer_pairs.csv", "summary.json"};
}

std::vector<std::string> do_deviation(const AnalysisJob& job, InputLog& inputs,
                                      ordered_json& summary) {
    std::vector<TrajectorySeries> series;
    if (job.series_csv) {
        series = report::read_series_csv(*job.series_csv);
        inputs.add(*job.series_csv);
    } else if (job.inputs.size() == 2) {
        const RunManifest a = load_run(job.inputs[0]);
        const RunManifest b = load_run(job.inputs[1]);
        inputs.add_run(a);
        inputs.add_run(b);
        series = cross_model_series(a, b, parse_id_list(job.layers, "layer"),
                                    parse_epoch_spec(job.epochs, sorted_union(a.epochs(), b.epochs())),
                                    job.cfg, job.align, job.jobs, job.comparison_id)
                     .series;
        summary["config"] = report::to_json(job.cfg);
    } else if (job.inputs.size() == 1) {
        const RunManifest run = load_run(job.inputs[0]);
        inputs.add_run(run);
        series = convergence_series(run, parse_id_list(job.layers, "layer"),
                                    parse_epoch_spec(job.epochs, run.epochs()), job.cfg, job.jobs);
        summary["config"] = report::to_json(job.cfg);
    } else {
        throw ConfigError("deviation needs --series, --run, or --a and --b");
    }
    if (series.empty()) {
        throw ConfigError("deviation: no series to summarise");
    }
    auto metrics = load_metrics(job, inputs);

    // One summary per comparison, in order of first appearance.
    std::vector<std::string> order;
    std::map<std::string, std::vector<TrajectorySeries>> groups;
    for (auto& s : series) {
        if (!groups.count(s.comparison_id)) {
            order.push_back(s.comparison_id);
        }
        groups[s.comparison_id].push_back(std::move(s));
    }
    ordered_json deviations = ordered_json::array();
    for (const auto& id : order) {
        deviations.push_back(report::to_json(layer_deviation(groups[id])));
    }
    summary["deviations"] = std::move(deviations);
    summary["metrics"] = metrics_json(metrics);
    return {"summary.json"};
}

std::vector<std::string> do_gen_synthetic(const AnalysisJob& job, InputLog& inputs) {
    if (!job.spec) {
        throw ConfigError("gen-synthetic needs --spec");
    }
    std::ifstream in(*job.spec);
    if (!in) {
        throw ConfigError("cannot open spec " + job.spec->string());
    }
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("spec " + job.spec->string() + " is not valid JSON: " + e.what());
    }
    inputs.add(*job.spec);
    const RunManifest run =
        synthetic::gen_synthetic_run(synthetic::run_spec_from_json(doc), job.output_dir);
    std::vector<std::string> outputs{"manifest.json"};
    for (const auto& e : run.entries()) {
        outputs.push_back(e.raw_path);
    }
    return outputs;
}

}  // namespace

std::string to_string(Command command) {
    switch (command) {
        case Command::CompareRuns: return "compare-runs";
        case Command::LayerPairs: return "layer-pairs";
        case Command::Convergence: return "convergence";
        case Command::Deviation: return "deviation";
        case Command::GenSynthetic: return "gen-synthetic";
        case Command::Selftest: return "selftest";
    }
    return "unknown";
}

std::vector<int> parse_id_list(const std::string& text, const char* what) {
    if (text == "all" || text.empty()) {
        return {};
    }
    std::set<int> ids;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) {
            throw ConfigError(std::string("empty ") + what + " item in '" + text + "'");
        }
        const auto dash = item.find('-');
        if (dash == std::string::npos) {
            ids.insert(parse_non_negative(item, what));
        } else {
            const int lo = parse_non_negative(item.substr(0, dash), what);
            const int hi = parse_non_negative(item.substr(dash + 1), what);
            if (lo > hi) {
                throw ConfigError(std::string("descending ") + what + " range '" + item + "'");
            }
            for (int i = lo; i <= hi; ++i) {
                ids.insert(i);
            }
        }
    }
    return {ids.begin(), ids.end()};
}

std::vector<int> parse_epoch_spec(const std::string& text, const std::vector<int>& available) {
    constexpr std::string_view kFirst = "first-";
    if (text.rfind(kFirst, 0) == 0) {
        const int n = parse_non_negative(text.substr(kFirst.size()), "epoch count");
        if (n < 1) {
            throw ConfigError("first-N needs N >= 1");
        }
        std::vector<int> sorted = available;
        std::sort(sorted.begin(), sorted.end());
        sorted.resize(std::min(sorted.size(), static_cast<std::size_t>(n)));
        return sorted;
    }
    return parse_id_list(text, "epoch");
}

int default_jobs() {
    if (const char* env = std::getenv(kJobsEnv)) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) {
            return static_cast<int>(std::min<long>(v, 1024));
        }
    }
    return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

int selftest(std::ostream& out) {
    const auto results = selftest::run_all();
    return selftest::print_table(out, results) ? kOk : kNumericalFailure;
}

int run(const AnalysisJob& job, std::ostream& out, std::ostream& err) {
    try {
        if (job.command == Command::Selftest) {
            return selftest(out);
        }
        job.cfg.validate();
        if (job.output_dir.empty()) {
            throw ConfigError("--out is required");
        }
        fs::create_directories(job.output_dir);

        InputLog inputs;
        ordered_json summary = header(job);
        std::vector<std::string> outputs;
        switch (job.command) {
            case Command::CompareRuns: outputs = do_compare_runs(job, inputs, summary); break;
            case Command::Convergence: outputs = do_convergence(job, inputs, summary); break;
            case Command::LayerPairs: outputs = do_layer_pairs(job, inputs, summary); break;
            case Command::Deviation: outputs = do_deviation(job, inputs, summary); break;
            case Command::GenSynthetic: outputs = do_gen_synthetic(job, inputs); break;
            case Command::Selftest: break;
        }
        if (job.command != Command::GenSynthetic) {
            write_json(job.output_dir / "summary.json", summary);
        }

        ordered_json log = header(job);
        log["argv"] = job.argv;
        log["config"] = report::to_json(job.cfg);
        log["jobs"] = job.jobs;
        log["inputs"] = inputs.entries();
        log["outputs"] = outputs;
        write_json(job.output_dir / "run_log.json", log);
        out << to_string(job.command) << ": wrote " << outputs.size() + 1 << " file(s) to "
            << job.output_dir.string() << '\n';
        return kOk;
    } catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << '\n';
        return kNumericalFailure;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return kValidationFailure;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kValidationFailure;
    }
}

int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"SVCCA similarity analysis of layer activations across models and epochs",
                 "svcca"};
    app.require_subcommand(1);
    app.set_version_flag("--version", report::kToolVersion);

    AnalysisJob job;
    job.jobs = default_jobs();
    for (int i = 0; i < argc; ++i) {
        job.argv.emplace_back(argv[i]);
    }
    std::string align = "strict";
    bool no_center = false;
    std::string a_path, b_path, out_dir, metrics, series, spec;
    std::vector<std::string> run_paths;
    int epoch = -1;

    auto add_config = [&](CLI::App* sub) {
        sub->add_option("--threshold", job.cfg.variance_threshold,
                        "variance fraction kept by SVD truncation")
            ->check(CLI::Range(0.0, 1.0));
        sub->add_option("--epsilon", job.cfg.regularization_epsilon,
                        "relative pivot floor when orthonormalizing a view");
        sub->add_flag("--no-center", no_center, "skip per-neuron mean removal");
        sub->add_option("--out", out_dir, "output directory")->required();
        sub->add_option("--jobs", job.jobs, "parallel similarity jobs (env SVCCA_JOBS)")
            ->check(CLI::PositiveNumber);
        sub->add_option("--metrics", metrics, "JSON fixture of external metrics to echo");
    };
    auto add_grid = [&](CLI::App* sub) {
        sub->add_option("--layers", job.layers, "layers: all | 1-6,9,12");
        sub->add_option("--epochs", job.epochs, "epochs: all | first-N | list");
    };

    auto* compare = app.add_subcommand("compare-runs", "same-layer similarity between two runs");
    compare->add_option("--a", a_path, "manifest of run A")->required();
    compare->add_option("--b", b_path, "manifest of run B")->required();
    compare->add_option("--align", align, "epoch alignment")
        ->check(CLI::IsMember({"strict", "truncate"}));
    compare->add_option("--id", job.comparison_id, "comparison id");
    add_config(compare);
    add_grid(compare);

    auto* pairs = app.add_subcommand("layer-pairs", "layer x layer similarity within one run");
    pairs->add_option("--run", run_paths, "run manifest")->required()->expected(1);
    pairs->add_option("--epoch", epoch, "epoch (default: final)");
    pairs->add_option("--layers", job.layers, "layers: all | 1-6,9,12");
    add_config(pairs);

    auto* conv = app.add_subcommand("convergence",
                                    "each layer against its final-epoch self; several runs are "
                                    "compared and ranked");
    conv->add_option("--run", run_paths, "run manifest (repeatable)")->required();
    add_config(conv);
    add_grid(conv);

    auto* dev = app.add_subcommand("deviation", "per-layer standard deviation of a series");
    dev->add_option("--series", series, "series.csv from a previous report");
    dev->add_option("--run", run_paths, "run manifest (convergence mode)");
    dev->add_option("--a", a_path, "manifest of run A (cross-model mode)");
    dev->add_option("--b", b_path, "manifest of run B (cross-model mode)");
    dev->add_option("--align", align, "epoch alignment")
        ->check(CLI::IsMember({"strict", "truncate"}));
    dev->add_option("--id", job.comparison_id, "comparison id");
    add_config(dev);
    add_grid(dev);

    auto* gen = app.add_subcommand("gen-synthetic", "write a synthetic run grid");
    gen->add_option("--spec", spec, "synthetic run spec (JSON)")->required();
    gen->add_option("--out", out_dir, "output directory")->required();

    auto* self = app.add_subcommand("selftest", "oracle and invariance self-checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kValidationFailure;
    }

    job.cfg.center = !no_center;
    job.align = align == "truncate" ? EpochAlignment::Truncate : EpochAlignment::Strict;
    job.output_dir = out_dir;
    if (!metrics.empty()) job.metrics_fixture = metrics;
    if (!series.empty()) job.series_csv = series;
    if (!spec.empty()) job.spec = spec;
    if (epoch >= 0) job.epoch = epoch;

    if (compare->parsed()) {
        job.command = Command::CompareRuns;
        job.inputs = {a_path, b_path};
    } else if (pairs->parsed()) {
        job.command = Command::LayerPairs;
        job.inputs.assign(run_paths.begin(), run_paths.end());
    } else if (conv->parsed()) {
        job.command = Command::Convergence;
        job.inputs.assign(run_paths.begin(), run_paths.end());
    } else if (dev->parsed()) {
        job.command = Command::Deviation;
        if (!a_path.empty() || !b_path.empty()) {
            if (a_path.empty() || b_path.empty()) {
                err << "error: deviation needs both --a and --b\n";
                return kValidationFailure;
            }
            job.inputs = {a_path, b_path};
        } else {
            job.inputs.assign(run_paths.begin(), run_paths.end());
        }
    } else if (gen->parsed()) {
        job.command = Command::GenSynthetic;
    } else if (self->parsed()) {
        job.command = Command::Selftest;
    }
    return run(job, out, err);
}

}  // namespace svcca::cli
