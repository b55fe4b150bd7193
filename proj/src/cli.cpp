#include "mhc/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "mhc/errors.hpp"
#include "mhc/json_io.hpp"
#include "mhc/planner.hpp"
#include "mhc/random_matrix.hpp"
#include "mhc/report.hpp"
#include "mhc/train.hpp"

namespace mhc::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Missing inputs are configuration errors (exit 2), unlike write failures.
struct MissingInput : ValidationError {
    using ValidationError::ValidationError;
};

std::string utc_timestamp() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream o;
    o << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return o.str();
}

std::vector<std::size_t> parse_size_list(const std::string& text, const std::string& flag) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) throw ValidationError(flag + ": empty list element");
        std::size_t pos = 0;
        unsigned long long v = 0;
        try {
            v = std::stoull(item, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos != item.size() || item.front() == '-') throw ValidationError(flag + ": '" + item + "' is not a non-negative integer");
        out.push_back(static_cast<std::size_t>(v));
    }
    if (out.empty()) throw ValidationError(flag + ": expected a comma-separated list of integers");
    return out;
}

json load_json_file(const fs::path& path) {
    if (!fs::exists(path)) throw MissingInput("missing file: " + path.string());
    const std::string text = read_file(path);
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        std::size_t line = 1, col = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
            if (text[i] == '\n') ++line, col = 1;
            else ++col;
        }
        throw ValidationError(path.string() + ":" + std::to_string(line) + ":" + std::to_string(col) +
                              ": malformed JSON");
    }
}

void ensure_directory(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw fs::filesystem_error("cannot create output directory", dir, ec);
}

void write_json_file(const fs::path& path, const json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

// ---------------------------------------------------------------- theory

struct TheoryOptions {
    std::string spec_path;
    std::optional<std::size_t> seq_len, head_dim, trials;
    std::optional<std::string> heads;
    std::optional<std::uint64_t> seed;
    std::optional<double> rank_tol;
    std::string out_dir;
    bool json_out = false;
};

int cmd_theory(const TheoryOptions& o, std::ostream& out) {
    SweepSpec spec;
    if (!o.spec_path.empty()) spec = sweep_spec_from_json(load_json_file(o.spec_path));
    if (o.seq_len) spec.seq_len = *o.seq_len;
    if (o.head_dim) spec.head_dim = *o.head_dim;
    if (o.trials) spec.trials = *o.trials;
    if (o.heads) spec.head_counts = parse_size_list(*o.heads, "--heads");
    if (o.seed) spec.seed = *o.seed;
    if (o.rank_tol) spec.rank_tol = *o.rank_tol;
    spec.validate();

    const std::vector<KappaStats> stats = head_concat_sweep(spec);
    const std::string csv = kappa_stats_csv(stats);

    json rows = json::array();
    for (const KappaStats& s : stats)
        rows.push_back({{"h", s.heads},
                        {"D", s.embed_dim},
                        {"trials", s.trials},
                        {"mean_kappa", number_or_flag(s.mean_kappa)},
                        {"std_kappa", number_or_flag(s.std_kappa)},
                        {"min", number_or_flag(s.min_kappa)},
                        {"max", number_or_flag(s.max_kappa)},
                        {"asymptotic_kappa", number_or_flag(s.asymptotic_kappa)},
                        {"rank_deficient", s.rank_deficient_count}});
    json summary = {{"command", "theory"}, {"spec", to_json(spec)}, {"rows", rows}};

    if (!o.out_dir.empty()) {
        ensure_directory(o.out_dir);
        write_file_atomic(fs::path(o.out_dir) / "theory.csv", csv);
        write_json_file(fs::path(o.out_dir) / "theory_summary.json", summary);
    }
    if (o.json_out) out << summary.dump(2) << '\n';
    else if (o.out_dir.empty()) out << csv;
    return kOk;
}

// ---------------------------------------------------------------- train

struct TrainOptions {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    bool json_out = false;
    bool save_params = false;
};

struct LoadedRun {
    ModelConfig model;
    TaskSpec task;
    TrainConfig train;
    std::optional<GridSpec> grid;
};

// The model inherits vocabulary, length and class count from the task unless
// the config says otherwise.
LoadedRun load_run_config(const json& j, std::optional<std::uint64_t> seed) {
    if (!j.is_object()) throw ValidationError("config: expected a JSON object");
    for (const auto& [key, value] : j.items())
        if (key != "model" && key != "task" && key != "train" && key != "grid")
            throw ValidationError("config: unknown field '" + key + "'");
    LoadedRun r;
    r.task = task_spec_from_json(j.value("task", json::object()));
    ModelConfig defaults;
    defaults.vocab_size = r.task.vocab_size;
    defaults.seq_len = r.task.seq_len;
    defaults.num_classes = r.task.num_classes();
    r.model = model_config_from_json(j.value("model", json::object()), defaults);
    TrainConfig td;
    if (seed) td.seed = td.init_seed = *seed;
    r.train = train_config_from_json(j.value("train", json::object()), td);
    if (seed) r.train.seed = r.train.init_seed = *seed;
    if (j.contains("grid")) r.grid = grid_spec_from_json(j.at("grid"));
    check_compatible(r.model, r.task);
    return r;
}

json resolved_config(const LoadedRun& r) {
    json j = {{"model", to_json(r.model)}, {"task", to_json(r.task)}, {"train", to_json(r.train)}};
    if (r.grid) j["grid"] = to_json(*r.grid);
    return j;
}

json run_summary(const RunResult& run) {
    json cond = json::array();
    for (const ConditioningReport& c : run.conditioning)
        cond.push_back({{"step", c.step},
                        {"mean_concat_kappa_across_layers", number_or_flag(c.mean_concat_kappa_across_layers)},
                        {"excluded_layers", c.excluded_layers},
                        {"rank_deficient_heads", c.rank_deficient_heads}});
    return json{{"config", {{"model", to_json(run.model)}, {"task", to_json(run.task)}, {"train", to_json(run.train)}}},
                {"steps", run.loss_curve.size()},
                {"param_count", run.param_count},
                {"final_train_loss", number_or_flag(run.final_train_loss)},
                {"final_eval_accuracy", run.final_eval_accuracy},
                {"final_mean_kappa", number_or_flag(run.final_mean_kappa())},
                {"conditioning", cond}};
}

// Writes the artifact set of one run; returns the file names written.
std::vector<std::string> write_run_dir(const fs::path& dir, const RunResult& run, const std::string& started,
                                       bool save_params) {
    ensure_directory(dir);
    std::vector<std::string> files = {"metrics.csv", "conditioning.csv", "summary.json"};
    write_file_atomic(dir / "metrics.csv", metrics_csv(run));
    write_file_atomic(dir / "conditioning.csv", conditioning_csv(run.conditioning));
    write_json_file(dir / "summary.json", run_summary(run));
    if (save_params) {
        std::ostringstream bin;
        save_parameters(bin, run.final_params);
        write_file_atomic(dir / "params.bin", bin.str());
        files.push_back("params.bin");
    }
    files.push_back("manifest.json");
    json manifest = {{"command", "train"},
                     {"config", {{"model", to_json(run.model)}, {"task", to_json(run.task)}, {"train", to_json(run.train)}}},
                     {"seeds", {{"train", run.train.seed}, {"init", run.train.init_seed}, {"task", run.task.seed}}},
                     {"tool_version", kToolVersion},
                     {"started_at", started},
                     {"finished_at", utc_timestamp()},
                     {"outputs", files}};
    write_json_file(dir / "manifest.json", manifest);
    return files;
}

std::string grid_dir_name(std::size_t depth, std::size_t heads, std::size_t seed_index) {
    return "depth" + std::to_string(depth) + "_heads" + std::to_string(heads) + "_seed" + std::to_string(seed_index);
}

int cmd_train(const TrainOptions& o, std::ostream& out) {
    const LoadedRun cfg = load_run_config(load_json_file(o.config_path), o.seed);
    const fs::path dir = o.out_dir;
    ensure_directory(dir);
    const std::string started = utc_timestamp();

    if (!cfg.grid) {
        RunResult run;
        try {
            run = train(cfg.model, cfg.task, cfg.train);
        } catch (const DivergenceError& e) {
            json diag = {{"error", "divergence"},
                         {"message", e.what()},
                         {"last_good_step", e.last_good_step()},
                         {"block", e.block()}};
            out << diag.dump(2) << '\n';
            return kNumericalError;
        }
        write_run_dir(dir, run, started, o.save_params);
        if (o.json_out) out << run_summary(run).dump(2) << '\n';
        return kOk;
    }

    const GridResult grid = depth_heads_grid(cfg.model, *cfg.grid, cfg.task, cfg.train);
    std::vector<std::string> outputs;
    CsvWriter csv({"depth", "heads", "params", "mean_acc", "std_acc", "final_mean_kappa"});
    json points = json::array();
    for (const GridPoint& p : grid.points) {
        for (std::size_t r = 0; r < p.runs.size(); ++r) {
            const std::string name = grid_dir_name(p.depth, p.heads, p.seed_indices[r]);
            for (const std::string& f : write_run_dir(dir / name, p.runs[r], started, o.save_params))
                outputs.push_back(name + "/" + f);
        }
        csv.add_row({std::to_string(p.depth), std::to_string(p.heads), std::to_string(p.param_count),
                     format_number(p.mean_acc), format_number(p.std_acc), format_number(p.final_mean_kappa)});
        points.push_back({{"depth", p.depth},
                          {"heads", p.heads},
                          {"params", p.param_count},
                          {"runs", p.runs.size()},
                          {"mean_acc", p.mean_acc},
                          {"std_acc", p.std_acc},
                          {"final_mean_kappa", number_or_flag(p.final_mean_kappa)}});
    }
    write_file_atomic(dir / "grid_summary.csv", csv.str());
    outputs.push_back("grid_summary.csv");

    json failures = json::array();
    for (const GridFailure& f : grid.failures)
        failures.push_back({{"depth", f.depth}, {"heads", f.heads}, {"seed_index", f.seed_index}, {"message", f.message}});
    outputs.push_back("manifest.json");
    json manifest = {{"command", "train"},
                     {"config", resolved_config(cfg)},
                     {"seeds", {{"train", cfg.train.seed}, {"init", cfg.train.init_seed}, {"task", cfg.task.seed}}},
                     {"tool_version", kToolVersion},
                     {"started_at", started},
                     {"finished_at", utc_timestamp()},
                     {"outputs", outputs},
                     {"failures", failures}};
    write_json_file(dir / "manifest.json", manifest);
    if (o.json_out) out << json{{"points", points}, {"failures", failures}}.dump(2) << '\n';
    return grid.failures.empty() ? kOk : kNumericalError;
}

// ---------------------------------------------------------------- plan

struct PlanOptions {
    std::string arch_path;
    std::string preset;
    std::optional<std::string> depths, heads;
    bool fixed_width = false;
    std::string mlp = "keep-hidden";
    std::string format = "csv";
    std::string out_dir;
    std::optional<std::uint64_t> seed;  // accepted for uniformity; counting is deterministic
    bool json_out = false;
};

std::string aligned_text(const std::vector<std::vector<std::string>>& rows) {
    std::vector<std::size_t> width;
    for (const auto& r : rows)
        for (std::size_t i = 0; i < r.size(); ++i) {
            if (width.size() <= i) width.push_back(0);
            width[i] = std::max(width[i], r[i].size());
        }
    std::ostringstream o;
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.size(); ++i) {
            if (i) o << "  ";
            o << std::setw(static_cast<int>(width[i])) << (i == 0 ? std::left : std::right) << r[i];
        }
        o << '\n';
    }
    return o.str();
}

int cmd_plan(const PlanOptions& o, std::ostream& out) {
    ArchSpec base;
    if (!o.arch_path.empty()) base = arch_spec_from_json(load_json_file(o.arch_path));
    else if (o.preset == "vit-base") base = vit_base();
    else if (!o.preset.empty()) throw ValidationError("--preset: unknown preset '" + o.preset + "'");
    else throw ValidationError("plan: give --arch FILE or --preset vit-base");
    if (o.mlp != "keep-hidden" && o.mlp != "keep-ratio") throw ValidationError("--mlp: expected keep-hidden or keep-ratio");
    if (o.format != "csv" && o.format != "text") throw ValidationError("--format: expected csv or text");

    std::vector<std::vector<std::string>> rows;
    json summary;
    if (!o.depths && !o.heads) {
        const ParamBreakdown b = count_params(base);
        rows.push_back({"component", "layer", "params"});
        auto add = [&rows](const std::string& c, const std::string& l, std::size_t v) {
            rows.push_back({c, l, std::to_string(v)});
        };
        add(base.image_mode() ? "patch_embed" : "token_embed", "", b.patch_or_token_embed);
        add("position_embed", "", b.position_embed);
        add("cls", "", b.cls);
        for (std::size_t i = 0; i < b.per_layer.size(); ++i) {
            add("qkv", std::to_string(i), b.per_layer[i].qkv);
            add("proj", std::to_string(i), b.per_layer[i].proj);
            add("mlp", std::to_string(i), b.per_layer[i].mlp);
            add("norms", std::to_string(i), b.per_layer[i].norms);
        }
        add("final_norm", "", b.final_norm);
        add("head", "", b.head);
        add("total", "", b.total);
        summary = {{"command", "plan"}, {"arch", to_json(base)}, {"total", b.total}};
    } else {
        if (!o.depths || !o.heads) throw ValidationError("plan: --depths and --heads must be given together");
        const auto depths = parse_size_list(*o.depths, "--depths");
        const auto heads = parse_size_list(*o.heads, "--heads");
        const auto table = tradeoff_table(base, depths, heads, !o.fixed_width,
                                          o.mlp == "keep-ratio" ? MlpPolicy::keep_ratio : MlpPolicy::keep_hidden);
        rows.push_back({"depth", "heads", "embed_dim", "head_dim", "mlp_hidden", "total_params", "delta_vs_base_percent"});
        json jrows = json::array();
        for (const TradeoffRow& r : table) {
            rows.push_back({std::to_string(r.depth), std::to_string(r.heads), std::to_string(r.embed_dim),
                            std::to_string(r.head_dim), std::to_string(r.mlp_hidden), std::to_string(r.total_params),
                            format_number(r.delta_vs_base_percent)});
            jrows.push_back({{"depth", r.depth},
                             {"heads", r.heads},
                             {"embed_dim", r.embed_dim},
                             {"head_dim", r.head_dim},
                             {"mlp_hidden", r.mlp_hidden},
                             {"total_params", r.total_params},
                             {"delta_vs_base_percent", r.delta_vs_base_percent}});
        }
        summary = {{"command", "plan"}, {"arch", to_json(base)}, {"base_total", count_params(base).total}, {"rows", jrows}};
    }

    std::string text;
    if (o.format == "csv") {
        CsvWriter csv(rows.front());
        for (std::size_t i = 1; i < rows.size(); ++i) csv.add_row(rows[i]);
        text = csv.str();
    } else {
        text = aligned_text(rows);
    }
    if (!o.out_dir.empty()) {
        ensure_directory(o.out_dir);
        write_file_atomic(fs::path(o.out_dir) / (o.format == "csv" ? "plan.csv" : "plan.txt"), text);
    }
    if (o.json_out) out << summary.dump(2) << '\n';
    else if (o.out_dir.empty()) out << text;
    return kOk;
}

// ---------------------------------------------------------------- report

struct ReportOptions {
    std::string run_dir;
    std::string out_dir;
    std::optional<std::uint64_t> seed;  // unused; uniform flag set
    bool json_out = false;
};

CsvTable load_csv(const fs::path& path) {
    if (!fs::exists(path)) throw MissingInput("missing file: " + path.string());
    return parse_csv(read_file(path));
}

std::string json_number_text(const json& v) {
    if (v.is_null()) return "nan";
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_float()) return format_number(v.get<double>());
    return v.dump();
}

int cmd_report(const ReportOptions& o, std::ostream& out) {
    const fs::path dir = o.run_dir;
    if (!fs::is_directory(dir)) throw MissingInput("missing run directory: " + dir.string());
    for (const char* name : {"manifest.json", "metrics.csv", "conditioning.csv", "summary.json"})
        if (!fs::exists(dir / name)) throw MissingInput("missing file: " + (dir / name).string());

    const json summary = load_json_file(dir / "summary.json");
    const json manifest = load_json_file(dir / "manifest.json");
    const CsvTable metrics = load_csv(dir / "metrics.csv");
    const CsvTable cond = load_csv(dir / "conditioning.csv");

    auto field = [&summary](const char* key) -> const json& {
        if (!summary.contains(key)) throw ValidationError("summary.json: missing field '" + std::string(key) + "'");
        return summary.at(key);
    };
    const std::string accuracy = json_number_text(field("final_eval_accuracy"));
    const std::string params = json_number_text(field("param_count"));
    const std::string kappa = json_number_text(field("final_mean_kappa"));
    const std::string loss = json_number_text(field("final_train_loss"));

    std::vector<std::vector<std::string>> rows = {
        {"run", dir.string()},
        {"steps", json_number_text(field("steps"))},
        {"param_count", params},
        {"final_train_loss", loss},
        {"final_eval_accuracy", accuracy},
        {"final_mean_kappa", kappa},
        {"tool_version", manifest.value("tool_version", std::string("?"))},
    };

    std::vector<std::string> charts;
    if (!o.out_dir.empty()) {
        ensure_directory(o.out_dir);
        Series loss_series{"train loss", {}, {}};
        const std::size_t step_col = metrics.column("step"), loss_col = metrics.column("loss");
        for (const auto& r : metrics.rows) {
            loss_series.x.push_back(std::stod(r[step_col]));
            loss_series.y.push_back(r[loss_col]);
        }
        write_file_atomic(fs::path(o.out_dir) / "loss.svg", svg_line_chart("Training loss", "step", "loss", {loss_series}));
        charts.push_back("loss.svg");

        Series kappa_series{"mean concat kappa", {}, {}};
        const std::size_t cstep = cond.column("step"), ckappa = cond.column("mean_concat_kappa_across_layers");
        std::string last_step;
        for (const auto& r : cond.rows) {
            if (r[cstep] == last_step) continue;
            last_step = r[cstep];
            kappa_series.x.push_back(std::stod(r[cstep]));
            kappa_series.y.push_back(r[ckappa]);
        }
        write_file_atomic(fs::path(o.out_dir) / "kappa.svg",
                          svg_line_chart("Attention conditioning", "step", "kappa", {kappa_series}, true));
        charts.push_back("kappa.svg");
    }

    if (o.json_out) {
        out << json{{"run", dir.string()},
                    {"param_count", field("param_count")},
                    {"final_eval_accuracy", field("final_eval_accuracy")},
                    {"final_train_loss", field("final_train_loss")},
                    {"final_mean_kappa", field("final_mean_kappa")},
                    {"metrics_rows", metrics.rows.size()},
                    {"conditioning_rows", cond.rows.size()},
                    {"charts", charts}}
                   .dump(2)
            << '\n';
    } else {
        out << aligned_text(rows);
        for (const std::string& c : charts) out << "wrote " << (fs::path(o.out_dir) / c).string() << '\n';
    }
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Condition-number experiments for multi-head attention", "mhc"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    TheoryOptions theory;
    auto* t = app.add_subcommand("theory", "Monte Carlo kappa of concatenated Gaussian head blocks");
    t->add_option("--spec", theory.spec_path, "SweepSpec JSON file")->check(CLI::ExistingFile);
    t->add_option("--N", theory.seq_len, "sequence length (rows)");
    t->add_option("--d", theory.head_dim, "head dimension");
    t->add_option("--heads", theory.heads, "comma-separated head counts");
    t->add_option("--trials", theory.trials, "trials per head count");
    t->add_option("--rank-tol", theory.rank_tol, "relative rank tolerance");
    t->add_option("--seed", theory.seed, "root seed");
    t->add_option("--out", theory.out_dir, "write theory.csv and theory_summary.json here");
    t->add_flag("--json", theory.json_out, "print the summary JSON to stdout");

    TrainOptions train_o;
    auto* tr = app.add_subcommand("train", "Train one configuration or a depth x heads grid");
    tr->add_option("config", train_o.config_path, "run config JSON")->required();
    tr->add_option("--out", train_o.out_dir, "run directory")->required();
    tr->add_option("--seed", train_o.seed, "overrides train.seed and train.init_seed");
    tr->add_flag("--json", train_o.json_out, "print the summary JSON to stdout");
    tr->add_flag("--save-params", train_o.save_params, "also write params.bin");

    PlanOptions plan;
    auto* pl = app.add_subcommand("plan", "Parameter breakdown and depth/heads trade-off tables");
    pl->add_option("--arch", plan.arch_path, "ArchSpec JSON file");
    pl->add_option("--preset", plan.preset, "built-in spec (vit-base)");
    pl->add_option("--depths", plan.depths, "comma-separated depths for a trade-off table");
    pl->add_option("--heads", plan.heads, "comma-separated head counts for a trade-off table");
    pl->add_flag("--fixed-width", plan.fixed_width, "keep embed_dim and split it across heads");
    pl->add_option("--mlp", plan.mlp, "keep-hidden or keep-ratio");
    pl->add_option("--format", plan.format, "csv or text");
    pl->add_option("--seed", plan.seed, "ignored; counting is deterministic");
    pl->add_option("--out", plan.out_dir, "write plan.csv / plan.txt here");
    pl->add_flag("--json", plan.json_out, "print the summary JSON to stdout");

    ReportOptions report;
    auto* rp = app.add_subcommand("report", "Summarize a run directory");
    rp->add_option("run_dir", report.run_dir, "directory written by train")->required();
    rp->add_option("--out", report.out_dir, "write loss.svg and kappa.svg here");
    rp->add_option("--seed", report.seed, "ignored");
    rp->add_flag("--json", report.json_out, "print the summary JSON to stdout");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        if (*t) return cmd_theory(theory, out);
        if (*tr) return cmd_train(train_o, out);
        if (*pl) return cmd_plan(plan, out);
        if (*rp) return cmd_report(report, out);
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kIoError;
    } catch (const DivergenceError& e) {
        err << "error: " << e.what() << '\n';
        return kNumericalError;
    } catch (const NumericalError& e) {
        err << "error: " << e.what() << '\n';
        return kNumericalError;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::domain_error& e) {
        err << "error: " << e.what() << '\n';
        return kConfigError;
    } catch (const json::exception& e) {
        err << "error: " << e.what() << '\n';
        return kConfigError;
    }
    return kConfigError;
}

}  // namespace mhc::cli
