// Command-line front end: run scenarios against engine configs, A/B compare
// modes, sweep detector knobs, validate input files, and recompute metrics
// from saved traces.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "errsense/errsense.hpp"

namespace fs = std::filesystem;
using namespace errsense;

namespace {

enum class LogLevel { Quiet, Info, Debug };

struct GlobalOpts {
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed;
    std::string format = "both";  // json | csv | both
    LogLevel log = LogLevel::Info;

    bool want_json() const { return format != "csv"; }
    bool want_csv() const { return format != "json"; }
};

// Exit statuses: 0 ok, 2 user/validation error, 1 internal error.
constexpr int kOk = 0;
constexpr int kInternalError = 1;
constexpr int kUserError = 2;

class UserError : public std::runtime_error {
public:
    explicit UserError(const std::string& what) : std::runtime_error(what) {}
};

void ensure_out_dir(const GlobalOpts& g) { fs::create_directories(g.out_dir); }

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UserError("cannot write " + path.string());
    out << content;
}

Scenario load_scenario_checked(const std::string& path, const GlobalOpts& g) {
    Scenario sc = load_scenario(path);
    if (g.seed) sc.seed = *g.seed;
    return sc;
}

std::string one_line_summary(const RunMetrics& m) {
    int perceived = 0, detected = 0;
    for (const auto& r : m.per_error) {
        if (r.perceived) ++perceived;
        if (r.detected) ++detected;
    }
    std::string s = "scenario " + m.scenario + " config " + m.config + ": " +
                    std::to_string(detected) + "/" + std::to_string(perceived) +
                    " perceived errors detected";
    if (m.percent_detected) s += " (" + format_delay(m.percent_detected) + "%)";
    if (m.mean_delay_s) s += ", mean delay " + format_delay(m.mean_delay_s) + " s";
    s += ", queries " + std::to_string(m.query_count) + " (" +
         std::to_string(m.false_positive_queries) + " false-positive)";
    return s;
}

void report_run(const RunResult& result, const GlobalOpts& g) {
    if (g.log != LogLevel::Quiet) std::cout << one_line_summary(result.metrics) << "\n";
    if (g.log == LogLevel::Debug) {
        std::cerr << "candidates ignored by context gate: " << result.candidates_ignored
                  << ", dropped while busy: " << result.candidates_dropped << "\n";
        for (const auto& d : result.diagnostics) std::cerr << "diag: " << d << "\n";
    }
}

std::string detector_trace_csv(const std::vector<DetectorTraceRow>& rows) {
    std::string out = "t,score,flagged,vote_fraction\n";
    char buf[96];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%lld,%.6f,%d,%.6f\n",
                      static_cast<long long>(r.t.millis), r.score, r.flagged ? 1 : 0,
                      r.vote_fraction);
        out += buf;
    }
    return out;
}

int cmd_run(const std::string& scenario_path, const std::string& config_path,
            const GlobalOpts& g, bool interactive, bool dump_detector_trace) {
    Scenario scenario = load_scenario_checked(scenario_path, g);
    EngineConfig cfg = EngineConfig::load(config_path);

    RunOptions opts;
    if (interactive) {
        opts.interactive_responder =
            [](const std::string& query) -> std::optional<std::string> {
            std::cout << "[robot] " << query << "\n> " << std::flush;
            std::string line;
            if (!std::getline(std::cin, line) || line.empty()) return std::nullopt;
            return line;
        };
    }

    RunResult result = run_scenario(scenario, cfg, opts);
    ensure_out_dir(g);
    if (g.want_json()) {
        write_file(fs::path(g.out_dir) / "metrics.json", to_json(result.metrics).dump(2) + "\n");
        std::ostringstream trace;
        write_trace(trace, result.meta, result.trace);
        write_file(fs::path(g.out_dir) / "trace.ndjson", trace.str());
    }
    if (g.want_csv()) write_file(fs::path(g.out_dir) / "metrics.csv", to_csv(result.metrics));
    if (dump_detector_trace)
        write_file(fs::path(g.out_dir) / "detector_trace.csv",
                   detector_trace_csv(result.detector_trace));
    report_run(result, g);
    return kOk;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& spec) {
    std::vector<std::uint64_t> seeds;
    auto range_at = spec.find("..");
    try {
        if (range_at != std::string::npos) {
            std::uint64_t lo = std::stoull(spec.substr(0, range_at));
            std::uint64_t hi = std::stoull(spec.substr(range_at + 2));
            if (hi < lo) throw UserError("--seeds range is backwards: " + spec);
            for (std::uint64_t s = lo; s <= hi; ++s) seeds.push_back(s);
        } else {
            std::istringstream in(spec);
            std::string tok;
            while (std::getline(in, tok, ',')) {
                if (!tok.empty()) seeds.push_back(std::stoull(tok));
            }
        }
    } catch (const std::logic_error&) {
        throw UserError("cannot parse --seeds \"" + spec + "\"");
    }
    if (seeds.empty()) throw UserError("--seeds produced no seeds");
    return seeds;
}

std::string compare_csv_row(std::uint64_t seed, const RunMetrics& m) {
    return std::to_string(seed) + "," + m.config + "," + format_delay(m.percent_detected) + "," +
           format_delay(m.mean_delay_s) + "," + std::to_string(m.false_positive_queries) + "," +
           std::to_string(m.query_count) + "\n";
}

int cmd_compare(const std::string& scenario_path, const std::string& config_a,
                const std::string& config_b, const GlobalOpts& g,
                const std::string& seeds_spec) {
    Scenario scenario = load_scenario_checked(scenario_path, g);
    EngineConfig cfg_a = EngineConfig::load(config_a);
    EngineConfig cfg_b = EngineConfig::load(config_b);

    std::vector<std::uint64_t> seeds =
        seeds_spec.empty() ? std::vector<std::uint64_t>{scenario.seed}
                           : parse_seed_list(seeds_spec);

    json per_seed = json::array();
    std::string csv = "seed,config,percent_detected,mean_delay_s,false_positive_queries,query_count\n";
    double sum_delay_a = 0, sum_delay_b = 0, sum_pct_a = 0, sum_pct_b = 0;
    int n_delay_a = 0, n_delay_b = 0, n_pct_a = 0, n_pct_b = 0;
    RunMetrics last_a, last_b;

    for (std::uint64_t s : seeds) {
        Scenario run_sc = scenario;
        run_sc.seed = s;
        Comparison cmp = compare_configs(run_sc, cfg_a, cfg_b);
        last_a = cmp.a;
        last_b = cmp.b;
        per_seed.push_back({{"seed", s},
                            {"a", to_json(cmp.a)},
                            {"b", to_json(cmp.b)},
                            {"delta_mean_delay_s",
                             cmp.delta_mean_delay_s ? json(*cmp.delta_mean_delay_s) : json(nullptr)},
                            {"delta_percent_detected",
                             cmp.delta_percent_detected ? json(*cmp.delta_percent_detected)
                                                        : json(nullptr)}});
        csv += compare_csv_row(s, cmp.a);
        csv += compare_csv_row(s, cmp.b);
        if (cmp.a.mean_delay_s) { sum_delay_a += *cmp.a.mean_delay_s; ++n_delay_a; }
        if (cmp.b.mean_delay_s) { sum_delay_b += *cmp.b.mean_delay_s; ++n_delay_b; }
        if (cmp.a.percent_detected) { sum_pct_a += *cmp.a.percent_detected; ++n_pct_a; }
        if (cmp.b.percent_detected) { sum_pct_b += *cmp.b.percent_detected; ++n_pct_b; }
    }

    auto mean_or_null = [](double sum, int n) { return n ? json(sum / n) : json(nullptr); };
    json aggregate = {{"a_mean_delay_s", mean_or_null(sum_delay_a, n_delay_a)},
                      {"b_mean_delay_s", mean_or_null(sum_delay_b, n_delay_b)},
                      {"a_percent_detected", mean_or_null(sum_pct_a, n_pct_a)},
                      {"b_percent_detected", mean_or_null(sum_pct_b, n_pct_b)}};
    if (n_delay_a && n_delay_b)
        aggregate["delta_mean_delay_s"] = sum_delay_a / n_delay_a - sum_delay_b / n_delay_b;
    if (n_pct_a && n_pct_b)
        aggregate["delta_percent_detected"] = sum_pct_a / n_pct_a - sum_pct_b / n_pct_b;

    json out = {{"scenario", scenario.task_name},
                {"config_a", cfg_a.label},
                {"config_b", cfg_b.label},
                {"seeds", seeds},
                {"per_seed", std::move(per_seed)},
                {"aggregate", std::move(aggregate)}};

    ensure_out_dir(g);
    if (g.want_json()) write_file(fs::path(g.out_dir) / "compare.json", out.dump(2) + "\n");
    if (g.want_csv()) write_file(fs::path(g.out_dir) / "compare.csv", csv);

    if (g.log != LogLevel::Quiet) {
        std::cout << one_line_summary(last_a) << "\n" << one_line_summary(last_b) << "\n";
        if (aggregate.contains("delta_mean_delay_s"))
            std::cout << "delta mean delay (a-b): "
                      << format_delay(aggregate["delta_mean_delay_s"].get<double>()) << " s over "
                      << seeds.size() << " seed(s)\n";
    }
    return kOk;
}

std::vector<double> parse_double_list(const std::string& spec, const std::string& flag) {
    std::vector<double> vals;
    std::istringstream in(spec);
    std::string tok;
    try {
        while (std::getline(in, tok, ',')) {
            if (!tok.empty()) vals.push_back(std::stod(tok));
        }
    } catch (const std::logic_error&) {
        throw UserError("cannot parse " + flag + " \"" + spec + "\"");
    }
    return vals;
}

int cmd_sweep(const std::string& scenario_path, const std::string& config_path,
              const GlobalOpts& g, const std::string& fractions_spec,
              const std::string& deltas_spec, const std::string& decays_spec) {
    Scenario scenario = load_scenario_checked(scenario_path, g);
    EngineConfig base = EngineConfig::load(config_path);

    if (fractions_spec.empty() && deltas_spec.empty() && decays_spec.empty())
        throw UserError("sweep grid is empty: pass at least one of --vote-fraction, "
                        "--boost-delta, --decay-millis");
    auto axis = [&](const std::string& spec, const std::string& flag,
                    double fallback) -> std::vector<double> {
        if (spec.empty()) return {fallback};
        auto vals = parse_double_list(spec, flag);
        if (vals.empty()) throw UserError("sweep grid is empty: " + flag + " has no values");
        return vals;
    };
    const auto fractions = axis(fractions_spec, "--vote-fraction", base.detector.vote_fraction_base);
    const auto deltas = axis(deltas_spec, "--boost-delta", base.detector.boost_delta);
    const auto decays = axis(decays_spec, "--decay-millis",
                             static_cast<double>(base.detector.decay_millis));

    json rows = json::array();
    std::string csv =
        "vote_fraction_base,boost_delta,decay_millis,percent_detected,mean_delay_s,"
        "false_positive_queries,query_count,detections_unmatched\n";
    for (double f : fractions) {
        for (double d : deltas) {
            for (double dec : decays) {
                EngineConfig cfg = base;
                cfg.detector.vote_fraction_base = f;
                cfg.detector.boost_delta = d;
                cfg.detector.decay_millis = static_cast<Duration>(dec);
                cfg.detector.validate();
                RunMetrics m = run_scenario(scenario, cfg).metrics;
                rows.push_back({{"vote_fraction_base", f},
                                {"boost_delta", d},
                                {"decay_millis", cfg.detector.decay_millis},
                                {"percent_detected",
                                 m.percent_detected ? json(*m.percent_detected) : json(nullptr)},
                                {"mean_delay_s", m.mean_delay_s ? json(*m.mean_delay_s) : json(nullptr)},
                                {"false_positive_queries", m.false_positive_queries},
                                {"query_count", m.query_count},
                                {"detections_unmatched", m.detections_unmatched}});
                char buf[160];
                std::snprintf(buf, sizeof buf, "%.4f,%.4f,%lld,%s,%s,%d,%d,%d\n", f, d,
                              static_cast<long long>(cfg.detector.decay_millis),
                              format_delay(m.percent_detected).c_str(),
                              format_delay(m.mean_delay_s).c_str(), m.false_positive_queries,
                              m.query_count, m.detections_unmatched);
                csv += buf;
            }
        }
    }

    ensure_out_dir(g);
    json out = {{"scenario", scenario.task_name}, {"config", base.label}, {"rows", rows}};
    if (g.want_json()) write_file(fs::path(g.out_dir) / "sweep.json", out.dump(2) + "\n");
    if (g.want_csv()) write_file(fs::path(g.out_dir) / "sweep.csv", csv);
    if (g.log != LogLevel::Quiet)
        std::cout << "swept " << rows.size() << " grid point(s) on " << scenario.task_name << "\n";
    return kOk;
}

int cmd_validate(const std::vector<std::string>& paths, const GlobalOpts& g) {
    for (const auto& path : paths) {
        json j = load_json_file(path);
        if (j.is_object() && j.contains("schema") && j.contains("task")) {
            parse_scenario(j);
            if (g.log != LogLevel::Quiet) std::cout << path << ": OK (scenario)\n";
        } else if (j.is_object() && j.contains("mode")) {
            EngineConfig cfg = EngineConfig::load(path);
            QueryPool::load(cfg.query_pool_path);  // referenced files must hold up too
            if (g.log != LogLevel::Quiet) std::cout << path << ": OK (engine config)\n";
        } else {
            throw UserError(path + ": neither a scenario (schema/task) nor a config (mode)");
        }
    }
    return kOk;
}

int cmd_replay(const std::string& trace_path, const GlobalOpts& g) {
    LoadedTrace trace = read_trace_file(trace_path);
    RunMetrics m = metrics_from_trace(trace);
    ensure_out_dir(g);
    if (g.want_json())
        write_file(fs::path(g.out_dir) / "metrics.json", to_json(m).dump(2) + "\n");
    if (g.want_csv()) write_file(fs::path(g.out_dir) / "metrics.csv", to_csv(m));
    if (g.log != LogLevel::Quiet) std::cout << one_line_summary(m) << "\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"error-aware interaction engine: scenario runner and analysis tools"};
    app.require_subcommand(1);
    app.fallthrough();  // global options may follow the subcommand

    GlobalOpts g;
    app.add_option("--out", g.out_dir, "output directory (created if absent)");
    app.add_option("--seed", g.seed, "override the scenario seed");
    app.add_option("--format", g.format, "output format: json, csv, or both")
        ->check(CLI::IsMember({"json", "csv", "both"}));
    std::string log_level = "info";
    app.add_option("--log-level", log_level, "quiet, info, or debug")
        ->check(CLI::IsMember({"quiet", "info", "debug"}));

    std::string scenario_path, config_path, config_b_path, trace_path;
    std::vector<std::string> validate_paths;
    bool interactive = false, dump_detector = false;
    std::string seeds_spec, fractions_spec, deltas_spec, decays_spec;

    auto* run = app.add_subcommand("run", "run one scenario against one engine config");
    run->add_option("scenario", scenario_path, "scenario json")->required();
    run->add_option("config", config_path, "engine config json")->required();
    run->add_flag("--interactive", interactive, "answer verification queries on stdin");
    run->add_flag("--detector-trace", dump_detector, "also dump per-frame detector scores");

    auto* compare = app.add_subcommand("compare", "A/B two engine configs on one scenario");
    compare->add_option("scenario", scenario_path, "scenario json")->required();
    compare->add_option("config_a", config_path, "first engine config")->required();
    compare->add_option("config_b", config_b_path, "second engine config")->required();
    compare->add_option("--seeds", seeds_spec, "seed sweep, e.g. 0..19 or 3,5,8");

    auto* sweep = app.add_subcommand("sweep", "grid-sweep detector knobs on one scenario");
    sweep->add_option("scenario", scenario_path, "scenario json")->required();
    sweep->add_option("config", config_path, "engine config json")->required();
    sweep->add_option("--vote-fraction", fractions_spec, "comma list of vote_fraction_base");
    sweep->add_option("--boost-delta", deltas_spec, "comma list of boost_delta");
    sweep->add_option("--decay-millis", decays_spec, "comma list of decay_millis");

    auto* validate = app.add_subcommand("validate", "check scenario/config files");
    validate->add_option("paths", validate_paths, "files to validate")->required();

    auto* replay = app.add_subcommand("replay", "recompute metrics from a saved trace");
    replay->add_option("trace", trace_path, "trace.ndjson from a previous run")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return kUserError;
    }

    if (log_level == "quiet") g.log = LogLevel::Quiet;
    else if (log_level == "debug") g.log = LogLevel::Debug;

    try {
        if (run->parsed()) return cmd_run(scenario_path, config_path, g, interactive, dump_detector);
        if (compare->parsed())
            return cmd_compare(scenario_path, config_path, config_b_path, g, seeds_spec);
        if (sweep->parsed())
            return cmd_sweep(scenario_path, config_path, g, fractions_spec, deltas_spec,
                             decays_spec);
        if (validate->parsed()) return cmd_validate(validate_paths, g);
        if (replay->parsed()) return cmd_replay(trace_path, g);
    } catch (const UserError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUserError;
    } catch (const ScenarioError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUserError;
    } catch (const EngineConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUserError;
    } catch (const DetectorConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUserError;
    } catch (const QueryPoolError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUserError;
    } catch (const LexiconError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUserError;
    } catch (const TraceFormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUserError;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kInternalError;
    }
    return kInternalError;  // unreachable: a subcommand is required
}
