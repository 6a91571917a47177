// End-to-end checks of the command-line tool: exit codes, output files,
// replay identity, seed sweeps. Drives the real binary through the shell.
//
// Usage: cli_test <path-to-cli> <repo-root> <scratch-dir>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int g_failures = 0;

void check(bool ok, const std::string& what) {
    if (ok) {
        std::cout << "  ok: " << what << "\n";
    } else {
        ++g_failures;
        std::cout << "  FAILED: " << what << "\n";
    }
}

struct Invocation {
    int exit_code = -1;
    std::string stdout_text;
    std::string stderr_text;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

Invocation run_command(const std::string& command_line, const fs::path& scratch) {
    const fs::path out_file = scratch / "cmd_stdout.txt";
    const fs::path err_file = scratch / "cmd_stderr.txt";
    const std::string full =
        command_line + " > " + out_file.string() + " 2> " + err_file.string();
    int raw = std::system(full.c_str());
    Invocation r;
#ifdef _WIN32
    r.exit_code = raw;
#else
    r.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
#endif
    r.stdout_text = slurp(out_file);
    r.stderr_text = slurp(err_file);
    return r;
}

bool contains(const std::string& haystack, const std::string& needle) {
    return haystack.find(needle) != std::string::npos;
}

std::size_t line_count(const std::string& text) {
    std::size_t n = 0;
    for (char c : text)
        if (c == '\n') ++n;
    return n;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc != 4) {
        std::cerr << "usage: cli_test <cli> <repo-root> <scratch-dir>\n";
        return 2;
    }
    const std::string cli = argv[1];
    const fs::path root = argv[2];
    const fs::path scratch = argv[3];
    fs::remove_all(scratch);
    fs::create_directories(scratch);

    const std::string assembly = (root / "scenarios/assembly.json").string();
    const std::string packing = (root / "scenarios/packing.json").string();
    const std::string proactive = (root / "configs/proactive.json").string();
    const std::string reactive = (root / "configs/reactive.json").string();

    std::cout << "run writes metrics and a trace\n";
    const fs::path run1 = scratch / "run1";
    {
        auto r = run_command(cli + " run " + assembly + " " + proactive + " --out " +
                                 run1.string() + " --detector-trace",
                             scratch);
        check(r.exit_code == 0, "exit code 0");
        check(contains(r.stdout_text, "2/2 perceived errors detected"),
              "summary line reports 2/2");
        check(fs::exists(run1 / "metrics.json"), "metrics.json written");
        check(fs::exists(run1 / "metrics.csv"), "metrics.csv written");
        check(fs::exists(run1 / "trace.ndjson"), "trace.ndjson written");
        check(fs::exists(run1 / "detector_trace.csv"), "detector_trace.csv written");

        json m = json::parse(slurp(run1 / "metrics.json"));
        check(std::abs(m.at("mean_delay_s").get<double>() - 2.85) < 1e-9,
              "metrics.json mean delay 2.85");
        check(m.at("percent_detected").get<double>() == 100.0,
              "metrics.json percent detected 100");

        const std::string csv = slurp(run1 / "metrics.csv");
        check(contains(csv, "scenario,config,error_id,kind,detected,method,delay_s"),
              "metrics.csv header");
        check(line_count(csv) == 3, "metrics.csv one row per error");

        const std::string dt = slurp(run1 / "detector_trace.csv");
        check(contains(dt, "t,score,flagged,vote_fraction"), "detector trace header");
        check(line_count(dt) > 100, "detector trace has per-frame rows");
    }

    std::cout << "--format narrows the outputs\n";
    {
        const fs::path jdir = scratch / "json_only";
        auto r = run_command(cli + " run " + assembly + " " + proactive + " --out " +
                                 jdir.string() + " --format json --log-level quiet",
                             scratch);
        check(r.exit_code == 0, "json-only exit 0");
        check(r.stdout_text.empty(), "quiet run prints nothing");
        check(fs::exists(jdir / "metrics.json") && !fs::exists(jdir / "metrics.csv"),
              "json only");

        const fs::path cdir = scratch / "csv_only";
        run_command(cli + " run " + assembly + " " + proactive + " --out " + cdir.string() +
                        " --format csv --log-level quiet",
                    scratch);
        check(fs::exists(cdir / "metrics.csv") && !fs::exists(cdir / "metrics.json") &&
                  !fs::exists(cdir / "trace.ndjson"),
              "csv only");
    }

    std::cout << "replay recomputes identical metrics from the saved trace\n";
    {
        const fs::path rep = scratch / "replay1";
        auto r = run_command(
            cli + " replay " + (run1 / "trace.ndjson").string() + " --out " + rep.string(),
            scratch);
        check(r.exit_code == 0, "replay exit 0");
        check(slurp(rep / "metrics.json") == slurp(run1 / "metrics.json"),
              "replayed metrics.json byte-identical");
        check(slurp(rep / "metrics.csv") == slurp(run1 / "metrics.csv"),
              "replayed metrics.csv byte-identical");
    }

    std::cout << "reruns are deterministic\n";
    {
        const fs::path again = scratch / "run1_again";
        run_command(cli + " run " + assembly + " " + proactive + " --out " + again.string() +
                        " --log-level quiet",
                    scratch);
        check(slurp(again / "trace.ndjson") == slurp(run1 / "trace.ndjson"),
              "trace bytes identical across reruns");
        check(slurp(again / "metrics.json") == slurp(run1 / "metrics.json"),
              "metrics bytes identical across reruns");
    }

    std::cout << "validate accepts the shipped files and rejects junk\n";
    {
        auto ok = run_command(cli + " validate " + assembly + " " + packing + " " + proactive +
                                  " " + reactive,
                              scratch);
        check(ok.exit_code == 0, "shipped files validate");
        check(line_count(ok.stdout_text) == 4 && contains(ok.stdout_text, ": OK"),
              "one OK line per file");

        const fs::path bad = scratch / "bad_scenario.json";
        {
            std::ofstream f(bad);
            // Second action starts inside the first: the schema check must name it.
            f << R"({"schema":1,"task":"assembly","actions":[
                     {"id":"a","start":0,"duration_millis":5000},
                     {"id":"b","start":4000,"duration_millis":1000}],
                   "errors":[],"human":{}})";
        }
        auto rej = run_command(cli + " validate " + bad.string(), scratch);
        check(rej.exit_code == 2, "overlapping actions exit 2");
        check(contains(rej.stderr_text, "/actions"), "error names the offending field");

        auto missing = run_command(cli + " validate " + (scratch / "nope.json").string(),
                                   scratch);
        check(missing.exit_code == 2, "missing file exit 2");
    }

    std::cout << "compare aggregates across seeds\n";
    {
        const fs::path cmp = scratch / "cmp";
        auto r = run_command(cli + " compare " + assembly + " " + proactive + " " + reactive +
                                 " --seeds 1,2 --out " + cmp.string(),
                             scratch);
        check(r.exit_code == 0, "compare exit 0");
        json out = json::parse(slurp(cmp / "compare.json"));
        check(out.at("per_seed").size() == 2, "one row per seed");
        check(out.at("config_a") == "proactive" && out.at("config_b") == "reactive",
              "config labels recorded");

        double sum_a = 0, sum_b = 0;
        for (const auto& row : out.at("per_seed")) {
            sum_a += row.at("a").at("mean_delay_s").get<double>();
            sum_b += row.at("b").at("mean_delay_s").get<double>();
        }
        const auto& agg = out.at("aggregate");
        check(std::abs(agg.at("a_mean_delay_s").get<double>() - sum_a / 2) < 1e-9,
              "aggregate a mean matches per-seed rows");
        check(std::abs(agg.at("delta_mean_delay_s").get<double>() -
                       (sum_a / 2 - sum_b / 2)) < 1e-9,
              "aggregate delta is a minus b");
        check(agg.at("delta_mean_delay_s").get<double>() < 0,
              "verification beats waiting for the report");

        check(line_count(slurp(cmp / "compare.csv")) == 1 + 2 * 2,
              "csv has header plus two rows per seed");

        auto bad_seeds = run_command(cli + " compare " + assembly + " " + proactive + " " +
                                         reactive + " --seeds 9..5 --out " +
                                         (scratch / "cmp_bad").string(),
                                     scratch);
        check(bad_seeds.exit_code == 2, "backwards seed range exit 2");
    }

    std::cout << "sweep walks the detector grid\n";
    {
        const fs::path sw = scratch / "sweep";
        auto r = run_command(cli + " sweep " + packing + " " + proactive +
                                 " --vote-fraction 0.5,0.65 --boost-delta 0.25 --out " +
                                 sw.string(),
                             scratch);
        check(r.exit_code == 0, "sweep exit 0");
        json out = json::parse(slurp(sw / "sweep.json"));
        check(out.at("rows").size() == 2, "two grid points");
        check(line_count(slurp(sw / "sweep.csv")) == 3, "csv header plus two rows");

        auto empty = run_command(cli + " sweep " + packing + " " + proactive + " --out " +
                                     (scratch / "sweep_empty").string(),
                                 scratch);
        check(empty.exit_code == 2, "empty grid exit 2");
        check(contains(empty.stderr_text, "sweep grid is empty"), "empty grid message");

        auto invalid = run_command(cli + " sweep " + packing + " " + proactive +
                                       " --vote-fraction 1.5 --out " +
                                       (scratch / "sweep_bad").string(),
                                   scratch);
        check(invalid.exit_code == 2, "out-of-range knob exit 2");
    }

    std::cout << "seed override changes the run but stays deterministic\n";
    {
        const fs::path s1 = scratch / "seed_a";
        const fs::path s2 = scratch / "seed_b";
        run_command(cli + " run " + packing + " " + proactive + " --seed 99 --out " +
                        s1.string() + " --log-level quiet",
                    scratch);
        run_command(cli + " run " + packing + " " + proactive + " --seed 99 --out " +
                        s2.string() + " --log-level quiet",
                    scratch);
        check(slurp(s1 / "trace.ndjson") == slurp(s2 / "trace.ndjson"),
              "same override, same bytes");
        std::istringstream trace(slurp(s1 / "trace.ndjson"));
        std::string header;
        std::getline(trace, header);
        check(json::parse(header).at("scenario_seed").get<std::uint64_t>() == 99,
              "override recorded in the trace header");
    }

    std::cout << "interactive mode reads answers from stdin\n";
    {
        const fs::path idir = scratch / "interactive";
        // Deny the first query, wave off any later ones; EOF afterwards.
        std::string answers = "no something seems off";
        for (int i = 0; i < 8; ++i) answers += "\\nyes all good";
        auto r = run_command("printf '" + answers + "\\n' | " + cli + " run " + assembly +
                                 " " + proactive + " --interactive --out " + idir.string(),
                             scratch);
        check(r.exit_code == 0, "interactive exit 0");
        check(contains(r.stdout_text, "[robot] "), "query prompt shown");
        check(fs::exists(idir / "metrics.json"), "interactive run writes metrics");
    }

    std::cout << "bad invocations fail with exit 2\n";
    {
        check(run_command(cli + " frobnicate", scratch).exit_code == 2, "unknown subcommand");
        check(run_command(cli + " run " + assembly, scratch).exit_code == 2,
              "missing required argument");
        check(run_command(cli + " run " + assembly + " " + proactive + " --format yaml",
                          scratch)
                      .exit_code == 2,
              "unknown format");
        check(run_command(cli + " run " + (scratch / "ghost.json").string() + " " + proactive,
                          scratch)
                      .exit_code == 2,
              "nonexistent scenario");
        check(run_command(cli + " replay " + (run1 / "metrics.csv").string() + " --out " +
                              (scratch / "rep_bad").string(),
                          scratch)
                      .exit_code == 2,
              "replaying a non-trace file");
        auto help = run_command(cli + " --help", scratch);
        check(help.exit_code == 0 && contains(help.stdout_text, "run"), "--help exits 0");
    }

    if (g_failures == 0) {
        std::cout << "cli_test: all checks passed\n";
        return 0;
    }
    std::cout << "cli_test: " << g_failures << " check(s) FAILED\n";
    return 1;
}
