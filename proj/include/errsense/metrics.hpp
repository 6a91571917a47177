#pragma once

#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "errsense/json_io.hpp"
#include "errsense/scenario.hpp"

namespace errsense {

/// Ground truth for one injected error, as the run observed it.
struct ErrorRecord {
    std::string error_id;
    ErrorKind kind = ErrorKind::Physical;
    std::optional<Timestamp> t_occurred;  // empty if the script never got there
    bool perceived = true;
};

/// First line of a trace file: everything needed to recompute metrics from
/// the event lines that follow.
struct TraceMeta {
    int schema = 1;
    std::string scenario;
    std::string config;
    std::string mode;
    std::uint64_t scenario_seed = 0;
    std::uint64_t engine_seed = 0;
    std::vector<ErrorRecord> errors;

    json to_json() const {
        json rows = json::array();
        for (const auto& e : errors) {
            json r = {{"error_id", e.error_id},
                      {"kind", to_string(e.kind)},
                      {"perceived", e.perceived}};
            if (e.t_occurred) r["t_occurred"] = e.t_occurred->millis;
            else r["t_occurred"] = nullptr;
            rows.push_back(std::move(r));
        }
        return {{"kind", "meta"},     {"schema", schema},
                {"scenario", scenario}, {"config", config},
                {"mode", mode},       {"scenario_seed", scenario_seed},
                {"engine_seed", engine_seed}, {"errors", std::move(rows)}};
    }

    static TraceMeta from_json(const json& j) {
        if (!j.is_object() || j.value("kind", std::string{}) != "meta")
            throw TraceFormatError("trace must start with a meta line");
        TraceMeta m;
        try {
            m.schema = j.at("schema").get<int>();
            m.scenario = j.at("scenario").get<std::string>();
            m.config = j.at("config").get<std::string>();
            m.mode = j.at("mode").get<std::string>();
            m.scenario_seed = j.value("scenario_seed", std::uint64_t{0});
            m.engine_seed = j.value("engine_seed", std::uint64_t{0});
            for (const auto& r : j.at("errors")) {
                ErrorRecord e;
                e.error_id = r.at("error_id").get<std::string>();
                e.kind = r.at("kind").get<std::string>() == "conceptual" ? ErrorKind::Conceptual
                                                                         : ErrorKind::Physical;
                e.perceived = r.at("perceived").get<bool>();
                if (r.contains("t_occurred") && !r.at("t_occurred").is_null())
                    e.t_occurred = Timestamp{r.at("t_occurred").get<std::int64_t>()};
                m.errors.push_back(std::move(e));
            }
        } catch (const json::exception& e) {
            throw TraceFormatError(std::string("bad meta line: ") + e.what());
        }
        if (m.schema != 1) throw TraceFormatError("unsupported trace schema");
        return m;
    }
};

struct ErrorOutcomeRow {
    std::string error_id;
    ErrorKind kind = ErrorKind::Physical;
    bool perceived = true;
    bool detected = false;
    std::optional<DetectionMethod> method;
    std::optional<double> delay_s;            // signal time - occurrence
    std::optional<double> delay_confirmed_s;  // confirmation time - occurrence
};

struct RunMetrics {
    std::string scenario;
    std::string config;
    std::string mode;
    std::vector<ErrorOutcomeRow> per_error;

    // Aggregates; empty optionals mean "no data", not zero.
    std::optional<double> mean_delay_s;
    std::optional<double> mean_delay_confirmed_s;
    std::optional<double> percent_detected;       // perceived errors only
    std::optional<double> implicit_share;         // % of detections that were implicit
    std::optional<double> implicit_au_share;      // % of implicit detections from AUs
    std::optional<double> implicit_speech_share;  // % of implicit detections from speech
    int detections_total = 0;
    int detections_unmatched = 0;
    int false_positive_queries = 0;  // verification queries answered "all fine"
    int query_count = 0;
};

/// Single source of truth for metrics: both a live run and a trace replay
/// funnel through here, so they cannot disagree.
inline RunMetrics compute_metrics(const TraceMeta& meta,
                                  const std::vector<EventEnvelope>& trace) {
    RunMetrics m;
    m.scenario = meta.scenario;
    m.config = meta.config;
    m.mode = meta.mode;

    std::vector<DetectionEvent> detections;
    for (const auto& env : trace) {
        if (const auto* d = std::get_if<DetectionEvent>(&env.payload)) detections.push_back(*d);
        if (const auto* q = std::get_if<QueryExchange>(&env.payload)) {
            ++m.query_count;
            if (q->outcome == QueryOutcome::Affirmative) ++m.false_positive_queries;
        }
    }
    m.detections_total = static_cast<int>(detections.size());

    int perceived_occurred = 0;
    int detected = 0;
    int implicit = 0, by_au = 0, by_speech = 0;
    double delay_sum = 0.0, confirmed_sum = 0.0;

    for (const auto& err : meta.errors) {
        ErrorOutcomeRow row;
        row.error_id = err.error_id;
        row.kind = err.kind;
        row.perceived = err.perceived;
        if (err.t_occurred && err.perceived) ++perceived_occurred;
        for (const auto& d : detections) {
            if (!d.matched_error_id || *d.matched_error_id != err.error_id) continue;
            row.detected = true;
            row.method = d.method;
            if (err.t_occurred) {
                row.delay_s = to_seconds(d.t_signal - *err.t_occurred);
                row.delay_confirmed_s = to_seconds(d.t_detected - *err.t_occurred);
            }
            ++detected;
            if (d.method != DetectionMethod::Explicit) {
                ++implicit;
                d.method == DetectionMethod::ImplicitAu ? ++by_au : ++by_speech;
            }
            if (row.delay_s) delay_sum += *row.delay_s;
            if (row.delay_confirmed_s) confirmed_sum += *row.delay_confirmed_s;
            break;
        }
        m.per_error.push_back(std::move(row));
    }

    int matched = detected;
    m.detections_unmatched = m.detections_total - matched;
    if (detected > 0) {
        m.mean_delay_s = delay_sum / detected;
        m.mean_delay_confirmed_s = confirmed_sum / detected;
        m.implicit_share = 100.0 * implicit / detected;
    }
    if (perceived_occurred > 0) m.percent_detected = 100.0 * detected / perceived_occurred;
    if (implicit > 0) {
        m.implicit_au_share = 100.0 * by_au / implicit;
        m.implicit_speech_share = 100.0 * by_speech / implicit;
    }
    return m;
}

inline json to_json(const RunMetrics& m) {
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    json rows = json::array();
    for (const auto& r : m.per_error) {
        rows.push_back({{"error_id", r.error_id},
                        {"kind", to_string(r.kind)},
                        {"perceived", r.perceived},
                        {"detected", r.detected},
                        {"method", r.method ? json(to_string(*r.method)) : json(nullptr)},
                        {"delay_s", opt(r.delay_s)},
                        {"delay_confirmed_s", opt(r.delay_confirmed_s)}});
    }
    return {{"scenario", m.scenario},
            {"config", m.config},
            {"mode", m.mode},
            {"per_error", std::move(rows)},
            {"mean_delay_s", opt(m.mean_delay_s)},
            {"mean_delay_confirmed_s", opt(m.mean_delay_confirmed_s)},
            {"percent_detected", opt(m.percent_detected)},
            {"implicit_share", opt(m.implicit_share)},
            {"implicit_au_share", opt(m.implicit_au_share)},
            {"implicit_speech_share", opt(m.implicit_speech_share)},
            {"detections_total", m.detections_total},
            {"detections_unmatched", m.detections_unmatched},
            {"false_positive_queries", m.false_positive_queries},
            {"query_count", m.query_count}};
}

inline std::string format_delay(const std::optional<double>& v) {
    if (!v) return "";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", *v);
    return buf;
}

/// One CSV row per injected error:
///   scenario,config,error_id,kind,detected,method,delay_s
inline std::string to_csv(const RunMetrics& m, bool header = true) {
    std::string out;
    if (header) out += "scenario,config,error_id,kind,detected,method,delay_s\n";
    for (const auto& r : m.per_error) {
        out += m.scenario + "," + m.config + "," + r.error_id + "," + to_string(r.kind) + "," +
               (r.detected ? "true" : "false") + "," +
               (r.method ? to_string(*r.method) : "") + "," + format_delay(r.delay_s) + "\n";
    }
    return out;
}

inline void write_trace(std::ostream& out, const TraceMeta& meta,
                        const std::vector<EventEnvelope>& trace) {
    out << meta.to_json().dump() << "\n";
    for (const auto& env : trace) out << to_ndjson_line(env) << "\n";
}

inline void write_trace_file(const std::string& path, const TraceMeta& meta,
                             const std::vector<EventEnvelope>& trace) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw TraceFormatError("cannot write " + path);
    write_trace(out, meta, trace);
}

struct LoadedTrace {
    TraceMeta meta;
    std::vector<EventEnvelope> events;
};

inline LoadedTrace read_trace(std::istream& in) {
    std::string line;
    std::size_t lineno = 0;
    LoadedTrace loaded;
    bool have_meta = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw TraceFormatError("line " + std::to_string(lineno) + ": not valid JSON");
        if (!have_meta) {
            loaded.meta = TraceMeta::from_json(j);
            have_meta = true;
            continue;
        }
        try {
            loaded.events.push_back(envelope_from_json(j));
        } catch (const TraceFormatError& e) {
            throw TraceFormatError("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (!have_meta) throw TraceFormatError("trace is empty");
    return loaded;
}

inline LoadedTrace read_trace_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw TraceFormatError("cannot open " + path);
    return read_trace(in);
}

/// Replay path: metrics straight from a trace file, no engine involved.
inline RunMetrics metrics_from_trace(const LoadedTrace& t) {
    return compute_metrics(t.meta, t.events);
}

}  // namespace errsense
