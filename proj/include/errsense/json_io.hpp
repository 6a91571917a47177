#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "errsense/events.hpp"

namespace errsense {

using nlohmann::json;

/// A trace or event line did not parse or had an unknown/missing kind.
class TraceFormatError : public std::runtime_error {
public:
    explicit TraceFormatError(const std::string& what) : std::runtime_error(what) {}
};

inline const char* to_string(Gripper g) {
    switch (g) {
        case Gripper::Open: return "open";
        case Gripper::Closed: return "closed";
        case Gripper::Holding: return "holding";
    }
    return "open";
}

inline Gripper gripper_from_string(const std::string& s) {
    if (s == "open") return Gripper::Open;
    if (s == "closed") return Gripper::Closed;
    if (s == "holding") return Gripper::Holding;
    throw TraceFormatError("unknown gripper state: " + s);
}

inline const char* to_string(CommandKind k) {
    switch (k) {
        case CommandKind::Pause: return "pause";
        case CommandKind::Resume: return "resume";
        case CommandKind::Stop: return "stop";
        case CommandKind::Recover: return "recover";
        case CommandKind::Say: return "say";
    }
    return "pause";
}

inline CommandKind command_kind_from_string(const std::string& s) {
    if (s == "pause") return CommandKind::Pause;
    if (s == "resume") return CommandKind::Resume;
    if (s == "stop") return CommandKind::Stop;
    if (s == "recover") return CommandKind::Recover;
    if (s == "say") return CommandKind::Say;
    throw TraceFormatError("unknown command kind: " + s);
}

inline const char* to_string(DetectionMethod m) {
    switch (m) {
        case DetectionMethod::ImplicitAu: return "implicit_au";
        case DetectionMethod::ImplicitSpeech: return "implicit_speech";
        case DetectionMethod::Explicit: return "explicit";
    }
    return "explicit";
}

inline DetectionMethod detection_method_from_string(const std::string& s) {
    if (s == "implicit_au") return DetectionMethod::ImplicitAu;
    if (s == "implicit_speech") return DetectionMethod::ImplicitSpeech;
    if (s == "explicit") return DetectionMethod::Explicit;
    throw TraceFormatError("unknown detection method: " + s);
}

inline const char* to_string(QueryOutcome o) {
    switch (o) {
        case QueryOutcome::Affirmative: return "affirmative";
        case QueryOutcome::Negative: return "negative";
        case QueryOutcome::Timeout: return "timeout";
        case QueryOutcome::Preempted: return "preempted";
    }
    return "timeout";
}

inline QueryOutcome query_outcome_from_string(const std::string& s) {
    if (s == "affirmative") return QueryOutcome::Affirmative;
    if (s == "negative") return QueryOutcome::Negative;
    if (s == "timeout") return QueryOutcome::Timeout;
    if (s == "preempted") return QueryOutcome::Preempted;
    throw TraceFormatError("unknown query outcome: " + s);
}

inline json to_json(const EventEnvelope& e) {
    json j;
    j["t"] = e.t.millis;
    struct Visitor {
        json& j;
        void operator()(const RobotStatus& s) const {
            j["kind"] = "status";
            j["moving"] = s.moving;
            j["gripper"] = to_string(s.gripper);
            j["millis_since_last_movement"] = s.millis_since_last_movement;
            if (s.current_action_id) j["current_action_id"] = *s.current_action_id;
            if (s.recovery_complete) j["recovery_complete"] = true;
        }
        void operator()(const AuFrame& f) const {
            j["kind"] = "au";
            json m = json::object();
            for (const auto& [au, v] : f.intensities) m[std::to_string(au)] = v;
            j["intensities"] = std::move(m);
        }
        void operator()(const Utterance& u) const {
            j["kind"] = "utterance";
            j["speaker"] = u.speaker == Speaker::Human ? "human" : "robot";
            j["text"] = u.text;
        }
        void operator()(const Command& c) const {
            j["kind"] = "command";
            j["command"] = to_string(c.kind);
            if (c.kind == CommandKind::Say) j["text"] = c.text;
        }
        void operator()(const QueryExchange& q) const {
            j["kind"] = "query";
            j["asked_at"] = q.asked_at.millis;
            j["text"] = q.text;
            j["outcome"] = to_string(q.outcome);
            if (q.answered_at) j["answered_at"] = q.answered_at->millis;
        }
        void operator()(const DetectionEvent& d) const {
            j["kind"] = "detection";
            j["method"] = to_string(d.method);
            j["t_signal"] = d.t_signal.millis;
            j["verified"] = d.verified;
            if (d.matched_error_id) j["matched_error_id"] = *d.matched_error_id;
        }
    };
    std::visit(Visitor{j}, e.payload);
    return j;
}

inline EventEnvelope envelope_from_json(const json& j) {
    if (!j.is_object() || !j.contains("t") || !j.contains("kind"))
        throw TraceFormatError("event line needs t and kind");
    Timestamp t{j.at("t").get<std::int64_t>()};
    const std::string kind = j.at("kind").get<std::string>();
    try {
        if (kind == "status") {
            RobotStatus s;
            s.t = t;
            s.moving = j.at("moving").get<bool>();
            s.gripper = gripper_from_string(j.at("gripper").get<std::string>());
            s.millis_since_last_movement = j.at("millis_since_last_movement").get<std::int64_t>();
            if (j.contains("current_action_id"))
                s.current_action_id = j.at("current_action_id").get<std::string>();
            if (j.contains("recovery_complete"))
                s.recovery_complete = j.at("recovery_complete").get<bool>();
            return make_envelope(std::move(s));
        }
        if (kind == "au") {
            AuFrame f;
            f.t = t;
            for (const auto& [key, v] : j.at("intensities").items())
                f.intensities[std::stoi(key)] = v.get<double>();
            return make_envelope(std::move(f));
        }
        if (kind == "utterance") {
            Utterance u;
            u.t = t;
            u.text = j.at("text").get<std::string>();
            u.speaker = j.at("speaker").get<std::string>() == "robot" ? Speaker::Robot
                                                                      : Speaker::Human;
            return make_envelope(std::move(u));
        }
        if (kind == "command") {
            Command c;
            c.t = t;
            c.kind = command_kind_from_string(j.at("command").get<std::string>());
            if (j.contains("text")) c.text = j.at("text").get<std::string>();
            return make_envelope(std::move(c));
        }
        if (kind == "query") {
            QueryExchange q;
            q.t = t;
            q.asked_at = Timestamp{j.at("asked_at").get<std::int64_t>()};
            q.text = j.at("text").get<std::string>();
            q.outcome = query_outcome_from_string(j.at("outcome").get<std::string>());
            if (j.contains("answered_at"))
                q.answered_at = Timestamp{j.at("answered_at").get<std::int64_t>()};
            return make_envelope(std::move(q));
        }
        if (kind == "detection") {
            DetectionEvent d;
            d.t_detected = t;
            d.method = detection_method_from_string(j.at("method").get<std::string>());
            d.t_signal = Timestamp{j.at("t_signal").get<std::int64_t>()};
            d.verified = j.at("verified").get<bool>();
            if (j.contains("matched_error_id"))
                d.matched_error_id = j.at("matched_error_id").get<std::string>();
            return make_envelope(std::move(d));
        }
    } catch (const json::exception& e) {
        throw TraceFormatError(std::string("bad ") + kind + " line: " + e.what());
    }
    throw TraceFormatError("unknown event kind: " + kind);
}

inline std::string to_ndjson_line(const EventEnvelope& e) { return to_json(e).dump(); }

inline EventEnvelope envelope_from_line(const std::string& line) {
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw TraceFormatError("event line is not valid JSON");
    return envelope_from_json(j);
}

inline json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw TraceFormatError("cannot open " + path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw TraceFormatError(path + " is not valid JSON");
    return j;
}

}  // namespace errsense
