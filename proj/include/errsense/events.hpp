#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>

#include "errsense/time.hpp"

namespace errsense {

enum class Speaker { Human, Robot };
enum class Gripper { Open, Closed, Holding };

/// One sample of facial action-unit intensities, keyed by AU number.
/// Intensities are on a 0..5 scale.
struct AuFrame {
    Timestamp t;
    std::map<int, double> intensities;

    friend bool operator==(const AuFrame&, const AuFrame&) = default;
};

struct Utterance {
    Timestamp t;
    std::string text;
    Speaker speaker = Speaker::Human;

    friend bool operator==(const Utterance&, const Utterance&) = default;
};

struct RobotStatus {
    Timestamp t;
    bool moving = false;
    Gripper gripper = Gripper::Open;
    Duration millis_since_last_movement = 0;
    std::optional<std::string> current_action_id;
    bool recovery_complete = false;

    friend bool operator==(const RobotStatus&, const RobotStatus&) = default;
};

enum class CommandKind { Pause, Resume, Stop, Recover, Say };

struct Command {
    CommandKind kind;
    Timestamp t;
    std::string text;  // spoken text for Say, empty otherwise

    friend bool operator==(const Command&, const Command&) = default;
};

enum class DetectionMethod { ImplicitAu, ImplicitSpeech, Explicit };

struct DetectionEvent {
    Timestamp t_detected;           // when the detection was confirmed
    DetectionMethod method;
    Timestamp t_signal;             // when the triggering signal was identified
    bool verified = false;          // went through a verification query
    std::optional<std::string> matched_error_id;

    friend bool operator==(const DetectionEvent&, const DetectionEvent&) = default;
};

enum class QueryOutcome { Affirmative, Negative, Timeout, Preempted };

/// Record of one verification query round-trip.  Stamped with the time the
/// outcome became known so trace lines stay time-ordered; asked_at keeps
/// the question time.
struct QueryExchange {
    Timestamp t;         // close time: answer, deadline, or preemption
    Timestamp asked_at;
    std::string text;
    QueryOutcome outcome;
    std::optional<Timestamp> answered_at;

    friend bool operator==(const QueryExchange&, const QueryExchange&) = default;
};

// The variant order fixes how same-instant events are sequenced: status
// context first, then signals, then engine outputs.
using EventPayload =
    std::variant<RobotStatus, AuFrame, Utterance, Command, QueryExchange, DetectionEvent>;

struct EventEnvelope {
    Timestamp t;
    EventPayload payload;

    friend bool operator==(const EventEnvelope&, const EventEnvelope&) = default;
};

inline int stream_priority(const EventEnvelope& e) { return static_cast<int>(e.payload.index()); }

inline EventEnvelope make_envelope(RobotStatus s)   { return {s.t, std::move(s)}; }
inline EventEnvelope make_envelope(AuFrame f)       { return {f.t, std::move(f)}; }
inline EventEnvelope make_envelope(Utterance u)     { return {u.t, std::move(u)}; }
inline EventEnvelope make_envelope(Command c)       { return {c.t, std::move(c)}; }
inline EventEnvelope make_envelope(QueryExchange q) { return {q.t, std::move(q)}; }
inline EventEnvelope make_envelope(DetectionEvent d) { return {d.t_detected, std::move(d)}; }

}  // namespace errsense
