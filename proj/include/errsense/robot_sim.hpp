#pragma once

#include <algorithm>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "errsense/events.hpp"

namespace errsense {

class ScriptError : public std::runtime_error {
public:
    explicit ScriptError(const std::string& what) : std::runtime_error(what) {}
};

struct GripperStep {
    Duration offset_millis = 0;  // from action start, in script time
    Gripper state = Gripper::Open;
};

struct RobotAction {
    std::string id;
    Timestamp start;            // script time
    Duration duration_millis = 0;
    bool moving = true;
    std::vector<GripperStep> gripper_profile;
    std::optional<std::string> is_error;  // error id this action realizes

    Timestamp end() const { return start + duration_millis; }
};

/// The robot's scripted plan on its own clock ("script time"), which only
/// advances while the arm is not paused.
struct ActionScript {
    std::vector<RobotAction> actions;

    void validate() const {
        Timestamp prev_end{0};
        for (std::size_t i = 0; i < actions.size(); ++i) {
            const auto& a = actions[i];
            if (a.id.empty()) throw ScriptError("action " + std::to_string(i) + " has no id");
            if (a.duration_millis <= 0) throw ScriptError(a.id + ": duration must be positive");
            if (a.start.millis < 0) throw ScriptError(a.id + ": negative start");
            if (i > 0 && a.start < prev_end)
                throw ScriptError(a.id + ": overlaps previous action");
            Duration prev_off = -1;
            for (const auto& g : a.gripper_profile) {
                if (g.offset_millis < 0 || g.offset_millis > a.duration_millis)
                    throw ScriptError(a.id + ": gripper offset outside action");
                if (g.offset_millis <= prev_off) throw ScriptError(a.id + ": gripper profile not increasing");
                prev_off = g.offset_millis;
            }
            prev_end = a.end();
        }
    }

    Timestamp end() const { return actions.empty() ? Timestamp{0} : actions.back().end(); }

    const RobotAction* action_at(Timestamp script_t) const {
        for (const auto& a : actions)
            if (a.start <= script_t && script_t < a.end()) return &a;
        return nullptr;
    }

    const RobotAction* find(const std::string& id) const {
        for (const auto& a : actions)
            if (a.id == id) return &a;
        return nullptr;
    }

    bool moving_at(Timestamp script_t) const {
        const RobotAction* a = action_at(script_t);
        return a != nullptr && a->moving;
    }

    /// Gripper state is sticky: the last profile step at or before script_t
    /// wins, across action boundaries; Open before anything happened.
    Gripper gripper_at(Timestamp script_t) const {
        Gripper g = Gripper::Open;
        for (const auto& a : actions) {
            if (a.start > script_t) break;
            for (const auto& step : a.gripper_profile) {
                if ((a.start + step.offset_millis).millis <= script_t.millis) g = step.state;
            }
        }
        return g;
    }
};

/// Kinematics-free arm: executes the script, honors pause/resume/stop, and
/// reports status on demand.  Pausing freezes script time, so everything
/// scheduled on the script shifts right by exactly the paused span.
class RobotArmSim {
public:
    explicit RobotArmSim(ActionScript script, Duration recovery_millis = 4000)
        : script_(std::move(script)), recovery_millis_(recovery_millis) {
        script_.validate();
    }

    /// Applies a command at its stamped time.  For Recover, returns when the
    /// recovery routine will complete.
    std::optional<Timestamp> on_command(const Command& cmd) {
        switch (cmd.kind) {
            case CommandKind::Pause:
                if (!paused() && !stopped_) pauses_.push_back({cmd.t, std::nullopt});
                return std::nullopt;  // double pause is a no-op
            case CommandKind::Resume:
                if (stopped_) return std::nullopt;
                if (!paused()) {
                    diagnostics_.push_back("resume with no pause in effect at t=" +
                                           std::to_string(cmd.t.millis));
                    return std::nullopt;
                }
                pauses_.back().end = cmd.t;
                return std::nullopt;
            case CommandKind::Stop:
                if (!stopped_) {
                    if (!paused()) pauses_.push_back({cmd.t, std::nullopt});
                    stopped_ = true;
                }
                return std::nullopt;
            case CommandKind::Recover:
                recovery_due_ = cmd.t + recovery_millis_;
                return recovery_due_;
            case CommandKind::Say:
                return std::nullopt;  // speech doesn't touch the arm
        }
        return std::nullopt;
    }

    bool paused() const { return !pauses_.empty() && !pauses_.back().end; }
    bool stopped() const { return stopped_; }

    /// Script-clock reading at real time `now`.
    Timestamp script_time(Timestamp now) const {
        Duration paused_span = 0;
        for (const auto& p : pauses_) {
            if (p.start >= now) break;
            Timestamp end = p.end && *p.end < now ? *p.end : now;
            paused_span += end - p.start;
        }
        return Timestamp{now.millis - paused_span};
    }

    /// Real time at which the script clock reaches `script_t`.  Empty if an
    /// open-ended pause (or stop) blocks it from ever getting there.
    std::optional<Timestamp> real_time_of(Timestamp script_t) const {
        Timestamp r = script_t;
        for (const auto& p : pauses_) {
            if (p.start > r) continue;
            if (!p.end) return std::nullopt;
            r = r + (*p.end - p.start);
        }
        return r;
    }

    RobotStatus status_at(Timestamp now) const {
        RobotStatus st;
        st.t = now;
        const Timestamp tau = script_time(now);
        const bool halted = paused_as_of(now) || stopped_;
        st.moving = !halted && script_.moving_at(tau);
        st.gripper = script_.gripper_at(tau);
        if (const RobotAction* a = script_.action_at(tau)) st.current_action_id = a->id;
        if (st.moving) {
            st.millis_since_last_movement = 0;
        } else {
            auto last = last_movement_before(now);
            st.millis_since_last_movement = last ? now - *last : now.millis;
        }
        return st;
    }

    bool script_done(Timestamp now) const { return script_time(now) >= script_.end(); }

    const ActionScript& script() const { return script_; }
    std::optional<Timestamp> recovery_due() const { return recovery_due_; }
    void clear_recovery() { recovery_due_.reset(); }
    const std::vector<std::string>& diagnostics() const { return diagnostics_; }

private:
    struct PauseSpan {
        Timestamp start;
        std::optional<Timestamp> end;
    };

    bool paused_as_of(Timestamp now) const {
        for (const auto& p : pauses_) {
            if (p.start.millis <= now.millis && (!p.end || now < *p.end)) return true;
        }
        return false;
    }

    /// Latest real instant <= now at which the arm was actually moving:
    /// walk the un-paused stretches of real time and project the script's
    /// moving segments into them.
    std::optional<Timestamp> last_movement_before(Timestamp now) const {
        std::optional<Timestamp> last;
        Timestamp cursor{0};  // start of the current un-paused stretch
        auto scan_stretch = [&](Timestamp r0, Timestamp r1) {
            if (r1 <= r0) return;
            const Timestamp tau0 = script_time(r0);
            for (const auto& a : script_.actions) {
                if (!a.moving) continue;
                Timestamp s0 = std::max(a.start, tau0);
                Timestamp s1 = std::min(a.end(), tau0 + (r1 - r0));
                if (s1 <= s0) continue;
                Timestamp img_end = r0 + (s1 - tau0);
                if (!last || img_end > *last) last = img_end;
            }
        };
        for (const auto& p : pauses_) {
            if (p.start >= now) break;
            scan_stretch(cursor, std::min(p.start, now));
            if (!p.end || *p.end >= now) return last;  // still inside this pause
            cursor = *p.end;
        }
        scan_stretch(cursor, now);
        return last;
    }

    ActionScript script_;
    Duration recovery_millis_;
    std::vector<PauseSpan> pauses_;
    bool stopped_ = false;
    std::optional<Timestamp> recovery_due_;
    std::vector<std::string> diagnostics_;
};

}  // namespace errsense
