#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "errsense/robot_sim.hpp"

using namespace errsense;

namespace {

ActionScript two_actions() {
    ActionScript s;
    s.actions.push_back({"fetch", Timestamp{2000}, 4000, true,
                         {{0, Gripper::Open}, {3000, Gripper::Holding}}, std::nullopt});
    s.actions.push_back({"place", Timestamp{8000}, 2000, true, {{1500, Gripper::Open}},
                         std::nullopt});
    return s;
}

Command at(CommandKind kind, std::int64_t t) { return {kind, Timestamp{t}, {}}; }

}  // namespace

TEST_CASE("script validation catches malformed plans") {
    CHECK_NOTHROW(two_actions().validate());

    ActionScript overlap = two_actions();
    overlap.actions[1].start = Timestamp{5000};
    CHECK_THROWS_AS(overlap.validate(), ScriptError);

    ActionScript zero = two_actions();
    zero.actions[0].duration_millis = 0;
    CHECK_THROWS_AS(zero.validate(), ScriptError);

    ActionScript anon = two_actions();
    anon.actions[0].id.clear();
    CHECK_THROWS_AS(anon.validate(), ScriptError);

    ActionScript past_end = two_actions();
    past_end.actions[0].gripper_profile.push_back({9000, Gripper::Open});
    CHECK_THROWS_AS(past_end.validate(), ScriptError);

    ActionScript unsorted = two_actions();
    unsorted.actions[0].gripper_profile = {{3000, Gripper::Holding}, {0, Gripper::Open}};
    CHECK_THROWS_AS(unsorted.validate(), ScriptError);
}

TEST_CASE("status reflects the script when nothing intervenes") {
    RobotArmSim sim(two_actions());

    RobotStatus before = sim.status_at(Timestamp{1000});
    CHECK_FALSE(before.moving);
    CHECK(before.millis_since_last_movement == 1000);  // never moved yet
    CHECK_FALSE(before.current_action_id);
    CHECK(before.gripper == Gripper::Open);

    RobotStatus mid = sim.status_at(Timestamp{3000});
    CHECK(mid.moving);
    CHECK(mid.millis_since_last_movement == 0);
    CHECK(mid.current_action_id == "fetch");

    RobotStatus grip = sim.status_at(Timestamp{5500});
    CHECK(grip.gripper == Gripper::Holding);  // step at offset 3000 fired

    RobotStatus gap = sim.status_at(Timestamp{7000});
    CHECK_FALSE(gap.moving);
    CHECK(gap.millis_since_last_movement == 1000);  // fetch ended at 6000
    CHECK(gap.gripper == Gripper::Holding);         // sticky between actions
    CHECK_FALSE(gap.current_action_id);

    RobotStatus after = sim.status_at(Timestamp{11000});
    CHECK_FALSE(after.moving);
    CHECK(after.millis_since_last_movement == 1000);  // place ended at 10000
    CHECK(after.gripper == Gripper::Open);
    CHECK(sim.script_done(Timestamp{10000}));
    CHECK_FALSE(sim.script_done(Timestamp{9999}));
}

TEST_CASE("pausing freezes script time and shifts the plan right") {
    RobotArmSim sim(two_actions());
    sim.on_command(at(CommandKind::Pause, 4000));
    sim.on_command(at(CommandKind::Resume, 7000));

    CHECK(sim.script_time(Timestamp{4000}).millis == 4000);
    CHECK(sim.script_time(Timestamp{6500}).millis == 4000);  // frozen inside pause
    CHECK(sim.script_time(Timestamp{9000}).millis == 6000);

    // fetch (script 2000..6000) now occupies real 2000..4000 and 7000..9000.
    CHECK(sim.status_at(Timestamp{3000}).moving);
    CHECK_FALSE(sim.status_at(Timestamp{5000}).moving);  // paused mid-action
    CHECK(sim.status_at(Timestamp{8000}).moving);
    // place (script 8000..10000) runs at real 11000..13000.
    CHECK(sim.status_at(Timestamp{11500}).current_action_id == "place");
    CHECK(sim.script_done(Timestamp{13000}));
    CHECK_FALSE(sim.script_done(Timestamp{12999}));
}

TEST_CASE("milestones since last movement count through pauses") {
    RobotArmSim sim(two_actions());
    sim.on_command(at(CommandKind::Pause, 4000));

    RobotStatus paused = sim.status_at(Timestamp{6500});
    CHECK_FALSE(paused.moving);
    // The arm last moved when the pause landed at real time 4000.
    CHECK(paused.millis_since_last_movement == 2500);
    // Still inside the fetch action on the frozen script clock.
    CHECK(paused.current_action_id == "fetch");

    sim.on_command(at(CommandKind::Resume, 7000));
    CHECK(sim.status_at(Timestamp{7500}).millis_since_last_movement == 0);

    // After the whole script (shifted by 3000) wraps at 13000:
    CHECK(sim.status_at(Timestamp{14000}).millis_since_last_movement == 1000);
}

TEST_CASE("double pause is idempotent and resume without pause only logs") {
    RobotArmSim sim(two_actions());
    sim.on_command(at(CommandKind::Pause, 3000));
    sim.on_command(at(CommandKind::Pause, 3500));  // swallowed
    sim.on_command(at(CommandKind::Resume, 4000));
    CHECK_FALSE(sim.paused());
    CHECK(sim.script_time(Timestamp{5000}).millis == 4000);  // one 1s pause
    CHECK(sim.diagnostics().empty());

    sim.on_command(at(CommandKind::Resume, 6000));
    CHECK(sim.diagnostics().size() == 1);
    CHECK(sim.script_time(Timestamp{7000}).millis == 6000);  // nothing changed
}

TEST_CASE("stop halts the script for good") {
    RobotArmSim sim(two_actions());
    sim.on_command(at(CommandKind::Stop, 3000));
    CHECK(sim.stopped());
    sim.on_command(at(CommandKind::Resume, 4000));  // ignored once stopped
    CHECK_FALSE(sim.status_at(Timestamp{5000}).moving);
    CHECK(sim.script_time(Timestamp{60000}).millis == 3000);
    CHECK_FALSE(sim.script_done(Timestamp{60000}));
    CHECK_FALSE(sim.real_time_of(Timestamp{3001}));
}

TEST_CASE("recover reports when the routine finishes") {
    RobotArmSim sim(two_actions(), 4000);
    auto due = sim.on_command(at(CommandKind::Recover, 5000));
    REQUIRE(due);
    CHECK(due->millis == 9000);
    CHECK(sim.recovery_due() == due);
    sim.clear_recovery();
    CHECK_FALSE(sim.recovery_due());

    // Say is not the arm's business.
    CHECK_FALSE(sim.on_command({CommandKind::Say, Timestamp{5000}, "hello"}));
}

TEST_CASE("real_time_of inverts script_time across closed pauses") {
    RobotArmSim sim(two_actions());
    sim.on_command(at(CommandKind::Pause, 3000));
    sim.on_command(at(CommandKind::Resume, 4500));
    sim.on_command(at(CommandKind::Pause, 8000));
    sim.on_command(at(CommandKind::Resume, 8200));

    CHECK(sim.real_time_of(Timestamp{2999}) == Timestamp{2999});
    CHECK(sim.real_time_of(Timestamp{3000}) == Timestamp{4500});  // hits the pause edge
    CHECK(sim.real_time_of(Timestamp{6500}) == Timestamp{8200});
    CHECK(sim.real_time_of(Timestamp{7000}) == Timestamp{8700});

    for (std::int64_t s = 0; s < 12000; s += 137) {
        auto r = sim.real_time_of(Timestamp{s});
        REQUIRE(r);
        CHECK(sim.script_time(*r).millis == s);
    }
}

TEST_CASE("an open pause blocks future script instants") {
    RobotArmSim sim(two_actions());
    sim.on_command(at(CommandKind::Pause, 3000));
    CHECK(sim.real_time_of(Timestamp{2999}) == Timestamp{2999});
    CHECK_FALSE(sim.real_time_of(Timestamp{3000}));
    CHECK_FALSE(sim.real_time_of(Timestamp{9000}));
}

TEST_CASE("script and real clocks stay inverse under random pause patterns") {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 100; ++trial) {
        RobotArmSim sim(two_actions());
        std::int64_t t = 1000;
        for (int i = 0; i < 6; ++i) {
            t += 500 + static_cast<std::int64_t>(rng() % 2000);
            sim.on_command(at(CommandKind::Pause, t));
            t += 100 + static_cast<std::int64_t>(rng() % 3000);
            sim.on_command(at(CommandKind::Resume, t));
        }
        for (int i = 0; i < 50; ++i) {
            const std::int64_t s = static_cast<std::int64_t>(rng() % 20000);
            auto r = sim.real_time_of(Timestamp{s});
            REQUIRE(r);
            REQUIRE(sim.script_time(*r).millis == s);
        }
        // Monotone: later real time never reads an earlier script clock.
        Timestamp prev = sim.script_time(Timestamp{0});
        for (std::int64_t now = 0; now < 30000; now += 333) {
            Timestamp cur = sim.script_time(Timestamp{now});
            REQUIRE(prev <= cur);
            prev = cur;
        }
    }
}

TEST_CASE("status during recovery pause keeps the gripper frozen") {
    RobotArmSim sim(two_actions());
    // Pause right after the gripper closed (script 5000 = offset 3000).
    sim.on_command(at(CommandKind::Pause, 5200));
    RobotStatus st = sim.status_at(Timestamp{20000});
    CHECK(st.gripper == Gripper::Holding);
    CHECK_FALSE(st.moving);
    CHECK(st.current_action_id == "fetch");
    CHECK(st.millis_since_last_movement == 20000 - 5200);
}
