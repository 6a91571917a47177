#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "errsense/detector.hpp"

using namespace errsense;
using Catch::Approx;

namespace {

AuFrame flat(std::int64_t t, double v) { return {Timestamp{t}, {{1, v}}}; }

// Independent re-statement of the window contract, recomputed from the full
// flag history every step: count flags in (newest - span, newest] since the
// last emission; emit iff count > fraction * capacity, then forget history.
struct WindowOracle {
    Duration span;
    int capacity;
    double fraction;
    std::vector<FrameFlag> history;

    bool step(const FrameFlag& f) {
        history.push_back(f);
        int count = 0;
        for (const auto& h : history)
            if (h.flagged && h.t.millis > f.t.millis - span) ++count;
        if (static_cast<double>(count) > fraction * static_cast<double>(capacity)) {
            history.clear();
            return true;
        }
        return false;
    }
};

}  // namespace

TEST_CASE("detector config capacity and validation") {
    DetectorConfig cfg;
    CHECK(cfg.window_capacity() == 40);
    CHECK_NOTHROW(cfg.validate());

    auto expect_invalid = [](auto mutate) {
        DetectorConfig c;
        mutate(c);
        CHECK_THROWS_AS(c.validate(), DetectorConfigError);
    };
    expect_invalid([](DetectorConfig& c) { c.window_millis = 0; });
    expect_invalid([](DetectorConfig& c) { c.window_millis = 100; });  // capacity 1
    expect_invalid([](DetectorConfig& c) { c.vote_fraction_base = 0.0; });
    expect_invalid([](DetectorConfig& c) { c.vote_fraction_base = 1.0; });
    expect_invalid([](DetectorConfig& c) { c.boost_cap = 0.4; });  // below base
    expect_invalid([](DetectorConfig& c) { c.boost_cap = 1.0; });
    expect_invalid([](DetectorConfig& c) { c.boost_delta = -0.1; });
    expect_invalid([](DetectorConfig& c) { c.decay_millis = 0; });
    expect_invalid([](DetectorConfig& c) { c.baseline_alpha = 0.0; });
    expect_invalid([](DetectorConfig& c) { c.baseline_alpha = 1.5; });
    expect_invalid([](DetectorConfig& c) { c.frame_theta_base = 0.0; });
    expect_invalid([](DetectorConfig& c) { c.frame_rate_hz = 0.0; });
}

TEST_CASE("detector config json round trip and partial overrides") {
    DetectorConfig cfg;
    cfg.vote_fraction_base = 0.6;
    cfg.window_millis = 2000;
    cfg.frame_rate_hz = 20.0;
    auto back = DetectorConfig::from_json(cfg.to_json());
    CHECK(back.vote_fraction_base == cfg.vote_fraction_base);
    CHECK(back.window_millis == cfg.window_millis);
    CHECK(back.window_capacity() == 40);

    auto partial = DetectorConfig::from_json(nlohmann::json{{"boost_delta", 0.1}});
    CHECK(partial.boost_delta == 0.1);
    CHECK(partial.vote_fraction_base == 0.5);  // untouched fields keep defaults

    CHECK_THROWS_AS(DetectorConfig::from_json(nlohmann::json{{"vote_fraction_base", 2.0}}),
                    DetectorConfigError);
}

TEST_CASE("ema baseline scores deviation from the running average") {
    // Hold 0.5 for 50 frames, then jump to 2.5.  With alpha 0.05 the ema is
    // still exactly 0.5 at the jump, so the scores walk down geometrically:
    //   score_k = 2.0 * 0.95^k
    EmaBaselineClassifier clf(0.05);
    FrameFlag first = clf.score_frame(flat(0, 0.5), 1.0);
    CHECK(first.score == 0.0);
    CHECK_FALSE(first.flagged);
    for (int i = 1; i < 50; ++i) {
        FrameFlag f = clf.score_frame(flat(i * 100, 0.5), 1.0);
        CHECK(f.score == Approx(0.0).margin(1e-12));
        CHECK_FALSE(f.flagged);
    }
    const double expected[] = {2.0, 1.9, 1.805, 1.71475, 1.6290125};
    for (int k = 0; k < 5; ++k) {
        FrameFlag f = clf.score_frame(flat((50 + k) * 100, 2.5), 1.0);
        CHECK(f.score == Approx(expected[k]).epsilon(1e-12));
        CHECK(f.flagged);
    }
    // 2.0 * 0.95^k stays above theta=1.0 through k=13 (1.022) and drops
    // below at k=14 (0.971): flagged frames are 50..63, frame 64 is clean.
    for (int k = 5; k < 14; ++k)
        CHECK(clf.score_frame(flat((50 + k) * 100, 2.5), 1.0).flagged);
    CHECK_FALSE(clf.score_frame(flat(6400, 2.5), 1.0).flagged);
}

TEST_CASE("ema baseline averages deviations across aus") {
    EmaBaselineClassifier clf(0.05);
    clf.score_frame({Timestamp{0}, {{1, 1.0}, {4, 2.0}, {12, 0.0}}}, 0.5);
    // Deviations 1.0, 0.5, 0.0 -> mean 0.5; strict compare so not flagged.
    FrameFlag f = clf.score_frame({Timestamp{100}, {{1, 2.0}, {4, 2.5}, {12, 0.0}}}, 0.5);
    CHECK(f.score == Approx(0.5).epsilon(1e-12));
    CHECK_FALSE(f.flagged);
}

TEST_CASE("ema baseline rejects a changed key set") {
    EmaBaselineClassifier clf(0.05);
    clf.score_frame({Timestamp{0}, {{1, 1.0}, {4, 2.0}}}, 0.5);
    CHECK_THROWS_AS(clf.score_frame({Timestamp{100}, {{1, 1.0}}}, 0.5), MalformedStreamError);
    CHECK_THROWS_AS(clf.score_frame({Timestamp{100}, {{1, 1.0}, {4, 2.0}, {9, 0.1}}}, 0.5),
                    MalformedStreamError);
    CHECK_THROWS_AS(clf.score_frame({Timestamp{100}, {{1, 1.0}, {9, 2.0}}}, 0.5),
                    MalformedStreamError);
    // Same count, same keys: fine again after the bad frames were rejected.
    CHECK_NOTHROW(clf.score_frame({Timestamp{200}, {{1, 1.0}, {4, 2.0}}}, 0.5));
}

TEST_CASE("ema reset forgets the calibration") {
    EmaBaselineClassifier clf(0.5);
    clf.score_frame(flat(0, 1.0), 0.5);
    clf.reset();
    FrameFlag f = clf.score_frame(flat(100, 5.0), 0.5);
    CHECK(f.score == 0.0);  // first frame again
}

TEST_CASE("vote window needs strictly more than fraction of capacity") {
    // Capacity 40, fraction 0.5: exactly 20 flags never emits, 21 always does.
    auto run = [](int n_flags, const std::vector<int>& order) {
        VoteWindow w(4000, 40);
        bool emitted = false;
        for (int i = 0; i < 40; ++i) {
            bool flag = std::find(order.begin(), order.end(), i) < order.begin() + n_flags;
            w.push({Timestamp{i * 100}, flag, flag ? 1.0 : 0.0});
            if (w.vote(0.5)) emitted = true;
        }
        return emitted;
    };
    std::vector<int> positions(40);
    for (int i = 0; i < 40; ++i) positions[i] = i;

    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        std::shuffle(positions.begin(), positions.end(), rng);
        CHECK_FALSE(run(20, positions));
        CHECK(run(21, positions));
    }
    // Adversarial arrangements.
    std::vector<int> front(40), back(40);
    for (int i = 0; i < 40; ++i) front[i] = i, back[i] = 39 - i;
    CHECK_FALSE(run(20, front));
    CHECK_FALSE(run(20, back));
    CHECK(run(21, front));
    CHECK(run(21, back));
}

TEST_CASE("vote window evicts flags older than the span") {
    VoteWindow w(1000, 10);
    for (int i = 0; i < 5; ++i) w.push({Timestamp{i * 100}, true, 1.0});
    CHECK(w.flagged_count() == 5);
    // A frame a full span later pushes everything at or before t-span out.
    w.push({Timestamp{1300}, false, 0.0});
    CHECK(w.flagged_count() == 1);  // only t=400 survives (400 > 1300-1000)
    w.push({Timestamp{1500}, false, 0.0});
    CHECK(w.flagged_count() == 0);
}

TEST_CASE("vote window clears on emission and re-arms") {
    VoteWindow w(1000, 4);
    std::optional<Timestamp> hit;
    for (int i = 0; i < 3 && !hit; ++i) {
        w.push({Timestamp{i * 100}, true, 1.0});
        hit = w.vote(0.5);
    }
    REQUIRE(hit);
    CHECK(hit->millis == 200);  // third flag: 3 > 0.5*4
    CHECK(w.size() == 0);
    // Old flags are gone; it takes three fresh ones to emit again.
    w.push({Timestamp{300}, true, 1.0});
    CHECK_FALSE(w.vote(0.5));
    w.push({Timestamp{400}, true, 1.0});
    CHECK_FALSE(w.vote(0.5));
    w.push({Timestamp{500}, true, 1.0});
    CHECK(w.vote(0.5));
}

TEST_CASE("streamed voting matches the recount oracle on random sequences") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 400; ++trial) {
        const Duration span = 200 + static_cast<Duration>(rng() % 20) * 100;
        const int capacity = 2 + static_cast<int>(rng() % 12);
        const double fraction = 0.1 + 0.8 * (static_cast<double>(rng() % 100) / 100.0);
        VoteWindow w(span, capacity);
        WindowOracle oracle{span, capacity, fraction, {}};
        std::int64_t t = 0;
        const int len = 1 + static_cast<int>(rng() % 200);
        for (int i = 0; i < len; ++i) {
            t += 100;
            if (rng() % 8 == 0) t += static_cast<std::int64_t>(rng() % 5) * 100;  // gaps
            FrameFlag f{Timestamp{t}, rng() % 2 == 0, 0.0};
            w.push(f);
            bool emitted = w.vote(fraction).has_value();
            bool expected = oracle.step(f);
            REQUIRE(emitted == expected);
        }
    }
}

TEST_CASE("detector boosts on a false positive and caps") {
    AuDetector det{DetectorConfig{}};
    CHECK(det.vote_fraction_now() == 0.5);
    det.adapt_after_verification(VerificationOutcome::NoError, Timestamp{1000});
    CHECK(det.vote_fraction_now() == 0.75);
    det.adapt_after_verification(VerificationOutcome::NoError, Timestamp{1000});
    CHECK(det.vote_fraction_now() == 0.9);  // 0.75+0.25 capped
    det.adapt_after_verification(VerificationOutcome::NoError, Timestamp{1000});
    CHECK(det.vote_fraction_now() == 0.9);
}

TEST_CASE("confirmed errors leave the threshold alone") {
    AuDetector det{DetectorConfig{}};
    det.adapt_after_verification(VerificationOutcome::ErrorConfirmed, Timestamp{0});
    CHECK(det.vote_fraction_now() == 0.5);
    det.adapt_after_verification(VerificationOutcome::NoError, Timestamp{0});
    det.adapt_after_verification(VerificationOutcome::ErrorConfirmed, Timestamp{5000});
    // Confirmation only ran the pending decay; no new boost.
    CHECK(det.vote_fraction_now() == Approx(0.75 - 0.25 * 5000.0 / 60000.0));
}

TEST_CASE("boost decays linearly and lands on base exactly") {
    AuDetector det{DetectorConfig{}};
    det.adapt_after_verification(VerificationOutcome::NoError, Timestamp{0});
    det.decay_threshold(Timestamp{30000});
    CHECK(det.vote_fraction_now() == Approx(0.625).epsilon(1e-12));  // midpoint
    det.decay_threshold(Timestamp{45000});
    CHECK(det.vote_fraction_now() == Approx(0.5625).epsilon(1e-12));
    det.decay_threshold(Timestamp{60000});
    CHECK(det.vote_fraction_now() == 0.5);  // exact, not approximately
    det.decay_threshold(Timestamp{90000});
    CHECK(det.vote_fraction_now() == 0.5);
}

TEST_CASE("a second boost mid-decay stacks on the decayed value") {
    AuDetector det{DetectorConfig{}};
    det.adapt_after_verification(VerificationOutcome::NoError, Timestamp{0});       // 0.75
    det.adapt_after_verification(VerificationOutcome::NoError, Timestamp{30000});   // 0.625+0.25
    CHECK(det.vote_fraction_now() == Approx(0.875).epsilon(1e-12));
    // Fresh decay clock from the second boost.
    det.decay_threshold(Timestamp{60000});
    CHECK(det.vote_fraction_now() == Approx(0.6875).epsilon(1e-12));
    det.decay_threshold(Timestamp{90000});
    CHECK(det.vote_fraction_now() == 0.5);
}

TEST_CASE("threshold never leaves [base, cap] under random adapt sequences") {
    std::mt19937_64 rng(5);
    AuDetector det{DetectorConfig{}};
    std::int64_t t = 0;
    for (int i = 0; i < 2000; ++i) {
        t += static_cast<std::int64_t>(rng() % 20000);
        if (rng() % 2)
            det.adapt_after_verification(
                rng() % 2 ? VerificationOutcome::NoError : VerificationOutcome::ErrorConfirmed,
                Timestamp{t});
        else
            det.decay_threshold(Timestamp{t});
        REQUIRE(det.vote_fraction_now() >= 0.5);
        REQUIRE(det.vote_fraction_now() <= 0.9);
    }
}

TEST_CASE("a sustained burst yields a candidate once the window majority flips") {
    // Settle the baseline at 0.2, then jump to 2.2 (deviation 2.0 > theta).
    // The 21st flagged frame tips 0.5*40; the window then clears.
    AuDetector det{DetectorConfig{}};
    std::int64_t t = 0;
    for (int i = 0; i < 100; ++i) {
        auto r = det.process_frame(flat(t, 0.2));
        CHECK_FALSE(r.candidate_at);
        t += 100;
    }
    std::optional<Timestamp> candidate;
    int frames = 0;
    const std::int64_t burst_start = t;
    while (!candidate && frames < 60) {
        candidate = det.process_frame(flat(t, 2.2)).candidate_at;
        t += 100;
        ++frames;
    }
    REQUIRE(candidate);
    CHECK(candidate->millis == burst_start + 2000);  // 21st frame
    CHECK(det.window().size() == 0);
}

TEST_CASE("clearing the window forgets accumulated flags") {
    AuDetector det{DetectorConfig{}};
    std::int64_t t = 0;
    for (int i = 0; i < 50; ++i) {
        det.process_frame(flat(t, 0.2));
        t += 100;
    }
    for (int i = 0; i < 20; ++i) {
        det.process_frame(flat(t, 2.2));
        t += 100;
    }
    CHECK(det.window().flagged_count() == 20);
    det.clear_window();
    CHECK(det.window().flagged_count() == 0);
    // Next flagged frame starts the count from scratch.
    auto r = det.process_frame(flat(t, 2.2));
    CHECK(det.window().flagged_count() == 1);
    CHECK_FALSE(r.candidate_at);
}
