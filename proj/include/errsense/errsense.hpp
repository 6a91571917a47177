#pragma once

// Error-aware interaction engine: detects robot task errors from the
// human's implicit social signals (facial action units, reactive speech)
// and explicit verbal reports, verifies suspicions with a neutral yes/no
// query before acting, and recovers.  Ships with a deterministic scenario
// harness for closed-loop evaluation.

#include "errsense/detector.hpp"
#include "errsense/engine.hpp"
#include "errsense/events.hpp"
#include "errsense/harness.hpp"
#include "errsense/human.hpp"
#include "errsense/intent.hpp"
#include "errsense/intent_http.hpp"
#include "errsense/json_io.hpp"
#include "errsense/metrics.hpp"
#include "errsense/orchestrator.hpp"
#include "errsense/robot_sim.hpp"
#include "errsense/scenario.hpp"
#include "errsense/stream.hpp"
#include "errsense/time.hpp"
