#pragma once

#include "avgtrack/clocksync.hpp"
#include "avgtrack/controllers.hpp"
#include "avgtrack/engine.hpp"
#include "avgtrack/error.hpp"
#include "avgtrack/graph.hpp"
#include "avgtrack/linalg.hpp"
#include "avgtrack/matrix.hpp"
#include "avgtrack/rk4.hpp"
#include "avgtrack/signals.hpp"
