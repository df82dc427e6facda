#pragma once

#include "etrace/analysis.hpp"
#include "etrace/backend.hpp"
#include "etrace/clock.hpp"
#include "etrace/error.hpp"
#include "etrace/live_backend.hpp"
#include "etrace/metrics.hpp"
#include "etrace/profile.hpp"
#include "etrace/report.hpp"
#include "etrace/sampler.hpp"
#include "etrace/sensor.hpp"
#include "etrace/simstudy.hpp"
#include "etrace/trace.hpp"
#include "etrace/trace_io.hpp"
