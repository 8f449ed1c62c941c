#pragma once

// Convenience umbrella for the whole library.

#include "core.hpp"
#include "dist.hpp"
#include "stat_parser.hpp"
#include "stat_tests.hpp"
#include "effect_size.hpp"
#include "quadrature.hpp"
#include "evidence.hpp"
#include "alignment.hpp"
#include "parallel.hpp"
#include "aggregate.hpp"
#include "bundle_io.hpp"
#include "scoring_driver.hpp"
