#pragma once

#include "gsprt/distribution.hpp"
#include "gsprt/expfam.hpp"
#include "gsprt/json_io.hpp"
#include "gsprt/linear_family.hpp"
#include "gsprt/montecarlo.hpp"
#include "gsprt/normal.hpp"
#include "gsprt/projection.hpp"
#include "gsprt/rng.hpp"
#include "gsprt/runner.hpp"
#include "gsprt/thresholds.hpp"
#include "gsprt/validate.hpp"
