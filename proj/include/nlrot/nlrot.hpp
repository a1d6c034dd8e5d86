#pragma once

#include "nlrot/common.hpp"
#include "nlrot/states.hpp"
#include "nlrot/channels.hpp"
#include "nlrot/measure.hpp"
#include "nlrot/tomography.hpp"
#include "nlrot/metrology.hpp"
#include "nlrot/io.hpp"
#include "nlrot/harness/config.hpp"
#include "nlrot/harness/fit.hpp"
#include "nlrot/harness/sweep.hpp"
#include "nlrot/harness/verify.hpp"
#include "nlrot/harness/cli.hpp"
