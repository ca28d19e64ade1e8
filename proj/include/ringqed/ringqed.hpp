#pragma once

#include "ringqed/error.hpp"
#include "ringqed/units.hpp"
#include "ringqed/keyvalue.hpp"
#include "ringqed/materials.hpp"
#include "ringqed/records.hpp"
#include "ringqed/resonator.hpp"
#include "ringqed/strain.hpp"
#include "ringqed/noise.hpp"
#include "ringqed/cqed.hpp"
#include "ringqed/lsq.hpp"
#include "ringqed/models.hpp"
#include "ringqed/fitting.hpp"
#include "ringqed/planner.hpp"
#include "ringqed/io.hpp"
