#pragma once

#include "tubewalk/env.hpp"
#include "tubewalk/gamma.hpp"
#include "tubewalk/mc.hpp"
#include "tubewalk/quench_dp.hpp"
#include "tubewalk/rate.hpp"
#include "tubewalk/tube.hpp"
#include "tubewalk/walk.hpp"
