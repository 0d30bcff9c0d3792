#pragma once

#include "rsm/error.hpp"
#include "rsm/random.hpp"
#include "rsm/kernels.hpp"
#include "rsm/svr.hpp"
#include "rsm/dataset.hpp"
#include "rsm/synth.hpp"
#include "rsm/search.hpp"
#include "rsm/ensemble.hpp"
#include "rsm/gcv.hpp"
#include "rsm/reporting.hpp"
#include "rsm/serialization.hpp"
