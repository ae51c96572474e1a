#pragma once

#include "random.hpp"
#include "series.hpp"
#include "distributions.hpp"
#include "model.hpp"
#include "tdbm.hpp"
#include "bridge.hpp"
#include "rbm.hpp"
#include "baseline.hpp"
#include "stats.hpp"
#include "batch.hpp"
