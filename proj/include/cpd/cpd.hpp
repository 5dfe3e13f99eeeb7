#pragma once

#include "cpd/bayes.hpp"
#include "cpd/changepoints.hpp"
#include "cpd/costs.hpp"
#include "cpd/csv.hpp"
#include "cpd/error.hpp"
#include "cpd/experiment.hpp"
#include "cpd/harness.hpp"
#include "cpd/json_io.hpp"
#include "cpd/metrics.hpp"
#include "cpd/parallel.hpp"
#include "cpd/peaks.hpp"
#include "cpd/search.hpp"
#include "cpd/series.hpp"
#include "cpd/simulate.hpp"
