#pragma once

#include "epiq/clustering/dmdt.hpp"
#include "epiq/clustering/kmeans.hpp"
#include "epiq/common/csv.hpp"
#include "epiq/common/date.hpp"
#include "epiq/common/error.hpp"
#include "epiq/common/quantile.hpp"
#include "epiq/data/cleaning.hpp"
#include "epiq/data/features.hpp"
#include "epiq/data/io.hpp"
#include "epiq/ensemble/aggregation.hpp"
#include "epiq/ensemble/ensemble.hpp"
#include "epiq/gp/gp.hpp"
#include "epiq/metrics/evaluate.hpp"
#include "epiq/metrics/forecast.hpp"
#include "epiq/metrics/pinball.hpp"
#include "epiq/neural/dense_net.hpp"
#include "epiq/neural/serialize.hpp"
#include "epiq/neural/train.hpp"
#include "epiq/pipeline/config.hpp"
#include "epiq/pipeline/models.hpp"
#include "epiq/pipeline/run.hpp"
#include "epiq/pipeline/synthetic.hpp"
#include "epiq/quantilegen/negbin.hpp"
#include "epiq/seirqd/fit.hpp"
#include "epiq/seirqd/model.hpp"
#include "epiq/trees/forest.hpp"
#include "epiq/trees/gbdt.hpp"
#include "epiq/trees/serialize.hpp"
#include "epiq/trees/tree.hpp"
