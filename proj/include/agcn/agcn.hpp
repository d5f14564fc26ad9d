#pragma once

#include "agcn/autodiff.hpp"
#include "agcn/checkpoint.hpp"
#include "agcn/data.hpp"
#include "agcn/errors.hpp"
#include "agcn/gcn.hpp"
#include "agcn/grad_check.hpp"
#include "agcn/init.hpp"
#include "agcn/labelgraph.hpp"
#include "agcn/matrix.hpp"
#include "agcn/metrics.hpp"
#include "agcn/model.hpp"
#include "agcn/rng.hpp"
