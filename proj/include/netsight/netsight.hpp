#pragma once

#include "netsight/adapt.hpp"
#include "netsight/checkpoint.hpp"
#include "netsight/config.hpp"
#include "netsight/contrastive.hpp"
#include "netsight/dataset.hpp"
#include "netsight/drift_sim.hpp"
#include "netsight/error.hpp"
#include "netsight/hash.hpp"
#include "netsight/log.hpp"
#include "netsight/metrics.hpp"
#include "netsight/nn.hpp"
#include "netsight/optim.hpp"
#include "netsight/pipeline.hpp"
#include "netsight/pseudo_label.hpp"
#include "netsight/report.hpp"
#include "netsight/shift_detect.hpp"
#include "netsight/shift_explain.hpp"
#include "netsight/tensor.hpp"
