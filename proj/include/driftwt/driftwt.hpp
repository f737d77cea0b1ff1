#pragma once

#include "driftwt/common.hpp"
#include "driftwt/constraints.hpp"
#include "driftwt/critic.hpp"
#include "driftwt/data.hpp"
#include "driftwt/experiment.hpp"
#include "driftwt/kernels.hpp"
#include "driftwt/metrics.hpp"
#include "driftwt/model.hpp"
#include "driftwt/numerics.hpp"
#include "driftwt/objectives.hpp"
#include "driftwt/optim.hpp"
#include "driftwt/pgd.hpp"
#include "driftwt/ratio_bench.hpp"
#include "driftwt/selftest.hpp"
#include "driftwt/trainer.hpp"
#include "driftwt/weights.hpp"
