#pragma once

#include "stylevar/checkpoint.hpp"
#include "stylevar/common.hpp"
#include "stylevar/config.hpp"
#include "stylevar/data.hpp"
#include "stylevar/gradcheck.hpp"
#include "stylevar/grpo.hpp"
#include "stylevar/image.hpp"
#include "stylevar/metrics.hpp"
#include "stylevar/model.hpp"
#include "stylevar/optim.hpp"
#include "stylevar/rng.hpp"
#include "stylevar/sampler.hpp"
#include "stylevar/schedule.hpp"
#include "stylevar/session.hpp"
#include "stylevar/sft.hpp"
#include "stylevar/tensor.hpp"
#include "stylevar/tokenizer.hpp"
