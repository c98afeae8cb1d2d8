#pragma once

#include "stemgen/checkpoint.hpp"
#include "stemgen/delay_codec.hpp"
#include "stemgen/edit_conditioning.hpp"
#include "stemgen/error.hpp"
#include "stemgen/eval_metrics.hpp"
#include "stemgen/grid_io.hpp"
#include "stemgen/model_config.hpp"
#include "stemgen/optimizer.hpp"
#include "stemgen/parameters.hpp"
#include "stemgen/rvq_codec.hpp"
#include "stemgen/sampler.hpp"
#include "stemgen/stem_layout.hpp"
#include "stemgen/synth_data.hpp"
#include "stemgen/trainer.hpp"
#include "stemgen/transformer.hpp"
