#pragma once

#include "pgr/bundle_io.hpp"
#include "pgr/data.hpp"
#include "pgr/dsp.hpp"
#include "pgr/engine/bench.hpp"
#include "pgr/engine/stream.hpp"
#include "pgr/engine/train.hpp"
#include "pgr/eval.hpp"
#include "pgr/features.hpp"
#include "pgr/labels.hpp"
#include "pgr/models.hpp"
#include "pgr/onset.hpp"
#include "pgr/synth.hpp"
#include "pgr/wav.hpp"
