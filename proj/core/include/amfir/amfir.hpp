#pragma once

#include "amfir/ami.hpp"
#include "amfir/amd.hpp"
#include "amfir/asi.hpp"
#include "amfir/dataset.hpp"
#include "amfir/encoder.hpp"
#include "amfir/metric.hpp"
#include "amfir/options.hpp"
#include "amfir/rng.hpp"
#include "amfir/text.hpp"
#include "amfir/trainer.hpp"
#include "amfir/types.hpp"
