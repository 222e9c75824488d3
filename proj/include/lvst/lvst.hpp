#pragma once

#include "lvst/app.hpp"
#include "lvst/bilateral_grid.hpp"
#include "lvst/conv.hpp"
#include "lvst/error.hpp"
#include "lvst/feature_transfer.hpp"
#include "lvst/guidance.hpp"
#include "lvst/image_io.hpp"
#include "lvst/losses.hpp"
#include "lvst/mask.hpp"
#include "lvst/parallel.hpp"
#include "lvst/pipeline.hpp"
#include "lvst/random.hpp"
#include "lvst/tensor.hpp"
#include "lvst/weights.hpp"
