#pragma once

// Umbrella header for the whole library.

#include "topodepth/checkpoint.hpp"
#include "topodepth/classifier.hpp"
#include "topodepth/config.hpp"
#include "topodepth/cvae.hpp"
#include "topodepth/dataset.hpp"
#include "topodepth/errors.hpp"
#include "topodepth/geometry.hpp"
#include "topodepth/image.hpp"
#include "topodepth/metrics.hpp"
#include "topodepth/nn.hpp"
#include "topodepth/preprocess.hpp"
#include "topodepth/render.hpp"
#include "topodepth/rng.hpp"
#include "topodepth/scene.hpp"
#include "topodepth/tensor.hpp"
#include "topodepth/topomap.hpp"
#include "topodepth/training.hpp"
#include "topodepth/trajectory.hpp"
