#pragma once

#include "latent_calib/autoencoder/autoencoder.hpp"
#include "latent_calib/calibration/calibration.hpp"
#include "latent_calib/calibration/sweep.hpp"
#include "latent_calib/datagen/dataset.hpp"
#include "latent_calib/datagen/normalize.hpp"
#include "latent_calib/datagen/simulator.hpp"
#include "latent_calib/experiments/config.hpp"
#include "latent_calib/experiments/contour.hpp"
#include "latent_calib/experiments/density.hpp"
#include "latent_calib/experiments/pipeline.hpp"
#include "latent_calib/experiments/report.hpp"
#include "latent_calib/experiments/toy.hpp"
#include "latent_calib/forward_uq/forward_model.hpp"
#include "latent_calib/forward_uq/gaussian_nll.hpp"
#include "latent_calib/io.hpp"
#include "latent_calib/netcore/checkpoint.hpp"
#include "latent_calib/netcore/dropout.hpp"
#include "latent_calib/netcore/network.hpp"
#include "latent_calib/netcore/rng.hpp"
#include "latent_calib/netcore/tensor.hpp"
#include "latent_calib/netcore/training.hpp"
