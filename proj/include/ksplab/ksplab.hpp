#pragma once

#include "array.hpp"
#include "calibration.hpp"
#include "coils.hpp"
#include "experiment.hpp"
#include "fft.hpp"
#include "filters.hpp"
#include "gradcheck.hpp"
#include "io.hpp"
#include "losses.hpp"
#include "metrics.hpp"
#include "perceptual.hpp"
#include "phantom.hpp"
#include "recon.hpp"
#include "sampling.hpp"
#include "ssim.hpp"
