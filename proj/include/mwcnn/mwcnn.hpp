#pragma once

// Umbrella header for the mind-wandering EEG classifier library.

#include "mwcnn/dataset.hpp"
#include "mwcnn/eeg_io.hpp"
#include "mwcnn/gradcheck.hpp"
#include "mwcnn/metrics.hpp"
#include "mwcnn/model.hpp"
#include "mwcnn/nn_ops.hpp"
#include "mwcnn/preprocess.hpp"
#include "mwcnn/tensor.hpp"
#include "mwcnn/train.hpp"
#include "mwcnn/verify.hpp"
