#pragma once

#include <cstdint>
#include <vector>

#include "voxtrack/field.hpp"
#include "voxtrack/geometry.hpp"
#include "voxtrack/image.hpp"

namespace voxtrack {

struct TrainingView {
  ImageRGB image;
  Pose pose;
  Camera camera;
};

struct FitOptions {
  int iterations = 100;
  double learning_rate = 0.1;
  double step = 0.0;  ///< 0 picks half the smallest object voxel edge
  bool jitter = false;  ///< per-ray offset of the sample grid, fixed for the whole fit
  std::uint64_t seed = 0;
  double near = 1e-3;
  double far = 1e3;
};

struct FitResult {
  VoxelField field;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  std::vector<double> loss_trace;  ///< loss after each accepted iteration, starting with the initial loss
  int accepted = 0;
  int rejected = 0;
};

/**
 * Fits the object ("difference") field so that its composition with the
 * frozen background reproduces the training images. Minimizes the mean
 * squared RGB error over every training pixel with Adam-scaled steps; a step
 * is accepted only if the loss does not increase, otherwise the learning rate
 * halves. Only the object's pre-activation grids change.
 */
FitResult fit_difference_field(const std::vector<TrainingView>& views, const VoxelField& background,
                               const VoxelField& init, const FitOptions& options);

/// Mean squared RGB error of composed renders against the views.
double composed_loss(const std::vector<TrainingView>& views, const VoxelField& background,
                     const VoxelField& object, const FitOptions& options);

}  // namespace voxtrack
