#pragma once

#include "mmfuse/image.hpp"
#include "mmfuse/rng.hpp"

namespace mmfuse {

// Bilinear resize with half-pixel centers and edge clamping (the
// align_corners=false convention). Same-size resizes return the input.
GrayImage resize_bilinear(const GrayImage& image, int height, int width);

// Resize to the model input size and clamp to [0, 1].
GrayImage preprocess_for_model(const GrayImage& image, int height, int width);

GrayImage flip_horizontal(const GrayImage& image);

// Rotation about the image center by `degrees`, bilinear
// resampling, zero outside the source.
GrayImage rotate(const GrayImage& image, double degrees);

struct AugmentParams {
  double flip_probability = 0.5;
  double max_rotation_deg = 10.0;
};

// Draws the flip (Bernoulli) then the angle (uniform in +-max) from `rng`.
GrayImage augment(const GrayImage& image, Rng& rng, const AugmentParams& params = {});

}  // namespace mmfuse
