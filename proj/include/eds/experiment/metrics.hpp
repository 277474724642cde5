#pragma once

#include <span>

#include "eds/phantom/types.hpp"

namespace eds::metrics {

// Fraction of pixels whose labels differ, in [0, 1]. InputError on a size
// mismatch.
double total_distortion(const LabelImage& truth, const LabelImage& recon);

// Fraction of measured pixels whose classified label differs from truth.
// InputError when empty or the lengths differ.
double misclassification_rate(std::span<const Label> classified, std::span<const Label> truth);

}  // namespace eds::metrics
