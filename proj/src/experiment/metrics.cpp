#include "eds/experiment/metrics.hpp"

#include "eds/common.hpp"
#include "eds/slads/measurement.hpp"

namespace eds::metrics {

double total_distortion(const LabelImage& truth, const LabelImage& recon) {
  const std::size_t d = slads::distortion(truth, recon);
  if (truth.size() == 0) throw InputError("total_distortion: empty image");
  return static_cast<double>(d) / static_cast<double>(truth.size());
}

double misclassification_rate(std::span<const Label> classified, std::span<const Label> truth) {
  if (classified.size() != truth.size()) throw InputError("misclassification: length mismatch");
  if (classified.empty()) throw InputError("misclassification: no measured pixels");
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) wrong += classified[i] != truth[i];
  return static_cast<double>(wrong) / static_cast<double>(truth.size());
}

}  // namespace eds::metrics
