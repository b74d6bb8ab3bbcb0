#include <algorithm>

#include "anchorloc/errors.h"
#include "anchorloc/random.h"
#include "anchorloc/synth.h"

namespace anchorloc {

Image Degrade(const Image& image, double blur_sigma, double noise_sigma,
              std::uint64_t seed) {
  if (blur_sigma < 0.0 || noise_sigma < 0.0) {
    throw InvalidArgument("degradation sigmas must be >= 0");
  }
  Image out = GaussianBlur(image, blur_sigma);
  if (noise_sigma > 0.0) {
    Rng rng(seed);
    for (float& v : out.data()) {
      v = static_cast<float>(std::clamp(v + noise_sigma * rng.Normal(), 0.0, 255.0));
    }
  }
  return out;
}

}  // namespace anchorloc
