#pragma once

// Closed-form image-to-image maps standing in for the network.

#include <array>

#include "p2n/p2n.hpp"

namespace p2n::testing {

/// A fixed linear map: 3x3 convolution with zero padding plus a per-pixel
/// gain. Affine terms are deliberately absent.
struct LinearStub {
  std::array<double, 9> kernel{0.05, 0.1, 0.05, 0.1, 0.4, 0.1, 0.05, 0.1, 0.05};
  double gain = 1.0;

  Image forward(const Image& x) const {
    Image out(x.shape());
    for (int c = 0; c < x.channels(); ++c)
      for (int y = 0; y < x.height(); ++y)
        for (int xx = 0; xx < x.width(); ++xx) {
          double s = 0.0;
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
              const int sy = y + dy, sx = xx + dx;
              if (sy < 0 || sy >= x.height() || sx < 0 || sx >= x.width()) continue;
              s += kernel[(dy + 1) * 3 + dx + 1] * x.at(c, sy, sx);
            }
          out.at(c, y, xx) = gain * s;
        }
    return out;
  }
};

/// F(x) = x^2 elementwise.
struct SquareStub {
  Image forward(const Image& x) const {
    Image out = x;
    for (double& v : out.data()) v = v * v;
    return out;
  }
};

struct IdentityStub {
  Image forward(const Image& x) const { return x; }
};

struct ConstantStub {
  double value = 0.5;
  Image forward(const Image& x) const { return Image(x.shape(), value); }
};

/// Adds a constant offset: maps 0.5 to 0.4 with offset -0.1.
struct OffsetStub {
  double offset = -0.1;
  Image forward(const Image& x) const {
    Image out = x;
    out += offset;
    return out;
  }
};

}  // namespace p2n::testing
