#pragma once

#include "common.hpp"

namespace fcl {

// Axis-aligned box, corners (x1,y1) < (x2,y2)
struct Box {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  bool valid() const { return width() > 0.0 && height() > 0.0; }
};

// One human-object candidate pair as produced by the (synthetic) first stage.
struct PairFeatures {
  Vec x_h;
  Vec x_o;
  Vec x_v;
  Vec x_sp;       // filled from boxes by spatial_feature()
  double s_h = 1.0;
  double s_o = 1.0;
  Box human_box;
  Box object_box;
  BitVec y;       // multi-hot over C; all-zero marks a negative pair
  bool labeled() const {
    for (auto b : y)
      if (b) return true;
    return false;
  }
};

}  // namespace fcl
