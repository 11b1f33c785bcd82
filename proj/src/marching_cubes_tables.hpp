#pragma once

// Classic marching-cubes lookup tables. Corner bit c is set when corner c is
// below the iso level; corners 0-3 are the z=0 face counter-clockwise from
// the origin, 4-7 the same at z=1.

namespace ntf::detail {

extern const int kEdgeTable[256];
extern const int kTriTable[256][16];

}  // namespace ntf::detail
