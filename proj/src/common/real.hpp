#pragma once

namespace ctig {

// Library-wide scalar type. The default build is single precision; the
// finite-difference test build compiles the same sources with
// CTIG_REAL_DOUBLE so gradient oracles are not drowned in float round-off.
#ifdef CTIG_REAL_DOUBLE
using real = double;
#else
using real = float;
#endif

}  // namespace ctig
