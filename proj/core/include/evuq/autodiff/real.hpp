#pragma once

namespace evuq {

// Network arithmetic runs in 32-bit. The 64-bit variant of the core library
// defines EVUQ_REAL_DOUBLE and is used only by gradient-check tests.
#ifdef EVUQ_REAL_DOUBLE
using Real = double;
#else
using Real = float;
#endif

}  // namespace evuq
