#pragma once

// Single include point for cpp-httplib. <resolv.h>, pulled in transitively,
// leaks a `_res` macro that corrupts Eigen's internal declarations; scrub it
// so include order stops mattering.

#include <httplib.h>

#ifdef _res
#undef _res
#endif
