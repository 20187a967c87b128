#pragma once

#ifndef FWDMIX_VERSION
#define FWDMIX_VERSION "0.1.0"
#endif

namespace fwdmix {
inline constexpr const char* kVersion = FWDMIX_VERSION;
}
