#pragma once

#include <stdexcept>
#include <string>

namespace topodepth {

// Base for every error thrown by the library. Each failure mode gets its own
// type so callers can catch narrowly; the CLI catches Error and maps it to a
// nonzero exit.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define TOPODEPTH_ERROR_TYPE(Name)       \
  struct Name : Error {                  \
    using Error::Error;                  \
  }

TOPODEPTH_ERROR_TYPE(InvalidScene);
TOPODEPTH_ERROR_TYPE(PoseInsideObstacle);
TOPODEPTH_ERROR_TYPE(DegenerateLoop);
TOPODEPTH_ERROR_TYPE(IoError);
TOPODEPTH_ERROR_TYPE(TooFewPoses);
TOPODEPTH_ERROR_TYPE(PathTooShort);
TOPODEPTH_ERROR_TYPE(IndexOutOfRange);
TOPODEPTH_ERROR_TYPE(AllHoles);
TOPODEPTH_ERROR_TYPE(HolePresent);
TOPODEPTH_ERROR_TYPE(OutOfRange);
TOPODEPTH_ERROR_TYPE(ShapeMismatch);
TOPODEPTH_ERROR_TYPE(EmptyBatch);
TOPODEPTH_ERROR_TYPE(NonFiniteLoss);
TOPODEPTH_ERROR_TYPE(NoValidPixels);
TOPODEPTH_ERROR_TYPE(LengthMismatch);
TOPODEPTH_ERROR_TYPE(NodeTooSmall);
TOPODEPTH_ERROR_TYPE(VersionMismatch);
TOPODEPTH_ERROR_TYPE(ChecksumMismatch);
TOPODEPTH_ERROR_TYPE(ConfigError);

#undef TOPODEPTH_ERROR_TYPE

}  // namespace topodepth
