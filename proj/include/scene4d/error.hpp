// Copyright Contributors to the scene4d Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace scene4d {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define SCENE4D_DEFINE_ERROR(NAME)                      \
  struct NAME : Error {                                 \
    using Error::Error;                                 \
    NAME() : Error(#NAME) {}                            \
  }

SCENE4D_DEFINE_ERROR(DimensionMismatch);
SCENE4D_DEFINE_ERROR(EmptyCloud);
SCENE4D_DEFINE_ERROR(DegenerateDepth);
SCENE4D_DEFINE_ERROR(UnknownPreset);
SCENE4D_DEFINE_ERROR(AllHoles);
SCENE4D_DEFINE_ERROR(UnknownKind);
SCENE4D_DEFINE_ERROR(BadMagic);
SCENE4D_DEFINE_ERROR(TruncatedFile);
SCENE4D_DEFINE_ERROR(NoCoverage);
SCENE4D_DEFINE_ERROR(NonFiniteLoss);
SCENE4D_DEFINE_ERROR(NoCorrespondence);
SCENE4D_DEFINE_ERROR(EmptyValidMask);
SCENE4D_DEFINE_ERROR(EmptyMask);
SCENE4D_DEFINE_ERROR(EmptyOverlap);
SCENE4D_DEFINE_ERROR(ImageTooSmall);
SCENE4D_DEFINE_ERROR(SizeMismatch);
SCENE4D_DEFINE_ERROR(EmptyVideo);
SCENE4D_DEFINE_ERROR(ManifestMismatch);
SCENE4D_DEFINE_ERROR(UnknownScene);
SCENE4D_DEFINE_ERROR(IoError);
SCENE4D_DEFINE_ERROR(InvalidArgument);

#undef SCENE4D_DEFINE_ERROR

}  // namespace scene4d
