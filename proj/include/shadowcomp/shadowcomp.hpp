#pragma once

#include "shadowcomp/arch_spec.hpp"
#include "shadowcomp/cai_attention.hpp"
#include "shadowcomp/dataset.hpp"
#include "shadowcomp/error.hpp"
#include "shadowcomp/illumination.hpp"
#include "shadowcomp/imaging.hpp"
#include "shadowcomp/losses.hpp"
#include "shadowcomp/metrics.hpp"
#include "shadowcomp/parallel.hpp"
#include "shadowcomp/pipeline.hpp"
#include "shadowcomp/png_io.hpp"
#include "shadowcomp/raster.hpp"
