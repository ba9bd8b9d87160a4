#pragma once

#include "sphflow/assembly.hpp"
#include "sphflow/core.hpp"
#include "sphflow/fields.hpp"
#include "sphflow/harmonics.hpp"
#include "sphflow/io.hpp"
#include "sphflow/krylov.hpp"
#include "sphflow/mesh.hpp"
#include "sphflow/models.hpp"
#include "sphflow/parallel.hpp"
#include "sphflow/spectral.hpp"
#include "sphflow/viz.hpp"
