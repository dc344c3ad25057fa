#pragma once

#include "layercake/errors.hpp"
#include "layercake/quadrature.hpp"
#include "layercake/geometry.hpp"
#include "layercake/mesh.hpp"
#include "layercake/arnoldi.hpp"
#include "layercake/bloch.hpp"
#include "layercake/modal.hpp"
#include "layercake/scatter.hpp"
#include "layercake/oracle.hpp"
#include "layercake/cache.hpp"
#include "layercake/design.hpp"
#include "layercake/config.hpp"
#include "layercake/io.hpp"
