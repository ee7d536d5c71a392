#pragma once

#include "finsler/errors.hpp"
#include "finsler/dual.hpp"
#include "finsler/linalg.hpp"
#include "finsler/expression.hpp"
#include "finsler/space.hpp"
#include "finsler/sampling.hpp"
#include "finsler/tensors.hpp"
#include "finsler/fields.hpp"
#include "finsler/connection.hpp"
#include "finsler/geodesics.hpp"
#include "finsler/curvature.hpp"
#include "finsler/calculus.hpp"
#include "finsler/report.hpp"
#include "finsler/busemann.hpp"
#include "finsler/splitting.hpp"
#include "finsler/gallery.hpp"
#include "finsler/suites.hpp"
