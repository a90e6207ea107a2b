// Apache License, Version 2.0, refer to LICENSE.txt

#ifndef RECSURV_RECSURV_HPP
#define RECSURV_RECSURV_HPP

#include "recsurv/data.hpp"
#include "recsurv/io.hpp"
#include "recsurv/model.hpp"
#include "recsurv/posterior.hpp"
#include "recsurv/rng.hpp"
#include "recsurv/sampler.hpp"
#include "recsurv/simulate.hpp"
#include "recsurv/slice.hpp"

#endif
