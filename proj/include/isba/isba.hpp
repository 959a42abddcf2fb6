#pragma once

#include "isba/checkpoint.hpp"
#include "isba/driver.hpp"
#include "isba/error.hpp"
#include "isba/io.hpp"
#include "isba/metrics.hpp"
#include "isba/model.hpp"
#include "isba/random.hpp"
#include "isba/refine.hpp"
#include "isba/seq_data.hpp"
#include "isba/soft_target.hpp"
#include "isba/synthetic.hpp"
#include "isba/train.hpp"
