#pragma once

#include "evrdf/nn/core.hpp"
#include "evrdf/nn/gradcheck.hpp"
#include "evrdf/nn/model.hpp"
#include "evrdf/nn/serialize.hpp"
#include "evrdf/nn/train.hpp"
