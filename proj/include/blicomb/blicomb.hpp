#pragma once

#include "blicomb/align.hpp"
#include "blicomb/anchors.hpp"
#include "blicomb/checkpoint.hpp"
#include "blicomb/contrastive.hpp"
#include "blicomb/corpusio.hpp"
#include "blicomb/pipeline.hpp"
#include "blicomb/retrieve.hpp"
#include "blicomb/spring.hpp"
#include "blicomb/synthgen.hpp"
#include "blicomb/types.hpp"
