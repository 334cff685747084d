#pragma once

#include "onepath/common.hpp"
#include "onepath/rng.hpp"
#include "onepath/group.hpp"
#include "onepath/prf.hpp"
#include "onepath/ske.hpp"
#include "onepath/dlog.hpp"
#include "onepath/sharing.hpp"
#include "onepath/params.hpp"
#include "onepath/ipfe.hpp"
#include "onepath/tree.hpp"
#include "onepath/cart.hpp"
#include "onepath/tree_json.hpp"
#include "onepath/model_prep.hpp"
#include "onepath/input_share.hpp"
#include "onepath/wire.hpp"
#include "onepath/transcript.hpp"
#include "onepath/transport.hpp"
#include "onepath/entities.hpp"
#include "onepath/audit.hpp"
#include "onepath/files.hpp"
#include "onepath/synth.hpp"
#include "onepath/bench.hpp"
#include "onepath/selftest.hpp"
