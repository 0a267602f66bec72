#pragma once

#include "minihsm/aes.hpp"
#include "minihsm/attack_sim.hpp"
#include "minihsm/bench.hpp"
#include "minihsm/bigint.hpp"
#include "minihsm/bytes.hpp"
#include "minihsm/envelope.hpp"
#include "minihsm/errors.hpp"
#include "minihsm/rng.hpp"
#include "minihsm/rsa.hpp"
#include "minihsm/sha256.hpp"
#include "minihsm/token_store.hpp"
