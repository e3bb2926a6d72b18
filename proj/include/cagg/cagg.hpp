#pragma once

#include "cagg/adversary.hpp"
#include "cagg/basestation.hpp"
#include "cagg/bytes.hpp"
#include "cagg/crypto.hpp"
#include "cagg/domain.hpp"
#include "cagg/error.hpp"
#include "cagg/node.hpp"
#include "cagg/packet.hpp"
#include "cagg/report.hpp"
#include "cagg/scenario.hpp"
#include "cagg/selftest.hpp"
#include "cagg/simulator.hpp"
#include "cagg/topology.hpp"
