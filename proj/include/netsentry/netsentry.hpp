#pragma once

#include "netsentry/augment.hpp"
#include "netsentry/bialstm.hpp"
#include "netsentry/capture.hpp"
#include "netsentry/config.hpp"
#include "netsentry/dataset.hpp"
#include "netsentry/error.hpp"
#include "netsentry/evasion.hpp"
#include "netsentry/exchange.hpp"
#include "netsentry/features.hpp"
#include "netsentry/flow.hpp"
#include "netsentry/metrics.hpp"
#include "netsentry/nn/cells.hpp"
#include "netsentry/nn/optim.hpp"
#include "netsentry/nn/tape.hpp"
#include "netsentry/packet.hpp"
#include "netsentry/rng.hpp"
#include "netsentry/sequence.hpp"
#include "netsentry/sequence_io.hpp"
#include "netsentry/synth.hpp"
#include "netsentry/text.hpp"
