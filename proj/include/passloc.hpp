#pragma once

#include "passloc/error.hpp"
#include "passloc/core.hpp"
#include "passloc/csi_features.hpp"
#include "passloc/database_io.hpp"
#include "passloc/kde.hpp"
#include "passloc/ssp.hpp"
#include "passloc/csi.hpp"
#include "passloc/lstm.hpp"
#include "passloc/airsim.hpp"
#include "passloc/protocol.hpp"
#include "passloc/scenario.hpp"
#include "passloc/eval.hpp"
