#pragma once

#include "eegflow/bandfilter.hpp"
#include "eegflow/classifier.hpp"
#include "eegflow/container.hpp"
#include "eegflow/core.hpp"
#include "eegflow/imageio.hpp"
#include "eegflow/ingest.hpp"
#include "eegflow/jointtrain.hpp"
#include "eegflow/nn.hpp"
#include "eegflow/optflow.hpp"
#include "eegflow/pipeline.hpp"
#include "eegflow/synthetic.hpp"
#include "eegflow/topomap.hpp"
