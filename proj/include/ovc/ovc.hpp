#ifndef OVC_OVC_HPP
#define OVC_OVC_HPP

#include "ovc/adam.hpp"
#include "ovc/arm.hpp"
#include "ovc/bind.hpp"
#include "ovc/bitstream.hpp"
#include "ovc/common.hpp"
#include "ovc/decoder.hpp"
#include "ovc/encoder.hpp"
#include "ovc/flow.hpp"
#include "ovc/frame.hpp"
#include "ovc/laplace.hpp"
#include "ovc/mac_audit.hpp"
#include "ovc/metrics.hpp"
#include "ovc/ops.hpp"
#include "ovc/param_codec.hpp"
#include "ovc/pipeline.hpp"
#include "ovc/quant.hpp"
#include "ovc/range_coder.hpp"
#include "ovc/rng.hpp"
#include "ovc/tensor.hpp"
#include "ovc/video_io.hpp"
#include "ovc/video_ops.hpp"

#endif
