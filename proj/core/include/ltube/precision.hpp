#pragma once

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "ltube/flow.hpp"
#include "ltube/geometry.hpp"

namespace ltube {

/// 100-decimal-digit binary float. Used where chaotic amplification of
/// rounding (roughly a factor e per collision) would swamp double precision:
/// time reversal over tens of collisions and oracle comparisons over a
/// hundred.
using HighReal = boost::multiprecision::number<boost::multiprecision::cpp_bin_float<100>,
                                               boost::multiprecision::et_off>;

extern template std::optional<HitT<HighReal>> intersect_ray(const Surface&,
                                                            const LineElementT<HighReal>&,
                                                            HighReal, HighReal);
extern template FlowStateT<HighReal> make_state(const QuenchedTube&, const LineElementT<HighReal>&);
extern template CollisionEventT<HighReal> next_event(const CellConfig&, const FlowStateT<HighReal>&);
extern template FlowStateT<HighReal> advance(const FlowStateT<HighReal>&, const HighReal&);
extern template TrajectoryT<HighReal> trace(const QuenchedTube&, const FlowStateT<HighReal>&,
                                            const StopCondition&);

}  // namespace ltube
