#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "gradeprop/block_model.hpp"

namespace gradeprop {

using DigEventId = std::int64_t;
using TruckId = std::int64_t;

// Sensed bucket engagement point. `position` is empty when the bucket sensor
// dropped out for this dig.
struct DigEvent {
    DigEventId id = 0;
    std::optional<Vec3> position;
    std::string bench_id;
    double timestamp = 0.0;  // seconds since epoch
};

// One bucket of a load-haul cycle: dig -> truck load -> dump destination.
struct HaulCycle {
    DigEventId dig_event_id = 0;
    TruckId truck_id = 0;
    std::string dump_id;
    double timestamp = 0.0;
};

}  // namespace gradeprop
