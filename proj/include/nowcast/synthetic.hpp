#pragma once

#include <cstdint>

#include "nowcast/archive.hpp"

namespace nowcast {

// Synthetic rain-advection world. Gaussian rain cells drift along a smooth
// per-region motion field; the radar samples the central footprint at fine
// resolution while the 11 satellite channels are deterministic coarse proxies
// (blurred saturation transforms, some inverted, some lagged) of the same
// field, so the forecasting task is learnable end to end.
struct SyntheticConfig {
    Geometry geom{};
    double sat_px_km = 12.0;
    double radar_px_km = 2.0;

    double mean_active_cells = 14.0;  // expected cells alive at any instant
    double center_bias = 0.6;         // fraction of births near the radar footprint
    double sigma_min_km = 14.0;
    double sigma_max_km = 56.0;
    double peak_min = 0.1;   // mm/h, log-uniform cell peaks
    double peak_max = 60.0;
    double speed_min_kmh = 8.0;
    double speed_max_kmh = 32.0;
    double lifetime_min_h = 2.0;
    double lifetime_max_h = 8.0;

    double rain_floor = 0.01;  // rates below the detectable floor become exact 0
    double rain_cap = 60.0;
    double missing_slot_prob = 0.0;  // chance a slot carries an invalid radar disk
};

// Fully reproducible from (seed, n_slots, config); requires n_slots >= one
// input+output window.
RegionArchive generate_synthetic_region(std::uint64_t seed, int n_slots,
                                        const SyntheticConfig& cfg = SyntheticConfig{});

}  // namespace nowcast
