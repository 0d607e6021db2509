#pragma once

#include "nowcast/common.hpp"

namespace nowcast {

// Pixel geometry shared by the data pipeline and the model. Defaults match
// the production layout: 252x252 archive patches, 128x128 model input taken
// as a center crop, 42x42 central forecast patch upsampled x6 back to the
// 252x252 label grid, 4 input slots and 32 forecast slots at 15 minutes.
//
// Tiny test fixtures shrink every field proportionally (e.g. 36/16/6/x6);
// the constraints below are what the rest of the code relies on.
struct Geometry {
    int patch = 252;
    int input = 128;
    int crop = 42;
    int sr_factor = 6;
    int in_len = 4;
    int out_len = 32;
    int sat_channels = 11;
    int static_channels = 3;
    int slot_minutes = 15;

    int window() const { return in_len + out_len; }
    int input_offset() const { return (patch - input) / 2; }  // 62 at default
    int crop_offset() const { return (input - crop) / 2; }    // 43 at default

    void validate() const {
        if (patch <= 0 || input <= 0 || crop <= 0 || sr_factor <= 0 || in_len <= 0 || out_len <= 0)
            throw DataError("geometry: all sizes must be positive");
        if (input > patch) throw DataError("geometry: input crop larger than patch");
        if (crop > input) throw DataError("geometry: forecast crop larger than input");
        if (crop * sr_factor != patch)
            throw DataError("geometry: crop * sr_factor must equal patch size");
    }

    static Geometry tiny() {
        Geometry g;
        g.patch = 36;
        g.input = 16;
        g.crop = 6;
        g.sr_factor = 6;
        g.in_len = 4;
        g.out_len = 4;
        return g;
    }
};

}  // namespace nowcast
