#pragma once

#include <map>
#include <string>

namespace nowcast::cli {

// Desk-scale run presets. Each mirrors one full-scale configuration row and
// records the original values under "full_scale"; the desk values shrink the
// subset and the network so a run finishes on commodity hardware.
inline const std::map<std::string, std::string>& presets() {
    static const std::map<std::string, std::string> table = {
        {"core-exp4-desk", R"JSON({
  "description": "ResNet 2D U-Net, bilinear crop-and-upsample head",
  "scale": "mmh",
  "subset_size": 2000,
  "model": {
    "base_width": 16, "depth": 4, "upsampler": "bilinear", "clt": false,
    "classes": 15,
    "geometry": {"out_len": 32}
  },
  "train": {
    "learning_rate": 1e-4, "epochs": 4, "batch_size": 8, "grad_accumulation": 2,
    "loss": "weighted_ce"
  },
  "full_scale": {"samples": "15K", "epochs": 4, "buckets": "mmh", "up": "Bilinear",
                  "clt": false, "lr": 1e-4, "bs": "8 (16)", "lt": 32, "base_width": 64}
})JSON"},
        {"core-exp5-desk", R"JSON({
  "description": "core-exp4 plus lead-time conditioning",
  "scale": "mmh",
  "subset_size": 2000,
  "model": {
    "base_width": 16, "depth": 4, "upsampler": "bilinear", "clt": true,
    "classes": 15,
    "geometry": {"out_len": 32}
  },
  "train": {
    "learning_rate": 1e-4, "epochs": 3, "batch_size": 2, "grad_accumulation": 16,
    "loss": "weighted_ce"
  },
  "full_scale": {"samples": "15K", "epochs": 3, "buckets": "mmh", "up": "Bilinear",
                  "clt": true, "lr": 1e-4, "bs": "2 (32)", "lt": 32, "base_width": 64}
})JSON"},
        {"core-exp6-desk", R"JSON({
  "description": "core-exp4 with inverse-frequency class weights",
  "scale": "mmh_w",
  "subset_size": 1500,
  "model": {
    "base_width": 16, "depth": 4, "upsampler": "bilinear", "clt": false,
    "classes": 15,
    "geometry": {"out_len": 32}
  },
  "train": {
    "learning_rate": 1e-3, "epochs": 4, "batch_size": 16, "grad_accumulation": 1,
    "loss": "weighted_ce"
  },
  "full_scale": {"samples": "10K", "epochs": 4, "buckets": "mmh_w", "up": "Bilinear",
                  "clt": false, "lr": 1e-3, "bs": "16 (16)", "lt": 32, "base_width": 64}
})JSON"},
        {"core-exp8-desk", R"JSON({
  "description": "ResNet 2D U-Net, learned super-resolution head (best core run)",
  "scale": "mmh",
  "subset_size": 2000,
  "model": {
    "base_width": 16, "depth": 4, "upsampler": "learned", "sr_width": 16, "sr_blocks": 4,
    "clt": false, "classes": 15,
    "geometry": {"out_len": 32}
  },
  "train": {
    "learning_rate": 1e-4, "epochs": 4, "batch_size": 8, "grad_accumulation": 2,
    "loss": "weighted_ce"
  },
  "full_scale": {"samples": "15K", "epochs": 4, "buckets": "mmh", "up": "learned-SR",
                  "clt": false, "lr": 1e-4, "bs": "8 (16)", "lt": 32, "base_width": 64}
})JSON"},
        {"nowcast-exp2-desk", R"JSON({
  "description": "4-hour nowcasting run, nearest-neighbor head",
  "scale": "mmh",
  "subset_size": 1500,
  "model": {
    "base_width": 16, "depth": 4, "upsampler": "nearest", "clt": false,
    "classes": 15,
    "geometry": {"out_len": 16}
  },
  "train": {
    "learning_rate": 1e-4, "epochs": 6, "batch_size": 4, "grad_accumulation": 8,
    "loss": "weighted_ce"
  },
  "full_scale": {"samples": "10K", "epochs": 13, "buckets": "mmh", "up": "Nearest",
                  "clt": false, "lr": 1e-4, "bs": "4 (32)", "lt": 16, "base_width": 64}
})JSON"},
    };
    return table;
}

}  // namespace nowcast::cli
