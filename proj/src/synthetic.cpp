#include "nowcast/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace nowcast {

namespace {

struct Cell {
    double x0, y0;        // km, position at birth
    double vx_off, vy_off;  // km/h, deviation from the region wind
    double sigma;         // km
    double peak;          // mm/h
    double birth_h;
    double life_h;
};

struct Wind {
    double vx, vy;        // km/h, steady component
    double ax, ay;        // km, oscillation displacement amplitudes
    double wx, wy;        // rad/h
    double px, py;        // phases

    void displacement(double t_h, double& dx, double& dy) const {
        dx = vx * t_h + ax * std::sin(wx * t_h + px);
        dy = vy * t_h + ay * std::sin(wy * t_h + py);
    }
};

struct ChannelRecipe {
    double blur_km;
    int lag_slots;
    double sign;
    double gain;
    double offset;
};

// Fixed transforms for the 11 proxy channels: a mix of bright-where-rain,
// inverted (cold-top style) and lagged views at several blur widths.
constexpr ChannelRecipe kChannels[11] = {
    {18.0, 0, +1.0, 0.80, 0.10}, {30.0, 0, +1.0, 0.60, 0.15}, {24.0, 0, +1.0, 0.70, 0.12},
    {20.0, 0, -1.0, 0.70, 0.75}, {36.0, 0, -1.0, 0.60, 0.70}, {16.0, 1, -1.0, 0.75, 0.80},
    {48.0, 1, +1.0, 0.50, 0.30}, {60.0, 2, +1.0, 0.45, 0.35}, {28.0, 2, -1.0, 0.55, 0.65},
    {22.0, 3, +1.0, 0.65, 0.10}, {80.0, 0, +1.0, 0.40, 0.20},
};

struct Background {
    double kx, ky, omega, phase, amp;
    double value(double x_km, double y_km, double t_h) const {
        return amp * std::sin(kx * x_km + ky * y_km + omega * t_h + phase);
    }
};

double cell_envelope(const Cell& c, double t_h) {
    double tau = t_h - c.birth_h;
    if (tau <= 0.0 || tau >= c.life_h) return 0.0;
    double s = std::sin(M_PI * tau / c.life_h);
    return s * s;
}

void cell_center(const Cell& c, const Wind& wind, double t_h, double& cx, double& cy) {
    double dx1, dy1, dx0, dy0;
    wind.displacement(t_h, dx1, dy1);
    wind.displacement(c.birth_h, dx0, dy0);
    cx = c.x0 + (dx1 - dx0) + c.vx_off * (t_h - c.birth_h);
    cy = c.y0 + (dy1 - dy0) + c.vy_off * (t_h - c.birth_h);
}

// Adds amp * exp(-d^2 / 2 sigma^2) onto a square grid, separably, skipping
// everything beyond 4 sigma.
void splat_gaussian(float* plane, int n, double origin_km, double px_km, double cx, double cy,
                    double sigma, double amp, std::vector<float>& wx, std::vector<float>& wy) {
    const double reach = 4.0 * sigma;
    int j0 = std::max(0, static_cast<int>(std::floor((cx - reach - origin_km) / px_km)));
    int j1 = std::min(n - 1, static_cast<int>(std::ceil((cx + reach - origin_km) / px_km)));
    int i0 = std::max(0, static_cast<int>(std::floor((cy - reach - origin_km) / px_km)));
    int i1 = std::min(n - 1, static_cast<int>(std::ceil((cy + reach - origin_km) / px_km)));
    if (j0 > j1 || i0 > i1) return;
    const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
    wx.resize(static_cast<std::size_t>(j1 - j0 + 1));
    wy.resize(static_cast<std::size_t>(i1 - i0 + 1));
    for (int j = j0; j <= j1; ++j) {
        double d = origin_km + (j + 0.5) * px_km - cx;
        wx[static_cast<std::size_t>(j - j0)] = static_cast<float>(std::exp(-d * d * inv2s2));
    }
    for (int i = i0; i <= i1; ++i) {
        double d = origin_km + (i + 0.5) * px_km - cy;
        wy[static_cast<std::size_t>(i - i0)] = static_cast<float>(std::exp(-d * d * inv2s2));
    }
    for (int i = i0; i <= i1; ++i) {
        float* row = plane + static_cast<std::size_t>(i) * n;
        const float a = static_cast<float>(amp) * wy[static_cast<std::size_t>(i - i0)];
        for (int j = j0; j <= j1; ++j) row[j] += a * wx[static_cast<std::size_t>(j - j0)];
    }
}

}  // namespace

RegionArchive generate_synthetic_region(std::uint64_t seed, int n_slots, const SyntheticConfig& cfg) {
    cfg.geom.validate();
    if (n_slots < cfg.geom.window())
        throw DataError("synthetic: n_slots " + std::to_string(n_slots) + " < one window (" +
                        std::to_string(cfg.geom.window()) + " slots)");

    const int p = cfg.geom.patch;
    const double slot_h = cfg.geom.slot_minutes / 60.0;
    const double world_km = p * cfg.sat_px_km;
    const double radar_km = p * cfg.radar_px_km;
    const double radar_origin = 0.5 * (world_km - radar_km);  // radar footprint is centered

    Rng rng(seed);

    Wind wind;
    {
        double speed = rng.uniform(cfg.speed_min_kmh, cfg.speed_max_kmh);
        double dir = rng.uniform(0.0, 2.0 * M_PI);
        wind.vx = speed * std::cos(dir);
        wind.vy = speed * std::sin(dir);
        wind.ax = rng.uniform(5.0, 30.0);
        wind.ay = rng.uniform(5.0, 30.0);
        wind.wx = rng.uniform(0.15, 0.5);
        wind.wy = rng.uniform(0.15, 0.5);
        wind.px = rng.uniform(0.0, 2.0 * M_PI);
        wind.py = rng.uniform(0.0, 2.0 * M_PI);
    }

    const double span_h = n_slots * slot_h;
    const double life_mean = 0.5 * (cfg.lifetime_min_h + cfg.lifetime_max_h);
    const int n_cells = static_cast<int>(
        std::llround(cfg.mean_active_cells * (span_h + cfg.lifetime_max_h) / life_mean));
    std::vector<Cell> cells(static_cast<std::size_t>(n_cells));
    const double center_box = radar_km * 1.6;
    for (auto& c : cells) {
        bool near_center = rng.uniform() < cfg.center_bias;
        if (near_center) {
            c.x0 = 0.5 * world_km + rng.uniform(-0.5, 0.5) * center_box;
            c.y0 = 0.5 * world_km + rng.uniform(-0.5, 0.5) * center_box;
        } else {
            c.x0 = rng.uniform(-0.1, 1.1) * world_km;
            c.y0 = rng.uniform(-0.1, 1.1) * world_km;
        }
        c.vx_off = rng.uniform(-3.0, 3.0);
        c.vy_off = rng.uniform(-3.0, 3.0);
        c.sigma = rng.uniform(cfg.sigma_min_km, cfg.sigma_max_km);
        c.peak = rng.log_uniform(cfg.peak_min, cfg.peak_max);
        c.birth_h = rng.uniform(-cfg.lifetime_max_h, span_h);
        c.life_h = rng.uniform(cfg.lifetime_min_h, cfg.lifetime_max_h);
    }

    Background bg[11];
    for (auto& b : bg) {
        double wavelength = rng.uniform(600.0, 2000.0) * (world_km / 3024.0);
        double angle = rng.uniform(0.0, 2.0 * M_PI);
        b.kx = 2.0 * M_PI / wavelength * std::cos(angle);
        b.ky = 2.0 * M_PI / wavelength * std::sin(angle);
        b.omega = rng.uniform(-0.3, 0.3);
        b.phase = rng.uniform(0.0, 2.0 * M_PI);
        b.amp = rng.uniform(0.03, 0.08);
    }

    // Per-slot missing-data disks, drawn order-independently.
    struct Gap {
        bool present;
        double cx, cy, r;
    };
    std::vector<Gap> gaps(static_cast<std::size_t>(n_slots), Gap{false, 0, 0, 0});
    for (int t = 0; t < n_slots; ++t) {
        Rng slot_rng(splitmix64(seed ^ 0x9d2c5680cafef00dULL) + static_cast<std::uint64_t>(t));
        if (slot_rng.uniform() < cfg.missing_slot_prob) {
            gaps[static_cast<std::size_t>(t)] = {true,
                                                 radar_origin + slot_rng.uniform() * radar_km,
                                                 radar_origin + slot_rng.uniform() * radar_km,
                                                 slot_rng.uniform(0.05, 0.25) * radar_km};
        }
    }

    RegionArchive arc;
    arc.region_id = "syn-" + std::to_string(seed);
    arc.slot_minutes = cfg.geom.slot_minutes;
    arc.satellite = Tensor({n_slots, cfg.geom.sat_channels, p, p});
    arc.radar = Tensor({n_slots, p, p});
    arc.radar_valid = Mask({n_slots, p, p});
    arc.static_fields = Tensor({cfg.geom.static_channels, p, p});

    const std::size_t plane = static_cast<std::size_t>(p) * p;

#pragma omp parallel
    {
        std::vector<float> wx, wy;
        std::vector<float> field(plane);

#pragma omp for schedule(dynamic)
        for (int t = 0; t < n_slots; ++t) {
            const double t_h = t * slot_h;

            // radar: fine grid over the central footprint
            float* radar_plane = arc.radar.data() + static_cast<std::size_t>(t) * plane;
            for (const auto& c : cells) {
                double env = cell_envelope(c, t_h);
                if (env <= 0.0) continue;
                double cx, cy;
                cell_center(c, wind, t_h, cx, cy);
                splat_gaussian(radar_plane, p, radar_origin, cfg.radar_px_km, cx, cy, c.sigma,
                               c.peak * env, wx, wy);
            }
            for (std::size_t i = 0; i < plane; ++i) {
                float v = radar_plane[i];
                radar_plane[i] = v < cfg.rain_floor ? 0.0f : std::min(v, static_cast<float>(cfg.rain_cap));
            }

            std::uint8_t* valid = arc.radar_valid.data() + static_cast<std::size_t>(t) * plane;
            std::fill(valid, valid + plane, std::uint8_t(1));
            if (gaps[static_cast<std::size_t>(t)].present) {
                const Gap& g = gaps[static_cast<std::size_t>(t)];
                for (int i = 0; i < p; ++i)
                    for (int j = 0; j < p; ++j) {
                        double y = radar_origin + (i + 0.5) * cfg.radar_px_km;
                        double x = radar_origin + (j + 0.5) * cfg.radar_px_km;
                        if ((x - g.cx) * (x - g.cx) + (y - g.cy) * (y - g.cy) < g.r * g.r)
                            valid[static_cast<std::size_t>(i) * p + j] = 0;
                    }
            }

            // satellite: coarse proxies of the same field
            for (int ch = 0; ch < cfg.geom.sat_channels; ++ch) {
                const ChannelRecipe& rc = kChannels[ch % 11];
                const double tc_h = t_h - rc.lag_slots * slot_h;
                std::fill(field.begin(), field.end(), 0.0f);
                for (const auto& c : cells) {
                    double env = cell_envelope(c, tc_h);
                    if (env <= 0.0) continue;
                    double cx, cy;
                    cell_center(c, wind, tc_h, cx, cy);
                    double s2 = c.sigma * c.sigma + rc.blur_km * rc.blur_km;
                    double amp = c.peak * env * (c.sigma * c.sigma) / s2;
                    splat_gaussian(field.data(), p, 0.0, cfg.sat_px_km, cx, cy, std::sqrt(s2), amp,
                                   wx, wy);
                }
                float* sat = arc.satellite.data() +
                             (static_cast<std::size_t>(t) * cfg.geom.sat_channels + ch) * plane;
                for (int i = 0; i < p; ++i) {
                    double y = (i + 0.5) * cfg.sat_px_km;
                    for (int j = 0; j < p; ++j) {
                        double x = (j + 0.5) * cfg.sat_px_km;
                        double b = -std::expm1(-double(field[static_cast<std::size_t>(i) * p + j]));
                        sat[static_cast<std::size_t>(i) * p + j] = static_cast<float>(
                            rc.offset + rc.sign * rc.gain * b + bg[ch % 11].value(x, y, t_h));
                    }
                }
            }
        }
    }

    // Static fields: latitude, longitude (linearized local grid), elevation bumps.
    {
        double lat0 = rng.uniform(43.0, 55.0);
        double lon0 = rng.uniform(0.0, 20.0);
        double deg_per_km_lat = 1.0 / 111.0;
        double deg_per_km_lon = 1.0 / (111.0 * std::cos(lat0 * M_PI / 180.0));
        struct Bump {
            double cx, cy, sigma, amp;
        };
        std::vector<Bump> bumps(6);
        for (auto& b : bumps) {
            b.cx = rng.uniform(0.0, world_km);
            b.cy = rng.uniform(0.0, world_km);
            b.sigma = rng.uniform(100.0, 400.0) * (world_km / 3024.0);
            b.amp = rng.uniform(100.0, 1500.0);
        }
        for (int i = 0; i < p; ++i) {
            double y_km = (i + 0.5) * cfg.sat_px_km;
            for (int j = 0; j < p; ++j) {
                double x_km = (j + 0.5) * cfg.sat_px_km;
                arc.static_fields.at(0, i, j) =
                    static_cast<float>(lat0 + (world_km - y_km) * deg_per_km_lat);  // row 0 = north
                arc.static_fields.at(1, i, j) = static_cast<float>(lon0 + x_km * deg_per_km_lon);
                double elev = 50.0;
                for (const auto& b : bumps) {
                    double d2 = (x_km - b.cx) * (x_km - b.cx) + (y_km - b.cy) * (y_km - b.cy);
                    elev += b.amp * std::exp(-d2 / (2.0 * b.sigma * b.sigma));
                }
                arc.static_fields.at(2, i, j) = static_cast<float>(elev);
            }
        }
    }

    arc.validate();
    return arc;
}

}  // namespace nowcast
