#pragma once

#include <stdexcept>

#include "splatmap/geometry.hpp"

namespace splatmap {

/// Pinhole camera. Pixel (x, y) looks along ((x+0.5-cx)/fx, (y+0.5-cy)/fy, 1)
/// in camera coordinates; depth values are camera-space Z.
struct CameraModel {
    int width = 0;
    int height = 0;
    double vfov_deg = 0.0;
    double hfov_deg = 0.0;
    double fx = 0.0, fy = 0.0, cx = 0.0, cy = 0.0;

    static CameraModel from_fov(int width, int height, double vfov_deg, double hfov_deg) {
        if (width <= 0 || height <= 0) throw std::invalid_argument("camera: resolution must be positive");
        if (vfov_deg <= 0 || vfov_deg >= 180 || hfov_deg <= 0 || hfov_deg >= 180)
            throw std::invalid_argument("camera: FOV must be in (0, 180) degrees");
        CameraModel c;
        c.width = width;
        c.height = height;
        c.vfov_deg = vfov_deg;
        c.hfov_deg = hfov_deg;
        c.fy = (height / 2.0) / std::tan(deg_to_rad(vfov_deg) / 2.0);
        c.fx = (width / 2.0) / std::tan(deg_to_rad(hfov_deg) / 2.0);
        c.cx = width / 2.0;
        c.cy = height / 2.0;
        return c;
    }

    /// Desk-scale default: 120x160 at 60 deg vertical / 90 deg horizontal FOV.
    static CameraModel desk_default() { return from_fov(160, 120, 60.0, 90.0); }

    /// Same FOV at `scale` times the linear resolution (used for candidate scoring).
    CameraModel scaled(double scale) const {
        int w = std::max(1, static_cast<int>(std::lround(width * scale)));
        int h = std::max(1, static_cast<int>(std::lround(height * scale)));
        return from_fov(w, h, vfov_deg, hfov_deg);
    }

    /// Camera-space ray direction with unit Z, so ray parameter equals depth.
    Vec3 pixel_ray(int x, int y) const {
        return Vec3((x + 0.5 - cx) / fx, (y + 0.5 - cy) / fy, 1.0);
    }

    int pixel_count() const { return width * height; }
};

}  // namespace splatmap
