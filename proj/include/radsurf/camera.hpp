#pragma once

// Pinhole camera, OpenCV convention: x right, y down, z forward. Rays go
// through pixel centers.

#include <string>

#include "radsurf/core.hpp"

namespace radsurf {

struct Ray {
    Vec3 origin;
    Vec3 dir;        // unit length
    double t_min = 1e-4;
};

struct Camera {
    double fx = 0, fy = 0, cx = 0, cy = 0;
    int width = 0, height = 0;
    Mat3 rot;      // world_from_cam rotation
    Vec3 pos;      // camera center in world space
    std::string ref_image;  // optional reference image path (PFM), may be empty

    Ray primary_ray(int px, int py) const {
        Vec3 dir_cam = {(px + 0.5 - cx) / fx, (py + 0.5 - cy) / fy, 1.0};
        return Ray{pos, normalize(rot * dir_cam)};
    }

    Vec3 forward() const { return rot.col(2); }

    void validate() const {
        if (width <= 0 || height <= 0)
            throw std::invalid_argument("camera image size must be positive");
        if (!(fx > 0) || !(fy > 0))
            throw std::invalid_argument("camera focal lengths must be positive");
        if (!is_orthonormal(rot))
            throw std::invalid_argument("camera rotation is not orthonormal");
        if (!is_finite(pos))
            throw std::invalid_argument("camera position is not finite");
    }

    // Positions the camera at eye looking toward target; vfov_deg is the full
    // vertical field of view.
    static Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double vfov_deg,
                          int width, int height) {
        Camera cam;
        cam.width = width;
        cam.height = height;
        Vec3 fwd = normalize(target - eye);
        Vec3 right = normalize(cross(fwd, up));
        Vec3 down = cross(fwd, right);
        cam.rot = Mat3::from_cols(right, down, fwd);
        cam.pos = eye;
        cam.fy = 0.5 * height / std::tan(0.5 * vfov_deg * kPi / 180.0);
        cam.fx = cam.fy;
        cam.cx = 0.5 * width;
        cam.cy = 0.5 * height;
        return cam;
    }
};

}  // namespace radsurf
