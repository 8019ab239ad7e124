#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "anerf/geometry.hpp"
#include "anerf/image.hpp"

namespace anerf {

// Pinhole camera, right-handed, looking down -z (Blender/NeRF convention);
// image y runs downward.
struct Camera {
    int width = 0;
    int height = 0;
    float focal = 0.f;  // pixels
    Mat4 cam_to_world = Mat4::identity();
    float t_near = 2.f;
    float t_far = 6.f;

    float camera_angle_x() const { return 2.f * std::atan(0.5f * width / focal); }
    static float focal_from_angle_x(int width, float angle_x) {
        return 0.5f * static_cast<float>(width) / std::tan(0.5f * angle_x);
    }

    // Ray through the center of pixel (x, y).
    Ray ray_for_pixel(int x, int y) const;
};

// Camera on a circle of the given radius, looking at the origin.
Camera orbit_camera(int width, int height, float angle_x, float radius_deg_azimuth,
                    float elevation_deg, float radius, float t_near, float t_far);

struct Primitive {
    enum class Kind { Sphere, Box, Slab };
    Kind kind = Kind::Sphere;
    // Sphere: center + radius. Box: min/max corners. Slab: axis + [lo, hi].
    Vec3 a;      // center / min corner / unused
    Vec3 b;      // (radius,0,0) / max corner / (lo, hi, 0)
    int axis = 2;
    float sigma = 1.f;
    Vec3 albedo{0.5f, 0.5f, 0.5f};

    // Entry/exit of the ray through this primitive; false when missed.
    bool intersect(const Ray& ray, float& t0, float& t1) const;
};

struct AnalyticScene {
    std::vector<Primitive> primitives;
    Vec3 background{1.f, 1.f, 1.f};
    float t_near = 2.f;
    float t_far = 6.f;
    bool unbounded = false;
};

// Density/albedo of the superimposed constant-density primitives at p.
void scene_field(const AnalyticScene& scene, const Vec3& p, float& sigma, Vec3& albedo);

// Exact emission-absorption rendering: rays are split at primitive
// boundaries and each constant-density segment is integrated in closed
// form. supersample n averages an n x n subpixel grid.
ImageF analytic_render(const AnalyticScene& scene, const Camera& cam, int supersample = 1);

Vec3 analytic_render_ray(const AnalyticScene& scene, const Ray& ray);

// Text scene description, one primitive per line. Round-trips exactly
// enough to regenerate identical renders.
AnalyticScene load_scene(const std::filesystem::path& path);
void save_scene(const std::filesystem::path& path, const AnalyticScene& scene);

// The default procedural scene: three colored spheres of differing density
// inside the unit box on a white background.
AnalyticScene tri_sphere_scene();

}  // namespace anerf
