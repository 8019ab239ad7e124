#include "anerf/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "anerf/errors.hpp"

namespace anerf {

Ray Camera::ray_for_pixel(int x, int y) const {
    Vec3 dir_cam{(static_cast<float>(x) + 0.5f - 0.5f * static_cast<float>(width)) / focal,
                 -(static_cast<float>(y) + 0.5f - 0.5f * static_cast<float>(height)) / focal,
                 -1.f};
    Ray ray;
    ray.origin = cam_to_world.translation();
    ray.dir = cam_to_world.rotate(dir_cam).normalized();
    ray.t_near = t_near;
    ray.t_far = t_far;
    return ray;
}

Camera orbit_camera(int width, int height, float angle_x, float azimuth_deg,
                    float elevation_deg, float radius, float t_near, float t_far) {
    float az = azimuth_deg * static_cast<float>(M_PI) / 180.f;
    float el = elevation_deg * static_cast<float>(M_PI) / 180.f;
    Vec3 pos{radius * std::cos(el) * std::cos(az), radius * std::cos(el) * std::sin(az),
             radius * std::sin(el)};

    Vec3 back = pos.normalized();  // camera looks at the origin along -back
    Vec3 world_up{0.f, 0.f, 1.f};
    Vec3 right{world_up.y * back.z - world_up.z * back.y,
               world_up.z * back.x - world_up.x * back.z,
               world_up.x * back.y - world_up.y * back.x};
    right = right.normalized();
    Vec3 up{back.y * right.z - back.z * right.y, back.z * right.x - back.x * right.z,
            back.x * right.y - back.y * right.x};

    Camera cam;
    cam.width = width;
    cam.height = height;
    cam.focal = Camera::focal_from_angle_x(width, angle_x);
    cam.t_near = t_near;
    cam.t_far = t_far;
    Mat4& m = cam.cam_to_world;
    m = Mat4::identity();
    m.m[0][0] = right.x; m.m[1][0] = right.y; m.m[2][0] = right.z;
    m.m[0][1] = up.x;    m.m[1][1] = up.y;    m.m[2][1] = up.z;
    m.m[0][2] = back.x;  m.m[1][2] = back.y;  m.m[2][2] = back.z;
    m.m[0][3] = pos.x;   m.m[1][3] = pos.y;   m.m[2][3] = pos.z;
    return cam;
}

bool Primitive::intersect(const Ray& ray, float& t0, float& t1) const {
    switch (kind) {
        case Kind::Sphere: {
            Vec3 oc = ray.origin - a;
            float r = b.x;
            float bb = oc.dot(ray.dir);
            float c = oc.dot(oc) - r * r;
            float disc = bb * bb - c;
            if (disc <= 0.f) return false;
            float s = std::sqrt(disc);
            t0 = -bb - s;
            t1 = -bb + s;
            return true;
        }
        case Kind::Box: {
            t0 = -std::numeric_limits<float>::infinity();
            t1 = std::numeric_limits<float>::infinity();
            for (int ax = 0; ax < 3; ++ax) {
                float o = ray.origin[ax], d = ray.dir[ax];
                float lo = a[ax], hi = b[ax];
                if (std::fabs(d) < 1e-12f) {
                    if (o < lo || o > hi) return false;
                    continue;
                }
                float ta = (lo - o) / d, tb = (hi - o) / d;
                if (ta > tb) std::swap(ta, tb);
                t0 = std::max(t0, ta);
                t1 = std::min(t1, tb);
            }
            return t0 < t1;
        }
        case Kind::Slab: {
            float o = ray.origin[axis], d = ray.dir[axis];
            float lo = b.x, hi = b.y;
            if (std::fabs(d) < 1e-12f) {
                if (o < lo || o > hi) return false;
                t0 = -std::numeric_limits<float>::infinity();
                t1 = std::numeric_limits<float>::infinity();
                return true;
            }
            t0 = (lo - o) / d;
            t1 = (hi - o) / d;
            if (t0 > t1) std::swap(t0, t1);
            return true;
        }
    }
    return false;
}

void scene_field(const AnalyticScene& scene, const Vec3& p, float& sigma, Vec3& albedo) {
    sigma = 0.f;
    Vec3 emission{0.f, 0.f, 0.f};
    for (const Primitive& prim : scene.primitives) {
        bool inside = false;
        switch (prim.kind) {
            case Primitive::Kind::Sphere:
                inside = (p - prim.a).dot(p - prim.a) <= prim.b.x * prim.b.x;
                break;
            case Primitive::Kind::Box:
                inside = p.x >= prim.a.x && p.x <= prim.b.x && p.y >= prim.a.y &&
                         p.y <= prim.b.y && p.z >= prim.a.z && p.z <= prim.b.z;
                break;
            case Primitive::Kind::Slab:
                inside = p[prim.axis] >= prim.b.x && p[prim.axis] <= prim.b.y;
                break;
        }
        if (inside) {
            sigma += prim.sigma;
            emission += prim.sigma * prim.albedo;
        }
    }
    albedo = sigma > 0.f ? emission / sigma : Vec3{0.f, 0.f, 0.f};
}

Vec3 analytic_render_ray(const AnalyticScene& scene, const Ray& ray) {
    // Split [t_near, t_far] at every primitive boundary; density is constant
    // inside each segment, so transmittance integrates in closed form.
    std::vector<float> cuts{ray.t_near, ray.t_far};
    for (const Primitive& prim : scene.primitives) {
        float t0, t1;
        if (!prim.intersect(ray, t0, t1)) continue;
        if (t0 > ray.t_near && t0 < ray.t_far) cuts.push_back(t0);
        if (t1 > ray.t_near && t1 < ray.t_far) cuts.push_back(t1);
    }
    std::sort(cuts.begin(), cuts.end());

    Vec3 rgb{0.f, 0.f, 0.f};
    double transmittance = 1.0;
    for (size_t i = 0; i + 1 < cuts.size(); ++i) {
        float len = cuts[i + 1] - cuts[i];
        if (len <= 0.f) continue;
        Vec3 mid = ray.at(0.5f * (cuts[i] + cuts[i + 1]));
        float sigma;
        Vec3 albedo;
        scene_field(scene, mid, sigma, albedo);
        if (sigma <= 0.f) continue;
        double alpha = 1.0 - std::exp(-static_cast<double>(sigma) * len);
        rgb += static_cast<float>(transmittance * alpha) * albedo;
        transmittance *= 1.0 - alpha;
    }
    rgb += static_cast<float>(transmittance) * scene.background;
    return rgb;
}

ImageF analytic_render(const AnalyticScene& scene, const Camera& cam, int supersample) {
    ImageF img = ImageF::make(cam.width, cam.height);
    int n = std::max(1, supersample);
    for (int y = 0; y < cam.height; ++y) {
        for (int x = 0; x < cam.width; ++x) {
            Vec3 acc{0.f, 0.f, 0.f};
            for (int sy = 0; sy < n; ++sy) {
                for (int sx = 0; sx < n; ++sx) {
                    // subpixel grid around the pixel center
                    Vec3 dir_cam{
                        (static_cast<float>(x) + (sx + 0.5f) / n - 0.5f * cam.width) / cam.focal,
                        -(static_cast<float>(y) + (sy + 0.5f) / n - 0.5f * cam.height) / cam.focal,
                        -1.f};
                    Ray ray;
                    ray.origin = cam.cam_to_world.translation();
                    ray.dir = cam.cam_to_world.rotate(dir_cam).normalized();
                    ray.t_near = cam.t_near;
                    ray.t_far = cam.t_far;
                    acc += analytic_render_ray(scene, ray);
                }
            }
            float* px = img.pixel(x, y);
            px[0] = std::clamp(acc.x / (n * n), 0.f, 1.f);
            px[1] = std::clamp(acc.y / (n * n), 0.f, 1.f);
            px[2] = std::clamp(acc.z / (n * n), 0.f, 1.f);
        }
    }
    return img;
}

namespace {

int axis_from_token(const std::string& tok, int line_no, const std::filesystem::path& path) {
    if (tok == "x") return 0;
    if (tok == "y") return 1;
    if (tok == "z") return 2;
    throw ParseError(path.string() + ":" + std::to_string(line_no) + ": bad axis '" + tok + "'");
}

}  // namespace

AnalyticScene load_scene(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ParseError("cannot open scene " + path.string());
    AnalyticScene scene;
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        std::istringstream ss(line);
        std::string tok;
        if (!(ss >> tok) || tok[0] == '#') continue;
        auto fail = [&](const std::string& what) -> ParseError {
            return ParseError(path.string() + ":" + std::to_string(line_no) + ": " + what);
        };
        if (tok == "background") {
            if (!(ss >> scene.background.x >> scene.background.y >> scene.background.z))
                throw fail("background needs r g b");
        } else if (tok == "near") {
            if (!(ss >> scene.t_near)) throw fail("near needs a value");
        } else if (tok == "far") {
            if (!(ss >> scene.t_far)) throw fail("far needs a value");
        } else if (tok == "unbounded") {
            int v;
            if (!(ss >> v)) throw fail("unbounded needs 0/1");
            scene.unbounded = v != 0;
        } else if (tok == "sphere") {
            Primitive p;
            p.kind = Primitive::Kind::Sphere;
            if (!(ss >> p.a.x >> p.a.y >> p.a.z >> p.b.x >> p.sigma >> p.albedo.x >>
                  p.albedo.y >> p.albedo.z))
                throw fail("sphere needs cx cy cz radius sigma r g b");
            scene.primitives.push_back(p);
        } else if (tok == "box") {
            Primitive p;
            p.kind = Primitive::Kind::Box;
            if (!(ss >> p.a.x >> p.a.y >> p.a.z >> p.b.x >> p.b.y >> p.b.z >> p.sigma >>
                  p.albedo.x >> p.albedo.y >> p.albedo.z))
                throw fail("box needs min xyz, max xyz, sigma, rgb");
            scene.primitives.push_back(p);
        } else if (tok == "slab") {
            Primitive p;
            p.kind = Primitive::Kind::Slab;
            std::string ax;
            if (!(ss >> ax)) throw fail("slab needs an axis");
            p.axis = axis_from_token(ax, line_no, path);
            if (!(ss >> p.b.x >> p.b.y >> p.sigma >> p.albedo.x >> p.albedo.y >> p.albedo.z))
                throw fail("slab needs lo hi sigma r g b");
            scene.primitives.push_back(p);
        } else {
            throw fail("unknown directive '" + tok + "'");
        }
    }
    if (scene.t_near >= scene.t_far) throw ParseError(path.string() + ": near must be < far");
    return scene;
}

void save_scene(const std::filesystem::path& path, const AnalyticScene& scene) {
    std::ofstream os(path);
    if (!os) throw RuntimeFailure("cannot open " + path.string() + " for writing");
    os << "# anerf scene\n";
    char buf[256];
    std::snprintf(buf, sizeof buf, "background %.9g %.9g %.9g\n", scene.background.x,
                  scene.background.y, scene.background.z);
    os << buf;
    std::snprintf(buf, sizeof buf, "near %.9g\nfar %.9g\nunbounded %d\n", scene.t_near,
                  scene.t_far, scene.unbounded ? 1 : 0);
    os << buf;
    for (const Primitive& p : scene.primitives) {
        switch (p.kind) {
            case Primitive::Kind::Sphere:
                std::snprintf(buf, sizeof buf, "sphere %.9g %.9g %.9g %.9g %.9g %.9g %.9g %.9g\n",
                              p.a.x, p.a.y, p.a.z, p.b.x, p.sigma, p.albedo.x, p.albedo.y,
                              p.albedo.z);
                break;
            case Primitive::Kind::Box:
                std::snprintf(buf, sizeof buf,
                              "box %.9g %.9g %.9g %.9g %.9g %.9g %.9g %.9g %.9g %.9g\n", p.a.x,
                              p.a.y, p.a.z, p.b.x, p.b.y, p.b.z, p.sigma, p.albedo.x, p.albedo.y,
                              p.albedo.z);
                break;
            case Primitive::Kind::Slab:
                std::snprintf(buf, sizeof buf, "slab %c %.9g %.9g %.9g %.9g %.9g %.9g\n",
                              "xyz"[p.axis], p.b.x, p.b.y, p.sigma, p.albedo.x, p.albedo.y,
                              p.albedo.z);
                break;
        }
        os << buf;
    }
}

AnalyticScene tri_sphere_scene() {
    AnalyticScene scene;
    scene.background = {1.f, 1.f, 1.f};
    scene.t_near = 2.f;
    scene.t_far = 6.f;
    Primitive s1;
    s1.kind = Primitive::Kind::Sphere;
    s1.a = {0.f, 0.45f, 0.05f};
    s1.b = {0.42f, 0.f, 0.f};
    s1.sigma = 8.f;
    s1.albedo = {0.85f, 0.15f, 0.15f};
    Primitive s2;
    s2.kind = Primitive::Kind::Sphere;
    s2.a = {-0.42f, -0.3f, 0.12f};
    s2.b = {0.38f, 0.f, 0.f};
    s2.sigma = 4.f;
    s2.albedo = {0.15f, 0.75f, 0.2f};
    Primitive s3;
    s3.kind = Primitive::Kind::Sphere;
    s3.a = {0.42f, -0.28f, -0.1f};
    s3.b = {0.34f, 0.f, 0.f};
    s3.sigma = 12.f;
    s3.albedo = {0.2f, 0.3f, 0.9f};
    scene.primitives = {s1, s2, s3};
    return scene;
}

}  // namespace anerf
