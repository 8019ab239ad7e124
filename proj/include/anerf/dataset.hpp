#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "anerf/image.hpp"
#include "anerf/scene.hpp"

namespace anerf {

struct DatasetView {
    Camera camera;
    ImageF image;
    std::string name;  // file_path stem from transforms.json
};

struct Dataset {
    std::vector<DatasetView> train;
    std::vector<DatasetView> val;
    std::vector<DatasetView> test;
    float t_near = 2.f;
    float t_far = 6.f;
    bool unbounded = false;
};

// One split from a Blender-style transforms.json: camera_angle_x plus
// frames of {file_path, transform_matrix}. Image paths are resolved
// relative to the json file. Missing fields raise ParseError naming the
// field; slightly non-orthonormal rotations are re-orthonormalized with a
// warning on stderr.
std::vector<DatasetView> load_blender_split(const std::filesystem::path& json_path,
                                            float t_near, float t_far);

// Scene directory holding transforms_train.json (+ optional _val/_test).
Dataset load_blender_dataset(const std::filesystem::path& dir, float t_near = 2.f,
                             float t_far = 6.f);

// Write one split (transforms json + 8-bit PNGs) under dir; images land in
// dir/<split>/ and file_path entries use the community "./<split>/r_i"
// convention.
void save_blender_split(const std::filesystem::path& dir, const std::string& split,
                        const std::vector<DatasetView>& views);

}  // namespace anerf
