#include "anerf/dataset.hpp"

#include <fstream>
#include <iostream>

#include <json.hpp>

#include "anerf/errors.hpp"

namespace anerf {

using nlohmann::json;

std::vector<DatasetView> load_blender_split(const std::filesystem::path& json_path,
                                            float t_near, float t_far) {
    std::ifstream is(json_path);
    if (!is) throw ParseError("cannot open " + json_path.string());
    json root;
    try {
        root = json::parse(is);
    } catch (const json::parse_error& e) {
        throw ParseError(json_path.string() + ": " + e.what());
    }

    if (!root.contains("camera_angle_x"))
        throw ParseError(json_path.string() + ": missing field 'camera_angle_x'");
    if (!root.contains("frames"))
        throw ParseError(json_path.string() + ": missing field 'frames'");
    float angle_x = root["camera_angle_x"].get<float>();
    const json& frames = root["frames"];
    if (!frames.is_array() || frames.empty())
        throw ParseError(json_path.string() + ": 'frames' must be a non-empty array");

    std::vector<DatasetView> views;
    views.reserve(frames.size());
    for (size_t i = 0; i < frames.size(); ++i) {
        const json& fr = frames[i];
        if (!fr.contains("file_path"))
            throw ParseError(json_path.string() + ": frame " + std::to_string(i) +
                             " missing field 'file_path'");
        if (!fr.contains("transform_matrix"))
            throw ParseError(json_path.string() + ": frame " + std::to_string(i) +
                             " missing field 'transform_matrix'");

        DatasetView view;
        std::string rel = fr["file_path"].get<std::string>();
        view.name = std::filesystem::path(rel).filename().string();

        const json& tm = fr["transform_matrix"];
        if (!tm.is_array() || tm.size() != 4)
            throw ParseError(json_path.string() + ": frame " + std::to_string(i) +
                             " transform_matrix must be 4x4");
        for (int r = 0; r < 4; ++r) {
            if (!tm[r].is_array() || tm[r].size() != 4)
                throw ParseError(json_path.string() + ": frame " + std::to_string(i) +
                                 " transform_matrix must be 4x4");
            for (int c = 0; c < 4; ++c)
                view.camera.cam_to_world.m[r][c] = tm[r][c].get<float>();
        }
        float ortho_err = view.camera.cam_to_world.rotation_orthonormality_error();
        if (ortho_err > 1e-4f) {
            std::cerr << json_path.string() << ": frame " << i
                      << " rotation off by " << ortho_err << ", re-orthonormalizing\n";
            view.camera.cam_to_world.reorthonormalize();
        }

        std::filesystem::path img_path = json_path.parent_path() / rel;
        if (!img_path.has_extension()) img_path += ".png";
        view.image = to_float(read_png(img_path));
        view.camera.width = view.image.width;
        view.camera.height = view.image.height;
        view.camera.focal = Camera::focal_from_angle_x(view.camera.width, angle_x);
        view.camera.t_near = t_near;
        view.camera.t_far = t_far;
        views.push_back(std::move(view));
    }
    return views;
}

Dataset load_blender_dataset(const std::filesystem::path& dir, float t_near, float t_far) {
    Dataset ds;
    ds.t_near = t_near;
    ds.t_far = t_far;
    auto train_json = dir / "transforms_train.json";
    if (std::filesystem::exists(train_json)) {
        ds.train = load_blender_split(train_json, t_near, t_far);
    } else if (std::filesystem::exists(dir / "transforms.json")) {
        ds.train = load_blender_split(dir / "transforms.json", t_near, t_far);
    } else {
        throw ParseError("no transforms_train.json or transforms.json under " + dir.string());
    }
    if (std::filesystem::exists(dir / "transforms_val.json"))
        ds.val = load_blender_split(dir / "transforms_val.json", t_near, t_far);
    if (std::filesystem::exists(dir / "transforms_test.json"))
        ds.test = load_blender_split(dir / "transforms_test.json", t_near, t_far);

    auto scene_file = dir / "scene.txt";
    if (std::filesystem::exists(scene_file)) {
        AnalyticScene scene = load_scene(scene_file);
        ds.unbounded = scene.unbounded;
    }
    return ds;
}

void save_blender_split(const std::filesystem::path& dir, const std::string& split,
                        const std::vector<DatasetView>& views) {
    if (views.empty()) return;
    std::filesystem::create_directories(dir / split);

    json root;
    root["camera_angle_x"] = views.front().camera.camera_angle_x();
    root["frames"] = json::array();
    for (size_t i = 0; i < views.size(); ++i) {
        const DatasetView& v = views[i];
        std::string rel = "./" + split + "/r_" + std::to_string(i);
        write_png(dir / split / ("r_" + std::to_string(i) + ".png"), to_8bit(v.image));

        json fr;
        fr["file_path"] = rel;
        json tm = json::array();
        for (int r = 0; r < 4; ++r) {
            json row = json::array();
            for (int c = 0; c < 4; ++c) row.push_back(v.camera.cam_to_world.m[r][c]);
            tm.push_back(row);
        }
        fr["transform_matrix"] = tm;
        root["frames"].push_back(fr);
    }
    std::ofstream os(dir / ("transforms_" + split + ".json"));
    if (!os) throw RuntimeFailure("cannot write transforms_" + split + ".json");
    os << root.dump(2) << "\n";
}

}  // namespace anerf
