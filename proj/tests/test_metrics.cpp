#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "anerf/errors.hpp"
#include "anerf/metrics.hpp"
#include "anerf/rng.hpp"

using namespace anerf;

TEST_CASE("psnr: identical images hit the cap") {
    ImageF a = ImageF::make(16, 16, 0.3f);
    CHECK(psnr(a, a) == 99.0);
}

TEST_CASE("psnr: mse 0.01 is 20 dB") {
    ImageF a = ImageF::make(16, 16, 0.5f);
    ImageF b = ImageF::make(16, 16, 0.6f);
    CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-4));
}

TEST_CASE("psnr: zeros vs ones is 0 dB") {
    ImageF a = ImageF::make(8, 8, 0.f);
    ImageF b = ImageF::make(8, 8, 1.f);
    CHECK(psnr(a, b) == doctest::Approx(0.0));
}

TEST_CASE("psnr rejects mismatched dims") {
    ImageF a = ImageF::make(8, 8);
    ImageF b = ImageF::make(8, 9);
    CHECK_THROWS_AS(psnr(a, b), ConfigError);
}

TEST_CASE("psnr decreases strictly as noise grows") {
    ImageF base = ImageF::make(24, 24, 0.5f);
    Rng rng(9);
    std::vector<float> noise(base.rgb.size());
    for (float& v : noise) v = rng.next_float() - 0.5f;
    double prev = 1e9;
    for (float scale : {0.01f, 0.03f, 0.1f, 0.3f}) {
        ImageF noisy = base;
        for (size_t i = 0; i < noise.size(); ++i) noisy.rgb[i] += scale * noise[i];
        double p = psnr(base, noisy);
        CHECK(p < prev);
        prev = p;
    }
}

TEST_CASE("ssim: identical images score 1") {
    ImageF a = ImageF::make(16, 16, 0.42f);
    CHECK(ssim(a, a) == doctest::Approx(1.0));
}

TEST_CASE("ssim: constant 0 vs constant 1 matches the closed form") {
    ImageF a = ImageF::make(16, 16, 0.f);
    ImageF b = ImageF::make(16, 16, 1.f);
    double c1 = 0.01 * 0.01;
    CHECK(ssim(a, b) == doctest::Approx(c1 / (1.0 + c1)).epsilon(1e-6));
}

TEST_CASE("ssim is symmetric") {
    Rng rng(10);
    ImageF a = ImageF::make(16, 16);
    ImageF b = ImageF::make(16, 16);
    for (size_t i = 0; i < a.rgb.size(); ++i) {
        a.rgb[i] = rng.next_float();
        b.rgb[i] = rng.next_float();
    }
    CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)));
}

TEST_CASE("ssim rejects images smaller than the window") {
    ImageF a = ImageF::make(8, 8);
    CHECK_THROWS_AS(ssim(a, a), ConfigError);
}

TEST_CASE("speedup is measured against the pipeline's own time") {
    // 48.98s baseline vs 33.11s pipeline comes out near 47%
    double s = speedup_percent(48.98, 33.11);
    CHECK(s == doctest::Approx(47.9).epsilon(0.01));
    CHECK(std::lround(s / 10) == 5);  // rounds to the printed 47-48% range
    CHECK(speedup_percent(10.0, 10.0) == doctest::Approx(0.0));
}

TEST_CASE("pipeline labels are stable identifiers") {
    PipelineSpec base{PipelineSpec::Kind::Baseline};
    CHECK(base.label() == "baseline");
    PipelineSpec act{PipelineSpec::Kind::Activation, 2, Estimator::F2};
    CHECK(act.label() == "act(l=2,f2)");
    PipelineSpec mask{PipelineSpec::Kind::MaskSkip, 3};
    CHECK(mask.label() == "mask-skip(l=3)");
    CHECK(standard_matrix(3).size() == 10);  // baseline + 3x3
}
