#include <doctest.h>

#include <array>

#include "voxsr/error.hpp"
#include "voxsr/metrics.hpp"
#include "voxsr/synthdata.hpp"

using namespace voxsr;

namespace {

SynthSpec small_spec(std::uint64_t seed) {
    SynthSpec s;
    s.side = 64;
    s.channel_count = 40;
    s.seed = seed;
    return s;
}

}  // namespace

TEST_CASE("generated volumes are deterministic and hit the pore target") {
    const SynthSpec s = small_spec(3);
    const SegmentedVolume a = generate_hr(s);
    const SegmentedVolume b = generate_hr(s);
    CHECK(a == b);
    const auto f = volume_fraction(a);
    CHECK(f[kPore] >= 0.15);
    CHECK(f[kPore] <= 0.25);
    for (double x : f) CHECK(x > 0);
    CHECK(a.voxel_size() == s.voxel_size_um);

    SynthSpec other = s;
    other.seed = 4;
    CHECK_FALSE(generate_hr(other) == a);
}

TEST_CASE("infeasible targets report the achieved fraction") {
    SynthSpec s = small_spec(1);
    s.channel_count = 400;
    s.channel_radius = 3;
    s.target_pore_fraction = 0.05;
    CHECK_THROWS_WITH_AS(generate_hr(s), doctest::Contains("achieved"), DataError);
}

TEST_CASE("SynthSpec validation and JSON") {
    SynthSpec s;
    s.side = 60;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    nlohmann::json j = SynthSpec{};
    CHECK(j.get<SynthSpec>().side == 128);
    j["grain_count"] = 3;
    CHECK_THROWS_WITH_AS(j.get<SynthSpec>(), doctest::Contains("grain_count"), ConfigError);
}

TEST_CASE("majority-vote coarsening") {
    SUBCASE("constant") {
        const SegmentedVolume hr({16, 16, 16}, 4, 0.5, kClay);
        const SegmentedVolume lr = derive_lr(hr);
        CHECK(lr.dims() == Dims3{2, 2, 2});
        CHECK(lr.voxel_size() == 4.0);
        for (Label l : lr.labels()) CHECK(l == kClay);
    }
    SUBCASE("300 quartz against 212 pore") {
        SegmentedVolume hr({8, 8, 8}, 4, 1.0, kPore);
        int placed = 0;
        for (auto& l : hr.labels())
            if (placed < 300) {
                l = kQuartz;
                ++placed;
            }
        CHECK(derive_lr(hr).at(0, 0, 0) == kQuartz);
    }
    SUBCASE("ties go to the lowest label") {
        SegmentedVolume hr({8, 8, 8}, 4, 1.0, kClay);
        for (std::size_t i = 0; i < 256; ++i) hr.labels()[i] = kFeldspar;
        CHECK(derive_lr(hr).at(0, 0, 0) == kFeldspar);
    }
    SUBCASE("mislabel rate") {
        const SegmentedVolume hr({64, 64, 64}, 4, 1.0, kFeldspar);
        CHECK(volume_fraction(derive_lr(hr, 0.0, 1))[kFeldspar] == 1.0);
        const double q = volume_fraction(derive_lr(hr, 0.5, 1))[kQuartz];
        CHECK(q > 0.5 - 3 * std::sqrt(0.25 / 512));
        CHECK(q < 0.5 + 3 * std::sqrt(0.25 / 512));
        CHECK(derive_lr(hr, 0.5, 1) == derive_lr(hr, 0.5, 1));
        CHECK(volume_fraction(derive_lr(hr, 1.0, 1))[kQuartz] == 1.0);
    }
    SUBCASE("no new labels without mislabelling") {
        SegmentedVolume hr({16, 16, 16}, 4, 1.0, kPore);
        for (std::size_t i = 0; i < hr.labels().size(); i += 3) hr.labels()[i] = kClay;
        const SegmentedVolume lr = derive_lr(hr);
        for (Label l : lr.labels()) CHECK((l == kPore || l == kClay));
    }
    CHECK_THROWS_AS(derive_lr(SegmentedVolume({12, 8, 8}, 4, 1.0)), ShapeError);
}

TEST_CASE("coarsening keeps fractions close and drops thin pores") {
    const SegmentedVolume hr = generate_hr(SynthSpec{});
    const SegmentedVolume lr = derive_lr(hr);
    const SegmentedVolume up = one_hot_decode(upsample_replicate(one_hot_encode(lr), 8));
    const auto fh = volume_fraction(hr);
    const auto fu = volume_fraction(up);
    CHECK(fu == volume_fraction(lr));
    for (int p : {kPore, kQuartz, kFeldspar}) CHECK(std::abs(fh[p] - fu[p]) < 0.1);
    CHECK(std::abs(fh[kPore] - fu[kPore]) < 0.05);
    CHECK(fh[kPore] > fu[kPore]);
}

TEST_CASE("HR crops are sub-arrays of the volume") {
    const SegmentedVolume hr = generate_hr(small_spec(5));
    Rng rng(1);
    CHECK(extract_hr_pool(hr, 0, 16, rng).empty());
    const auto crops = extract_hr_crops(hr, 30, 16, rng);
    std::array<int, 3> planes{};
    for (const auto& c : crops) {
        ++planes[c.plane];
        for (int i = 0; i < 16; ++i)
            for (int j = 0; j < 16; ++j) {
                const int u = c.u0 + i, v = c.v0 + j;
                const Label expect = c.plane == 0   ? hr.at(u, v, c.slice)
                                     : c.plane == 1 ? hr.at(u, c.slice, v)
                                                    : hr.at(c.slice, u, v);
                REQUIRE(c.image.at(i, j) == expect);
            }
    }
    for (int n : planes) CHECK(n > 0);

    Rng a(9), b(9);
    CHECK(extract_hr_pool(hr, 10, 16, a) == extract_hr_pool(hr, 10, 16, b));
    CHECK_THROWS_AS(extract_hr_pool(hr, 1, 65, rng), ConfigError);
}
