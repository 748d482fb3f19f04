#include "voxsr/synthdata.hpp"

#include <array>
#include <cmath>
#include <sstream>

#include "voxsr/error.hpp"
#include "voxsr/json_util.hpp"

namespace voxsr {

void SynthSpec::validate() const {
    if (side < 8 || side % 8 != 0) throw ConfigError("synth.side must be a positive multiple of 8");
    if (!(voxel_size_um > 0)) throw ConfigError("synth.voxel_size_um must be > 0");
    if (!(target_pore_fraction > 0 && target_pore_fraction < 1))
        throw ConfigError("synth.target_pore_fraction must be in (0, 1)");
    if (!(quartz_radius_min > 0 && quartz_radius_max >= quartz_radius_min))
        throw ConfigError("synth quartz radius range is invalid");
    if (!(feldspar_axis_min > 0 && feldspar_axis_max >= feldspar_axis_min))
        throw ConfigError("synth feldspar axis range is invalid");
    if (!(feldspar_share > 0 && feldspar_share < 1)) throw ConfigError("synth.feldspar_share must be in (0, 1)");
    if (clay_shell < 1) throw ConfigError("synth.clay_shell must be >= 1 so every phase is present");
    if (channel_count < 0 || !(channel_radius > 0)) throw ConfigError("synth channel settings are invalid");
    if (!(lr_mislabel_rate >= 0 && lr_mislabel_rate <= 1))
        throw ConfigError("synth.lr_mislabel_rate must be in [0, 1]");
    if (pool_count < 0 || pool_side < 1 || pool_side > side) throw ConfigError("synth pool settings are invalid");
}

void to_json(nlohmann::json& j, const SynthSpec& s) {
    j = nlohmann::json{{"side", s.side},
                       {"voxel_size_um", s.voxel_size_um},
                       {"target_pore_fraction", s.target_pore_fraction},
                       {"quartz_radius_min", s.quartz_radius_min},
                       {"quartz_radius_max", s.quartz_radius_max},
                       {"feldspar_axis_min", s.feldspar_axis_min},
                       {"feldspar_axis_max", s.feldspar_axis_max},
                       {"feldspar_share", s.feldspar_share},
                       {"clay_shell", s.clay_shell},
                       {"channel_count", s.channel_count},
                       {"channel_radius", s.channel_radius},
                       {"lr_mislabel_rate", s.lr_mislabel_rate},
                       {"pool_count", s.pool_count},
                       {"pool_side", s.pool_side},
                       {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, SynthSpec& s) {
    const std::string where = "synth";
    reject_unknown_keys(j,
                        {"side", "voxel_size_um", "target_pore_fraction", "quartz_radius_min", "quartz_radius_max",
                         "feldspar_axis_min", "feldspar_axis_max", "feldspar_share", "clay_shell", "channel_count",
                         "channel_radius", "lr_mislabel_rate", "pool_count", "pool_side", "seed"},
                        where);
    read_optional(j, "side", s.side, where);
    read_optional(j, "voxel_size_um", s.voxel_size_um, where);
    read_optional(j, "target_pore_fraction", s.target_pore_fraction, where);
    read_optional(j, "quartz_radius_min", s.quartz_radius_min, where);
    read_optional(j, "quartz_radius_max", s.quartz_radius_max, where);
    read_optional(j, "feldspar_axis_min", s.feldspar_axis_min, where);
    read_optional(j, "feldspar_axis_max", s.feldspar_axis_max, where);
    read_optional(j, "feldspar_share", s.feldspar_share, where);
    read_optional(j, "clay_shell", s.clay_shell, where);
    read_optional(j, "channel_count", s.channel_count, where);
    read_optional(j, "channel_radius", s.channel_radius, where);
    read_optional(j, "lr_mislabel_rate", s.lr_mislabel_rate, where);
    read_optional(j, "pool_count", s.pool_count, where);
    read_optional(j, "pool_side", s.pool_side, where);
    read_optional(j, "seed", s.seed, where);
    s.validate();
}

namespace {

using Vec3 = std::array<double, 3>;

Vec3 random_unit(Rng& rng) {
    for (;;) {
        Vec3 v{rng.normal(), rng.normal(), rng.normal()};
        const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
        if (n > 1e-9) return {v[0] / n, v[1] / n, v[2] / n};
    }
}

// Orthonormal frame with first axis d.
std::array<Vec3, 3> frame(const Vec3& d) {
    const Vec3 t = std::abs(d[0]) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
    Vec3 b{d[1] * t[2] - d[2] * t[1], d[2] * t[0] - d[0] * t[2], d[0] * t[1] - d[1] * t[0]};
    const double n = std::sqrt(b[0] * b[0] + b[1] * b[1] + b[2] * b[2]);
    for (auto& x : b) x /= n;
    const Vec3 c{d[1] * b[2] - d[2] * b[1], d[2] * b[0] - d[0] * b[2], d[0] * b[1] - d[1] * b[0]};
    return {d, b, c};
}

struct Builder {
    SegmentedVolume v;
    std::vector<std::uint8_t> locked;  // channel voxels stay pore
    std::int64_t pore = 0;

    explicit Builder(const SynthSpec& s)
        : v({s.side, s.side, s.side}, 4, s.voxel_size_um, kPore),
          locked(static_cast<std::size_t>(v.dims().voxels()), 0),
          pore(v.dims().voxels()) {}

    void paint(std::int64_t i, Label l, bool only_pore) {
        if (locked[i]) return;
        const Label cur = v.labels()[i];
        if (only_pore && cur != kPore) return;
        if (cur == kPore && l != kPore) --pore;
        v.labels()[i] = l;
    }

    // Ellipsoid with semi-axes a along the frame; the clay shell is the band
    // between the ellipsoid and its copy grown by `shell` voxels.
    void grain(const Vec3& c, const std::array<Vec3, 3>& f, const Vec3& a, Label core, int shell) {
        const double reach = std::max({a[0], a[1], a[2]}) + shell + 1;
        const int n = v.dims().nx;
        auto lo = [&](double x) { return std::max(0, static_cast<int>(std::floor(x - reach))); };
        auto hi = [&](double x) { return std::min(n - 1, static_cast<int>(std::ceil(x + reach))); };
        for (int x = lo(c[0]); x <= hi(c[0]); ++x)
            for (int y = lo(c[1]); y <= hi(c[1]); ++y)
                for (int z = lo(c[2]); z <= hi(c[2]); ++z) {
                    const Vec3 d{x - c[0], y - c[1], z - c[2]};
                    double q = 0, qs = 0;
                    for (int k = 0; k < 3; ++k) {
                        const double p = d[0] * f[k][0] + d[1] * f[k][1] + d[2] * f[k][2];
                        q += (p / a[k]) * (p / a[k]);
                        qs += (p / (a[k] + shell)) * (p / (a[k] + shell));
                    }
                    const std::int64_t i = v.index(x, y, z);
                    if (q <= 1)
                        paint(i, core, false);
                    else if (qs <= 1)
                        paint(i, kClay, true);
                }
    }

    void channel(const Vec3& p, const Vec3& d, double r) {
        const int n = v.dims().nx;
        for (int x = 0; x < n; ++x)
            for (int y = 0; y < n; ++y)
                for (int z = 0; z < n; ++z) {
                    const Vec3 w{x - p[0], y - p[1], z - p[2]};
                    const double t = w[0] * d[0] + w[1] * d[1] + w[2] * d[2];
                    const double r2 = w[0] * w[0] + w[1] * w[1] + w[2] * w[2] - t * t;
                    if (r2 <= r * r) locked[v.index(x, y, z)] = 1;
                }
    }
};

SegmentedVolume attempt(const SynthSpec& s, std::uint64_t seed, double& achieved) {
    Rng rng(seed);
    Builder b(s);
    const double n = s.side;
    for (int k = 0; k < s.channel_count; ++k) {
        const Vec3 p{rng.uniform(0, n), rng.uniform(0, n), rng.uniform(0, n)};
        b.channel(p, random_unit(rng), s.channel_radius);
    }
    const std::int64_t total = b.v.dims().voxels();
    const auto target = static_cast<std::int64_t>(std::llround(s.target_pore_fraction * static_cast<double>(total)));
    std::int64_t locked = 0;
    for (auto l : b.locked) locked += l;
    if (locked > target) {
        // channels alone exceed the pore budget
        achieved = static_cast<double>(locked) / static_cast<double>(total);
        return std::move(b.v);
    }
    const int max_stall = 5000;
    for (int stall = 0; stall < max_stall && b.pore > target;) {
        const std::int64_t before = b.pore;
        const Vec3 c{rng.uniform(0, n), rng.uniform(0, n), rng.uniform(0, n)};
        if (rng.uniform() < s.feldspar_share) {
            const Vec3 a{rng.uniform(s.feldspar_axis_min, s.feldspar_axis_max),
                         rng.uniform(s.feldspar_axis_min, s.feldspar_axis_max),
                         rng.uniform(s.feldspar_axis_min, s.feldspar_axis_max)};
            b.grain(c, frame(random_unit(rng)), a, kFeldspar, s.clay_shell);
        } else {
            const double r = rng.uniform(s.quartz_radius_min, s.quartz_radius_max);
            b.grain(c, frame({1, 0, 0}), {r, r, r}, kQuartz, s.clay_shell);
        }
        stall = b.pore < before ? 0 : stall + 1;
    }
    achieved = static_cast<double>(b.pore) / static_cast<double>(total);
    return std::move(b.v);
}

}  // namespace

SegmentedVolume generate_hr(const SynthSpec& spec) {
    spec.validate();
    double achieved = 0;
    for (int retry = 0; retry < 8; ++retry) {
        SegmentedVolume v = attempt(spec, splitmix64(spec.seed + static_cast<std::uint64_t>(retry)), achieved);
        std::array<bool, 4> present{};
        for (Label l : v.labels()) present[l] = true;
        const bool all = present[0] && present[1] && present[2] && present[3];
        if (all && std::abs(achieved - spec.target_pore_fraction) <= 0.05) return v;
    }
    std::ostringstream os;
    os << "cannot reach pore fraction " << spec.target_pore_fraction << " with all four phases present; achieved "
       << achieved;
    throw DataError(os.str());
}

SegmentedVolume derive_lr(const SegmentedVolume& hr, double rho, std::uint64_t seed) {
    const Dims3 d = hr.dims();
    if (d.nx % 8 || d.ny % 8 || d.nz % 8) throw ShapeError("derive_lr: HR dims must be multiples of 8");
    if (!(rho >= 0 && rho <= 1)) throw ConfigError("mislabel rate must be in [0, 1]");
    const Dims3 ld{d.nx / 8, d.ny / 8, d.nz / 8};
    SegmentedVolume lr(ld, hr.phase_count(), hr.voxel_size() * 8);
    std::vector<int> votes(static_cast<std::size_t>(hr.phase_count()));
    for (int x = 0; x < ld.nx; ++x)
        for (int y = 0; y < ld.ny; ++y)
            for (int z = 0; z < ld.nz; ++z) {
                std::fill(votes.begin(), votes.end(), 0);
                for (int i = 0; i < 8; ++i)
                    for (int j = 0; j < 8; ++j)
                        for (int k = 0; k < 8; ++k) ++votes[hr.at(8 * x + i, 8 * y + j, 8 * z + k)];
                int best = 0;
                for (int p = 1; p < hr.phase_count(); ++p)
                    if (votes[p] > votes[best]) best = p;
                lr.set(x, y, z, static_cast<Label>(best));
            }
    if (rho > 0 && hr.phase_count() > kFeldspar) {
        Rng rng(seed);
        for (auto& l : lr.labels())
            if (rng.uniform() < rho && l == kFeldspar) l = kQuartz;
    }
    return lr;
}

std::vector<PoolCrop> extract_hr_crops(const SegmentedVolume& hr, int count, int side, Rng& rng) {
    const Dims3 d = hr.dims();
    if (side < 1 || side > std::min({d.nx, d.ny, d.nz}))
        throw ConfigError("crop side " + std::to_string(side) + " does not fit the HR volume");
    std::vector<PoolCrop> out;
    for (int c = 0; c < count; ++c) {
        PoolCrop p;
        p.plane = static_cast<int>(rng.uniform_int(3));
        // extents of (u, v, fixed) for the chosen plane
        const std::array<int, 3> e = p.plane == 0 ? std::array{d.nx, d.ny, d.nz}
                                     : p.plane == 1 ? std::array{d.nx, d.nz, d.ny}
                                                    : std::array{d.ny, d.nz, d.nx};
        p.slice = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(e[2])));
        p.u0 = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(e[0] - side + 1)));
        p.v0 = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(e[1] - side + 1)));
        p.image = SegmentedImage2D(side, side, hr.phase_count());
        for (int i = 0; i < side; ++i)
            for (int j = 0; j < side; ++j) {
                const int u = p.u0 + i, v = p.v0 + j;
                const Label l = p.plane == 0   ? hr.at(u, v, p.slice)
                                : p.plane == 1 ? hr.at(u, p.slice, v)
                                               : hr.at(p.slice, u, v);
                p.image.set(i, j, l);
            }
        out.push_back(std::move(p));
    }
    return out;
}

std::vector<SegmentedImage2D> extract_hr_pool(const SegmentedVolume& hr, int count, int side, Rng& rng) {
    std::vector<SegmentedImage2D> out;
    for (auto& c : extract_hr_crops(hr, count, side, rng)) out.push_back(std::move(c.image));
    return out;
}

}  // namespace voxsr
