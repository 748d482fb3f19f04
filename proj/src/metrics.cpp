#include "voxsr/metrics.hpp"

#include <cmath>
#include <cstdio>

#include "voxsr/error.hpp"
#include "voxsr/json_util.hpp"
#include "voxsr/parallel.hpp"

namespace voxsr {

namespace {

std::array<int, 3> extents(const SegmentedVolume& v) { return {v.dims().nx, v.dims().ny, v.dims().nz}; }

std::array<std::int64_t, 3> strides(const SegmentedVolume& v) {
    const auto& d = v.dims();
    return {std::int64_t{d.ny} * d.nz, d.nz, 1};
}

// Smallest extent among axes that are actually present.
int min_active_extent(const SegmentedVolume& v) {
    int m = 0;
    for (int e : extents(v))
        if (e > 1) m = m == 0 ? e : std::min(m, e);
    return m == 0 ? 1 : m;
}

struct S2Counts {
    std::array<std::vector<std::int64_t>, 3> matches;
    std::array<std::vector<std::int64_t>, 3> pairs;
    std::array<bool, 3> active{};
};

S2Counts s2_counts(const SegmentedVolume& v, int phase, int max_lag, bool periodic) {
    const auto n = extents(v);
    const auto st = strides(v);
    std::vector<std::uint8_t> in(v.labels().size());
    for (std::size_t i = 0; i < in.size(); ++i) in[i] = v.labels()[i] == phase;

    S2Counts c;
    for (int a = 0; a < 3; ++a) {
        c.active[a] = n[a] > 1 || (n[0] == 1 && n[1] == 1 && n[2] == 1);
        c.matches[a].assign(max_lag + 1, 0);
        c.pairs[a].assign(max_lag + 1, 0);
        if (!c.active[a]) continue;
        const int b = (a + 1) % 3, e = (a + 2) % 3;
        for (int r = 0; r <= max_lag; ++r) {
            const int span = periodic ? n[a] : n[a] - r;
            std::int64_t m = 0;
            for (int i = 0; i < span; ++i) {
                const int j = (i + r) % n[a];
                for (int p = 0; p < n[b]; ++p)
                    for (int q = 0; q < n[e]; ++q) {
                        const std::int64_t base = p * st[b] + q * st[e];
                        m += in[base + i * st[a]] & in[base + j * st[a]];
                    }
            }
            c.matches[a][r] = m;
            c.pairs[a][r] = std::int64_t{span} * n[b] * n[e];
        }
    }
    return c;
}

void add_into(S2Counts& acc, const S2Counts& c) {
    for (int a = 0; a < 3; ++a) {
        acc.active[a] = acc.active[a] || c.active[a];
        if (acc.matches[a].empty()) {
            acc.matches[a] = c.matches[a];
            acc.pairs[a] = c.pairs[a];
            continue;
        }
        for (std::size_t r = 0; r < c.matches[a].size(); ++r) {
            acc.matches[a][r] += c.matches[a][r];
            acc.pairs[a][r] += c.pairs[a][r];
        }
    }
}

TwoPointCorrelation finish(const S2Counts& c, int phase, int max_lag) {
    TwoPointCorrelation t;
    t.phase = phase;
    t.s2.assign(max_lag + 1, 0.0);
    for (int r = 0; r <= max_lag; ++r) {
        std::int64_t m = 0, p = 0;
        for (int a = 0; a < 3; ++a) {
            if (!c.active[a]) continue;
            m += c.matches[a][r];
            p += c.pairs[a][r];
        }
        t.s2[r] = p > 0 ? static_cast<double>(m) / static_cast<double>(p) : 0.0;
    }
    for (int a = 0; a < 3; ++a) {
        if (!c.active[a]) continue;
        t.per_axis[a].resize(max_lag + 1);
        for (int r = 0; r <= max_lag; ++r)
            t.per_axis[a][r] = static_cast<double>(c.matches[a][r]) / static_cast<double>(c.pairs[a][r]);
    }
    return t;
}

void check_lag(const SegmentedVolume& v, int max_lag) {
    if (max_lag < 0) throw ConfigError("max_lag must be >= 0");
    const int m = min_active_extent(v);
    if (max_lag >= m && max_lag > 0)
        throw ConfigError("max_lag " + std::to_string(max_lag) + " must be smaller than the volume extent " +
                          std::to_string(m));
}

std::vector<std::int64_t> pair_face_counts(const SegmentedVolume& v) {
    const int P = v.phase_count();
    const auto n = extents(v);
    const auto st = strides(v);
    auto labels = v.labels();
    std::vector<std::int64_t> faces(static_cast<std::size_t>(pair_count(P)), 0);
    for (int x = 0; x < n[0]; ++x)
        for (int y = 0; y < n[1]; ++y)
            for (int z = 0; z < n[2]; ++z) {
                const std::int64_t i = x * st[0] + y * st[1] + z;
                const int here[3] = {x, y, z};
                for (int a = 0; a < 3; ++a) {
                    if (here[a] + 1 >= n[a]) continue;
                    const int l0 = labels[i], l1 = labels[i + st[a]];
                    if (l0 != l1) ++faces[pair_index(l0, l1, P)];
                }
            }
    return faces;
}

SurfaceArea surface_from_faces(std::vector<std::int64_t> faces, int P, SurfaceNormalization norm) {
    SurfaceArea s;
    s.phase_count = P;
    s.pair_faces = std::move(faces);
    for (auto f : s.pair_faces) s.total_faces += f;
    s.has_interfaces = s.total_faces > 0;
    if (norm == SurfaceNormalization::PairRelative) {
        s.fractions.assign(s.pair_faces.size(), 0.0);
        if (s.has_interfaces)
            for (std::size_t k = 0; k < s.pair_faces.size(); ++k)
                s.fractions[k] = static_cast<double>(s.pair_faces[k]) / static_cast<double>(s.total_faces);
    } else {
        s.fractions.assign(static_cast<std::size_t>(P) * P, 0.0);
        for (int i = 0; i < P; ++i) {
            std::int64_t row = 0;
            for (int j = 0; j < P; ++j)
                if (j != i) row += s.pair_faces[pair_index(i, j, P)];
            if (row == 0) continue;
            for (int j = 0; j < P; ++j)
                if (j != i)
                    s.fractions[i * P + j] =
                        static_cast<double>(s.pair_faces[pair_index(i, j, P)]) / static_cast<double>(row);
        }
    }
    return s;
}

}  // namespace

std::vector<std::int64_t> phase_counts(const SegmentedVolume& v) {
    std::vector<std::int64_t> c(static_cast<std::size_t>(v.phase_count()), 0);
    for (Label l : v.labels()) ++c[l];
    return c;
}

std::vector<double> volume_fraction(const SegmentedVolume& v) {
    const auto c = phase_counts(v);
    const auto total = static_cast<double>(v.labels().size());
    std::vector<double> f(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) f[i] = static_cast<double>(c[i]) / total;
    return f;
}

int pair_count(int P) { return P * (P - 1) / 2; }

int pair_index(int i, int j, int P) {
    if (i > j) std::swap(i, j);
    // pairs (0, 1..P-1) come first, then (1, 2..P-1), ...
    return i * P - i * (i + 1) / 2 + (j - i - 1);
}

std::pair<int, int> pair_from_index(int k, int P) {
    for (int i = 0; i < P; ++i)
        for (int j = i + 1; j < P; ++j)
            if (pair_index(i, j, P) == k) return {i, j};
    throw ConfigError("pair index out of range");
}

SurfaceArea relative_surface_area(const SegmentedVolume& v, SurfaceNormalization norm) {
    return surface_from_faces(pair_face_counts(v), v.phase_count(), norm);
}

TwoPointCorrelation two_point_correlation(const SegmentedVolume& v, int phase, int max_lag, bool periodic) {
    if (phase < 0 || phase >= v.phase_count()) throw ConfigError("phase out of range");
    check_lag(v, max_lag);
    return finish(s2_counts(v, phase, max_lag, periodic), phase, max_lag);
}

double s2_at_distance(const std::vector<double>& s2, double voxel_size, double distance) {
    const double lag = distance / voxel_size;
    const double last = static_cast<double>(s2.size()) - 1;
    if (lag < 0 || lag > last + 1e-12) throw ConfigError("distance beyond the sampled S2 lags");
    const auto i = std::min(static_cast<std::size_t>(lag), s2.size() - 1);
    if (i + 1 >= s2.size()) return s2.back();
    const double t = lag - static_cast<double>(i);
    return (1 - t) * s2[i] + t * s2[i + 1];
}

PatchStats patch_statistics(const std::vector<SegmentedVolume>& dataset, int count, int side,
                            const PatchMetric& metric, Rng& rng) {
    if (dataset.empty()) throw DataError("patch_statistics: empty dataset");
    if (count < 1) throw ConfigError("patch count must be >= 1");
    if (side < 1) throw ConfigError("patch side must be >= 1");
    for (const auto& v : dataset)
        for (int e : extents(v))
            if (e > 1 && side > e)
                throw ConfigError("patch side " + std::to_string(side) + " exceeds dataset extent " +
                                  std::to_string(e));

    struct Draw {
        std::size_t element;
        std::array<int, 3> origin;
        std::array<int, 3> size;
    };
    std::vector<Draw> draws(static_cast<std::size_t>(count));
    for (auto& d : draws) {
        d.element = static_cast<std::size_t>(rng.uniform_int(dataset.size()));
        const auto n = extents(dataset[d.element]);
        for (int a = 0; a < 3; ++a) {
            d.size[a] = n[a] > 1 ? side : 1;
            d.origin[a] = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n[a] - d.size[a] + 1)));
        }
    }

    std::vector<std::vector<double>> values(draws.size());
    parallel_for(count, [&](std::int64_t k) {
        const Draw& d = draws[static_cast<std::size_t>(k)];
        const auto& src = dataset[d.element];
        SegmentedVolume patch({d.size[0], d.size[1], d.size[2]}, src.phase_count(), src.voxel_size());
        for (int x = 0; x < d.size[0]; ++x)
            for (int y = 0; y < d.size[1]; ++y)
                for (int z = 0; z < d.size[2]; ++z)
                    patch.set(x, y, z, src.at(d.origin[0] + x, d.origin[1] + y, d.origin[2] + z));
        values[static_cast<std::size_t>(k)] = metric(patch);
    });

    PatchStats s;
    s.count = count;
    s.side = side;
    const std::size_t dims = values.front().size();
    s.mean.assign(dims, 0.0);
    s.variance.assign(dims, 0.0);
    for (const auto& v : values)
        for (std::size_t i = 0; i < dims; ++i) s.mean[i] += v[i];
    for (auto& m : s.mean) m /= count;
    if (count > 1) {
        for (const auto& v : values)
            for (std::size_t i = 0; i < dims; ++i) s.variance[i] += (v[i] - s.mean[i]) * (v[i] - s.mean[i]);
        for (auto& var : s.variance) var /= count - 1;
    }
    return s;
}

void to_json(nlohmann::json& j, const EvalSpec& s) {
    j = nlohmann::json{{"patch_count", s.patch_count},
                       {"patch_side", s.patch_side},
                       {"max_lag", s.max_lag},
                       {"periodic", s.periodic},
                       {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, EvalSpec& s) {
    const std::string where = "eval";
    reject_unknown_keys(j, {"patch_count", "patch_side", "max_lag", "periodic", "seed"}, where);
    read_optional(j, "patch_count", s.patch_count, where);
    read_optional(j, "patch_side", s.patch_side, where);
    read_optional(j, "max_lag", s.max_lag, where);
    read_optional(j, "periodic", s.periodic, where);
    read_optional(j, "seed", s.seed, where);
    if (s.patch_count < 1 || s.patch_side < 1 || s.max_lag < 0) throw ConfigError("eval settings out of range");
}

MetricReport evaluate(const std::vector<SegmentedVolume>& dataset, const std::string& name, const EvalSpec& spec) {
    if (dataset.empty()) throw DataError(name + ": empty dataset");
    MetricReport r;
    r.name = name;
    r.spec = spec;
    r.phase_count = dataset.front().phase_count();
    r.voxel_size = dataset.front().voxel_size();
    const int P = r.phase_count;
    for (const auto& v : dataset) {
        if (v.phase_count() != P) throw DataError(name + ": mixed phase counts");
        check_lag(v, spec.max_lag);
    }
    if (spec.patch_side <= spec.max_lag)
        throw ConfigError("patch_side must exceed max_lag so every patch has S2 pairs");

    std::vector<std::int64_t> counts(static_cast<std::size_t>(P), 0);
    std::vector<std::int64_t> faces(static_cast<std::size_t>(pair_count(P)), 0);
    std::vector<S2Counts> s2(static_cast<std::size_t>(P));
    std::int64_t total = 0;
    for (const auto& v : dataset) {
        const auto c = phase_counts(v);
        for (int i = 0; i < P; ++i) counts[i] += c[i];
        total += static_cast<std::int64_t>(v.labels().size());
        const auto f = pair_face_counts(v);
        for (std::size_t k = 0; k < f.size(); ++k) faces[k] += f[k];
        for (int i = 0; i < P; ++i) add_into(s2[i], s2_counts(v, i, spec.max_lag, spec.periodic));
    }
    for (int i = 0; i < P; ++i) r.volume_fraction.push_back(static_cast<double>(counts[i]) / static_cast<double>(total));
    r.surface = surface_from_faces(faces, P, SurfaceNormalization::PairRelative);
    for (int i = 0; i < P; ++i) r.s2.push_back(finish(s2[i], i, spec.max_lag));

    Rng rng(spec.seed);
    r.vf_patches = patch_statistics(dataset, spec.patch_count, spec.patch_side,
                                    [](const SegmentedVolume& p) { return volume_fraction(p); }, rng);
    r.surface_patches = patch_statistics(dataset, spec.patch_count, spec.patch_side,
                                         [](const SegmentedVolume& p) { return relative_surface_area(p).fractions; },
                                         rng);
    for (int i = 0; i < P; ++i) {
        const int lag = spec.max_lag;
        const bool periodic = spec.periodic;
        r.s2_patches.push_back(patch_statistics(
            dataset, spec.patch_count, spec.patch_side,
            [i, lag, periodic](const SegmentedVolume& p) { return two_point_correlation(p, i, lag, periodic).s2; },
            rng));
    }
    return r;
}

nlohmann::json report_json(const MetricReport& r) {
    using nlohmann::json;
    json pairs = json::array();
    for (int k = 0; k < pair_count(r.phase_count); ++k) {
        const auto [i, j] = pair_from_index(k, r.phase_count);
        pairs.push_back({{"pair", {i, j}},
                         {"faces", r.surface.pair_faces[k]},
                         {"fraction", r.surface.fractions[k]},
                         {"patch_mean", r.surface_patches.mean[k]},
                         {"patch_variance", r.surface_patches.variance[k]}});
    }
    json phases = json::array();
    for (int i = 0; i < r.phase_count; ++i) {
        json lags = json::array();
        for (std::size_t l = 0; l < r.s2[i].s2.size(); ++l)
            lags.push_back({{"lag_voxels", l},
                            {"lag_um", static_cast<double>(l) * r.voxel_size},
                            {"s2", r.s2[i].s2[l]},
                            {"patch_mean", r.s2_patches[i].mean[l]},
                            {"patch_variance", r.s2_patches[i].variance[l]}});
        json axes = json::object();
        const char* names[3] = {"x", "y", "z"};
        for (int a = 0; a < 3; ++a)
            if (!r.s2[i].per_axis[a].empty()) axes[names[a]] = r.s2[i].per_axis[a];
        phases.push_back({{"phase", i},
                          {"volume_fraction", r.volume_fraction[i]},
                          {"vf_patch_mean", r.vf_patches.mean[i]},
                          {"vf_patch_variance", r.vf_patches.variance[i]},
                          {"two_point_correlation", lags},
                          {"s2_per_axis", axes}});
    }
    return {{"name", r.name},
            {"phase_count", r.phase_count},
            {"voxel_size_um", r.voxel_size},
            {"patches", r.spec},
            {"has_interfaces", r.surface.has_interfaces},
            {"total_interface_faces", r.surface.total_faces},
            {"phases", phases},
            {"surface_pairs", pairs}};
}

std::string report_csv(const MetricReport& r) {
    std::string out = "metric,item,lag_voxels,lag_um,value,patch_mean,patch_variance\n";
    char buf[256];
    for (int i = 0; i < r.phase_count; ++i) {
        std::snprintf(buf, sizeof buf, "volume_fraction,%d,,,%.17g,%.17g,%.17g\n", i, r.volume_fraction[i],
                      r.vf_patches.mean[i], r.vf_patches.variance[i]);
        out += buf;
    }
    for (int k = 0; k < pair_count(r.phase_count); ++k) {
        const auto [i, j] = pair_from_index(k, r.phase_count);
        std::snprintf(buf, sizeof buf, "surface_fraction,%d-%d,,,%.17g,%.17g,%.17g\n", i, j, r.surface.fractions[k],
                      r.surface_patches.mean[k], r.surface_patches.variance[k]);
        out += buf;
    }
    for (int i = 0; i < r.phase_count; ++i)
        for (std::size_t l = 0; l < r.s2[i].s2.size(); ++l) {
            std::snprintf(buf, sizeof buf, "s2,%d,%zu,%.17g,%.17g,%.17g,%.17g\n", i, l,
                          static_cast<double>(l) * r.voxel_size, r.s2[i].s2[l], r.s2_patches[i].mean[l],
                          r.s2_patches[i].variance[l]);
            out += buf;
        }
    return out;
}

}  // namespace voxsr
