#pragma once

#include <cstdint>
#include <vector>

#include "voxsr/segvol.hpp"

namespace voxsr::oracle {

inline SegmentedVolume random_volume(Dims3 d, int P, Rng& rng, double skew = 0) {
    SegmentedVolume v(d, P, 1.0);
    for (auto& l : v.labels()) {
        // With skew > 0 phase 0 is over-represented.
        l = rng.uniform() < skew ? 0 : static_cast<Label>(rng.uniform_int(static_cast<std::uint64_t>(P)));
    }
    return v;
}

// Brute-force enumerators: explicit coordinates, every neighbor and every pair.
inline std::vector<double> oracle_vf(const SegmentedVolume& v) {
    std::vector<std::int64_t> c(v.phase_count(), 0);
    const auto& d = v.dims();
    for (int x = 0; x < d.nx; ++x)
        for (int y = 0; y < d.ny; ++y)
            for (int z = 0; z < d.nz; ++z) ++c[v.at(x, y, z)];
    std::vector<double> f;
    for (auto n : c) f.push_back(static_cast<double>(n) / static_cast<double>(d.voxels()));
    return f;
}

inline std::vector<double> oracle_surface(const SegmentedVolume& v, bool& any) {
    const int P = v.phase_count();
    std::vector<std::vector<std::int64_t>> m(P, std::vector<std::int64_t>(P, 0));
    const auto& d = v.dims();
    const int off[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    for (int x = 0; x < d.nx; ++x)
        for (int y = 0; y < d.ny; ++y)
            for (int z = 0; z < d.nz; ++z)
                for (const auto& o : off) {
                    const int a = x + o[0], b = y + o[1], c = z + o[2];
                    if (a < 0 || b < 0 || c < 0 || a >= d.nx || b >= d.ny || c >= d.nz) continue;
                    if (v.at(x, y, z) != v.at(a, b, c)) ++m[v.at(x, y, z)][v.at(a, b, c)];
                }
    // every face was seen from both sides
    std::int64_t total = 0;
    std::vector<std::int64_t> pairs;
    for (int i = 0; i < P; ++i)
        for (int j = i + 1; j < P; ++j) {
            pairs.push_back(m[i][j]);
            total += m[i][j];
        }
    any = total > 0;
    std::vector<double> f;
    for (auto p : pairs) f.push_back(any ? static_cast<double>(p) / static_cast<double>(total) : 0.0);
    return f;
}

inline double oracle_s2(const SegmentedVolume& v, int phase, int r) {
    const auto& d = v.dims();
    const int n[3] = {d.nx, d.ny, d.nz};
    const bool point = d.voxels() == 1;
    std::int64_t match = 0, pairs = 0;
    for (int a = 0; a < 3; ++a) {
        if (n[a] == 1 && !point) continue;
        for (int x = 0; x < d.nx; ++x)
            for (int y = 0; y < d.ny; ++y)
                for (int z = 0; z < d.nz; ++z) {
                    int q[3] = {x, y, z};
                    q[a] += r;
                    if (q[a] >= n[a]) continue;
                    ++pairs;
                    match += v.at(x, y, z) == phase && v.at(q[0], q[1], q[2]) == phase;
                }
    }
    return static_cast<double>(match) / static_cast<double>(pairs);
}

}  // namespace voxsr::oracle
