#include <map>

#include <zlib.h>

#include "voxsr/error.hpp"
#include "voxsr/little_endian.hpp"
#include "voxsr/train.hpp"
#include "voxsr/volume_io.hpp"

// Layout: "VSRW", u32 version, JSON header, named f64 tensors, loss history,
// then a CRC-32 of everything before it.

namespace voxsr {

namespace {

constexpr char kMagic[4] = {'V', 'S', 'R', 'W'};
constexpr std::uint32_t kVersion = 1;

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
    return static_cast<std::uint32_t>(::crc32(0L, bytes.data(), static_cast<uInt>(bytes.size())));
}

struct NamedValues {
    std::string name;
    ad::Shape shape;
    std::span<const double> values;
};

std::vector<NamedValues> collect(const TrainState& st) {
    std::vector<NamedValues> out;
    auto add_all = [&](const std::string& prefix, const std::vector<NamedTensor>& ts) {
        for (const auto& t : ts) out.push_back({prefix + t.name, t.tensor.shape(), t.tensor.values()});
    };
    add_all("G.", st.g.parameters());
    add_all("G.buffer.", st.g.buffers());
    add_all("D.", st.d.parameters());
    auto add_moments = [&](const std::string& prefix, const ad::Adam& opt) {
        for (std::size_t i = 0; i < opt.params().size(); ++i) {
            const auto& p = opt.params()[i];
            const auto& mo = opt.moments()[i];
            out.push_back({prefix + "m." + p.name, p.tensor.shape(), mo.m});
            out.push_back({prefix + "v." + p.name, p.tensor.shape(), mo.v});
        }
    };
    add_moments("adam_g.", st.opt_g);
    add_moments("adam_d.", st.opt_d);
    return out;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const TrainState& st) {
    nlohmann::json header = {{"generator", st.g.config()},
                             {"discriminator", st.d.config()},
                             {"hyperparams", st.hp},
                             {"epoch", st.epoch},
                             {"iter", st.iter},
                             {"adam_g_step", st.opt_g.step_count()},
                             {"adam_d_step", st.opt_d.step_count()},
                             {"rng", st.rng.save()}};
    ByteWriter w;
    w.bytes(kMagic, 4);
    w.u32(kVersion);
    w.str(header.dump());

    const auto tensors = collect(st);
    w.u32(static_cast<std::uint32_t>(tensors.size()));
    for (const auto& t : tensors) {
        w.str(t.name);
        w.u32(static_cast<std::uint32_t>(t.shape.size()));
        for (auto d : t.shape) w.u64(static_cast<std::uint64_t>(d));
        for (double v : t.values) w.f64(v);
    }

    w.u64(st.history.size());
    for (const auto& r : st.history) {
        w.u32(static_cast<std::uint32_t>(r.epoch));
        w.u64(static_cast<std::uint64_t>(r.iter));
        w.u32(static_cast<std::uint32_t>(r.plane));
        w.f64(r.l_d);
        w.f64(r.l_gp);
        w.f64(r.l_g);
        w.f64(r.l_vw);
    }
    w.u32(crc32_of(w.buffer()));
    return std::move(w).take();
}

TrainState decode_checkpoint(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw DataError("not a checkpoint (bad magic)");
    const auto body = bytes.first(bytes.size() - 4);
    ByteReader tail(bytes.last(4));
    if (tail.u32() != crc32_of(body)) throw DataError("checkpoint corrupted (checksum mismatch)");

    ByteReader r(body);
    char magic[4];
    r.bytes(magic, 4);
    if (const auto v = r.u32(); v != kVersion)
        throw DataError("unsupported checkpoint version " + std::to_string(v));

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(r.str());
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("checkpoint header: ") + e.what());
    }
    TrainState st(header.at("generator").get<GeneratorConfig>(), header.at("discriminator").get<DiscriminatorConfig>(),
                  header.at("hyperparams").get<Hyperparams>(), Init::Zeros);
    st.epoch = header.at("epoch").get<int>();
    st.iter = header.at("iter").get<std::int64_t>();
    st.opt_g.set_step_count(header.at("adam_g_step").get<std::int64_t>());
    st.opt_d.set_step_count(header.at("adam_d_step").get<std::int64_t>());
    st.rng.restore(header.at("rng").get<std::string>());

    std::map<std::string, std::pair<ad::Shape, std::vector<double>>> stored;
    const std::uint32_t count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string name = r.str();
        ad::Shape shape(r.u32());
        for (auto& d : shape) d = static_cast<std::int64_t>(r.u64());
        std::vector<double> values(static_cast<std::size_t>(ad::numel(shape)));
        for (auto& v : values) v = r.f64();
        stored.emplace(std::move(name), std::make_pair(std::move(shape), std::move(values)));
    }

    auto fetch = [&](const std::string& name, const ad::Shape& shape) -> const std::vector<double>& {
        auto it = stored.find(name);
        if (it == stored.end()) throw DataError("checkpoint is missing tensor " + name);
        if (it->second.first != shape)
            throw DataError("checkpoint tensor " + name + " has shape " + ad::to_string(it->second.first) +
                            ", expected " + ad::to_string(shape));
        return it->second.second;
    };
    auto load_all = [&](const std::string& prefix, const std::vector<NamedTensor>& ts) {
        for (auto t : ts) {
            const auto& v = fetch(prefix + t.name, t.tensor.shape());
            std::copy(v.begin(), v.end(), t.tensor.values().begin());
        }
    };
    load_all("G.", st.g.parameters());
    load_all("G.buffer.", st.g.buffers());
    load_all("D.", st.d.parameters());
    auto load_moments = [&](const std::string& prefix, ad::Adam& opt) {
        for (std::size_t i = 0; i < opt.params().size(); ++i) {
            const auto& p = opt.params()[i];
            opt.moments()[i].m = fetch(prefix + "m." + p.name, p.tensor.shape());
            opt.moments()[i].v = fetch(prefix + "v." + p.name, p.tensor.shape());
        }
    };
    load_moments("adam_g.", st.opt_g);
    load_moments("adam_d.", st.opt_d);

    const std::uint64_t rows = r.u64();
    st.history.resize(rows);
    for (auto& row : st.history) {
        row.epoch = static_cast<int>(r.u32());
        row.iter = static_cast<std::int64_t>(r.u64());
        row.plane = static_cast<int>(r.u32());
        row.l_d = r.f64();
        row.l_gp = r.f64();
        row.l_g = r.f64();
        row.l_vw = r.f64();
    }
    return st;
}

void save_checkpoint(const std::filesystem::path& path, const TrainState& st) {
    write_file(path, encode_checkpoint(st));
}

TrainState load_checkpoint(const std::filesystem::path& path) {
    try {
        return decode_checkpoint(read_file(path));
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": checkpoint header: " + e.what());
    }
}

}  // namespace voxsr
