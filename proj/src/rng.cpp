#include "voxsr/rng.hpp"

#include <sstream>

#include "voxsr/error.hpp"

namespace voxsr {

std::string Rng::save() const {
    std::ostringstream os;
    os.precision(17);
    os << engine_ << ' ' << (has_spare_ ? 1 : 0) << ' ' << std::hexfloat << spare_;
    return os.str();
}

void Rng::restore(const std::string& state) {
    std::istringstream is(state);
    int spare_flag = 0;
    std::string spare_text;
    is >> engine_ >> spare_flag >> spare_text;
    if (!is && !is.eof()) throw DataError("corrupt random-state snapshot");
    has_spare_ = spare_flag != 0;
    spare_ = std::strtod(spare_text.c_str(), nullptr);
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double hashed_normal(std::uint64_t seed, std::uint64_t index) {
    const std::uint64_t a = splitmix64(splitmix64(seed) ^ (2 * index));
    const std::uint64_t b = splitmix64(a ^ 0x632be59bd9b4e019ULL);
    const double u1 = (static_cast<double>(a >> 11) + 0.5) * 0x1.0p-53;
    const double u2 = static_cast<double>(b >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

}  // namespace voxsr
