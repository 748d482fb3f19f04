#include "voxsr/parallel.hpp"

#include <cstdlib>
#include <thread>

namespace voxsr {

int worker_count() {
    static const int count = [] {
        if (const char* env = std::getenv("VOXSR_THREADS")) {
            const int n = std::atoi(env);
            if (n > 0) return n;
        }
        const unsigned hw = std::thread::hardware_concurrency();
        return hw > 0 ? static_cast<int>(hw) : 1;
    }();
    return count;
}

}  // namespace voxsr
