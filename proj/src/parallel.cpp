#include "floodlens/parallel.hpp"

#include <omp.h>

#include <atomic>
#include <cstdlib>

namespace floodlens::parallel {

namespace {

int environment_default() {
    if (const char* env = std::getenv("FLOODLENS_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    return omp_get_max_threads();
}

std::atomic<int> g_override{0};

} // namespace

int worker_count() {
    const int n = g_override.load();
    if (n > 0) return n;
    static const int env = environment_default();
    return env;
}

void set_worker_count(int n) { g_override.store(n > 0 ? n : 0); }

} // namespace floodlens::parallel
