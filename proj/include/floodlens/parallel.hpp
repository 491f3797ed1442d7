#pragma once
// Worker-count control for the OpenMP kernels. The default comes from the
// FLOODLENS_THREADS environment variable, falling back to the OpenMP default.

namespace floodlens::parallel {

int worker_count();
void set_worker_count(int n);  // n <= 0 restores the environment default

class ScopedWorkers {
public:
    explicit ScopedWorkers(int n) : previous_(worker_count()) { set_worker_count(n); }
    ~ScopedWorkers() { set_worker_count(previous_); }
    ScopedWorkers(const ScopedWorkers&) = delete;
    ScopedWorkers& operator=(const ScopedWorkers&) = delete;

private:
    int previous_;
};

} // namespace floodlens::parallel
