#include "levelflow/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace levelflow {

namespace {
std::atomic<int> g_limit{0};

int env_limit()
{
    const char* env = std::getenv("LEVELFLOW_THREADS");
    if (env == nullptr)
        return 1;
    int n = std::atoi(env);
    return n > 0 ? n : 1;
}
} // namespace

void set_thread_limit(int n) { g_limit.store(n > 0 ? n : 0); }

int thread_limit()
{
    int n = g_limit.load();
    return n > 0 ? n : env_limit();
}

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body)
{
    std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(thread_limit()), count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i)
            body(i);
        return;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failureLock;
    auto work = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= count)
                return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard<std::mutex> guard(failureLock);
                if (!failure)
                    failure = std::current_exception();
                next.store(count);
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (std::size_t w = 1; w < workers; ++w)
        pool.emplace_back(work);
    work();
    for (auto& t : pool)
        t.join();
    if (failure)
        std::rethrow_exception(failure);
}

} // namespace levelflow
