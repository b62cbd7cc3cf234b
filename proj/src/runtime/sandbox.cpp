#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/mman.h>
#include <sys/resource.h>
#include <sys/wait.h>
#include <unistd.h>

#include <condition_variable>
#include <cstring>
#include <fstream>
#include <mutex>
#include <new>
#include <thread>

#include "udfvault/error.hpp"
#include "udfvault/runtime.hpp"

namespace udfvault::runtime {

namespace {

[[noreturn]] void rethrow_mapped(std::exception_ptr e)
{
    try {
        std::rethrow_exception(e);
    } catch (const Error&) {
        throw;
    } catch (const std::bad_alloc&) {
        fail(Errc::MemoryCapExceeded, "UDF ran out of memory");
    } catch (const std::exception& ex) {
        fail(Errc::UdfRuntimeError, ex.what());
    } catch (...) {
        fail(Errc::UdfPanic, "UDF raised a non-standard exception");
    }
}

std::uint64_t output_bytes(const ExecutionEnv& env)
{
    if (env.output.dtype.has_heap_refs())
        fail(Errc::InputDTypeUnsupported, "UDF output type " + env.output.dtype.name() + " needs a string heap");
    return element_count(env.output.shape) * env.output.dtype.size();
}

// State shared with the worker thread. The worker may outlive the call when
// a thunk ignores cancellation, so it owns everything it touches.
struct Run {
    ExecutionEnv env;
    Thunk thunk;
    std::stop_source stop;
    std::mutex mutex;
    std::condition_variable cv;
    bool done = false;
    std::exception_ptr error;
};

DataBuffer run_in_thread(const ExecutionEnv& env, const Thunk& thunk, const SandboxOptions& options)
{
    auto run = std::make_shared<Run>();
    run->env.inputs = env.inputs;
    run->env.output.path = env.output.path;
    run->env.output.dtype = env.output.dtype;
    run->env.output.shape = env.output.shape;
    run->env.limits = env.limits;
    run->env.capabilities = env.capabilities;
    run->env.stop = run->stop.get_token();
    run->thunk = thunk;
    try {
        run->env.output.data.bytes.assign(output_bytes(env), 0);
    } catch (const std::bad_alloc&) {
        fail(Errc::MemoryCapExceeded, "cannot allocate the output buffer");
    }

    const auto deadline = std::chrono::steady_clock::now() + env.limits.wall_timeout;
    std::thread([run] {
        try {
            run->thunk(run->env);
        } catch (...) {
            run->error = std::current_exception();
        }
        std::lock_guard lock(run->mutex);
        run->done = true;
        run->cv.notify_all();
    }).detach();

    std::unique_lock lock(run->mutex);
    if (!run->cv.wait_until(lock, deadline, [&] { return run->done; })) {
        run->stop.request_stop();
        run->cv.wait_for(lock, options.grace, [&] { return run->done; });
        // Whatever the thunk produced after the deadline is discarded.
        fail(Errc::Timeout, "UDF exceeded its wall-clock limit of " + std::to_string(env.limits.wall_timeout.count()) + " ms");
    }
    if (run->error)
        rethrow_mapped(run->error);
    return std::move(run->env.output.data);
}

std::uint64_t address_space_in_use()
{
    std::ifstream statm("/proc/self/statm");
    std::uint64_t pages = 0;
    statm >> pages;
    return pages * static_cast<std::uint64_t>(sysconf(_SC_PAGESIZE));
}

void write_all(int fd, const void* data, std::size_t len)
{
    const auto* p = static_cast<const char*>(data);
    while (len > 0) {
        auto n = ::write(fd, p, len);
        if (n <= 0)
            return;
        p += n;
        len -= static_cast<std::size_t>(n);
    }
}

// Child to parent report: u8 ok, u32 error code, message text.
[[noreturn]] void child_main(const ExecutionEnv& parent_env, const Thunk& thunk, void* shared, int fd)
{
    std::uint8_t ok = 0;
    std::uint32_t code = 0;
    std::string message;
    try {
        rlimit lim{};
        lim.rlim_cur = lim.rlim_max = address_space_in_use() + parent_env.limits.memory_cap;
        setrlimit(RLIMIT_AS, &lim);
        ExecutionEnv env = parent_env;
        env.stop = {};
        env.reserved = 0;
        env.output.data = {};
        env.output.data.bytes.assign(output_bytes(parent_env), 0);
        thunk(env);
        std::memcpy(shared, env.output.data.bytes.data(), env.output.data.bytes.size());
        ok = 1;
    } catch (const Error& e) {
        code = static_cast<std::uint32_t>(e.code());
        message = e.what();
    } catch (const std::bad_alloc&) {
        code = static_cast<std::uint32_t>(Errc::MemoryCapExceeded);
        message = "UDF ran out of memory";
    } catch (const std::exception& e) {
        code = static_cast<std::uint32_t>(Errc::UdfRuntimeError);
        message = e.what();
    } catch (...) {
        code = static_cast<std::uint32_t>(Errc::UdfPanic);
        message = "UDF raised a non-standard exception";
    }
    write_all(fd, &ok, 1);
    write_all(fd, &code, sizeof code);
    write_all(fd, message.data(), message.size());
    ::close(fd);
    ::_exit(0);
}

DataBuffer run_in_process(const ExecutionEnv& env, const Thunk& thunk)
{
    const std::uint64_t out_len = output_bytes(env);
    const std::size_t map_len = std::max<std::size_t>(out_len, 1);
    void* shared = ::mmap(nullptr, map_len, PROT_READ | PROT_WRITE, MAP_SHARED | MAP_ANONYMOUS, -1, 0);
    if (shared == MAP_FAILED)
        fail(Errc::MemoryCapExceeded, "cannot map the shared output segment");
    struct Unmap {
        void* p;
        std::size_t n;
        ~Unmap() { ::munmap(p, n); }
    } unmap{shared, map_len};

    int fds[2];
    if (::pipe2(fds, O_CLOEXEC) != 0)
        fail(Errc::UdfPanic, std::string("pipe: ") + std::strerror(errno));
    const pid_t pid = ::fork();
    if (pid < 0) {
        ::close(fds[0]);
        ::close(fds[1]);
        fail(Errc::UdfPanic, std::string("fork: ") + std::strerror(errno));
    }
    if (pid == 0) {
        ::close(fds[0]);
        child_main(env, thunk, shared, fds[1]);
    }
    ::close(fds[1]);

    const auto deadline = std::chrono::steady_clock::now() + env.limits.wall_timeout;
    std::string report;
    bool timed_out = false;
    for (;;) {
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        if (left.count() <= 0) {
            timed_out = true;
            break;
        }
        pollfd p{fds[0], POLLIN, 0};
        const int r = ::poll(&p, 1, static_cast<int>(std::min<std::int64_t>(left.count(), 1000)));
        if (r < 0 && errno == EINTR)
            continue;
        if (r == 0)
            continue;
        char buf[4096];
        const auto n = ::read(fds[0], buf, sizeof buf);
        if (n < 0 && errno == EINTR)
            continue;
        if (n <= 0)
            break;
        report.append(buf, static_cast<std::size_t>(n));
    }
    ::close(fds[0]);
    if (timed_out) {
        ::kill(pid, SIGKILL);
        ::waitpid(pid, nullptr, 0);
        fail(Errc::Timeout, "UDF process exceeded its wall-clock limit of " +
                                std::to_string(env.limits.wall_timeout.count()) + " ms and was killed");
    }
    int status = 0;
    ::waitpid(pid, &status, 0);
    if (report.size() < 5) {
        if (WIFSIGNALED(status))
            fail(Errc::UdfPanic, "UDF process terminated by signal " + std::to_string(WTERMSIG(status)));
        fail(Errc::UdfPanic, "UDF process exited without reporting a result");
    }
    if (report[0] != 1) {
        std::uint32_t code = 0;
        std::memcpy(&code, report.data() + 1, sizeof code);
        throw Error(static_cast<Errc>(code), report.substr(5));
    }
    DataBuffer out;
    out.bytes.assign(static_cast<const std::uint8_t*>(shared), static_cast<const std::uint8_t*>(shared) + out_len);
    return out;
}

} // namespace

DataBuffer run_sandboxed(const ExecutionEnv& env, const Thunk& thunk, const SandboxOptions& options)
{
    const auto needed = materialized_bytes(env);
    if (needed > env.limits.memory_cap)
        fail(Errc::MemoryCapExceeded, "inputs and output need " + std::to_string(needed) + " bytes, cap is " +
                                          std::to_string(env.limits.memory_cap));
    if (options.process_isolation)
        return run_in_process(env, thunk);
    return run_in_thread(env, thunk, options);
}

} // namespace udfvault::runtime
