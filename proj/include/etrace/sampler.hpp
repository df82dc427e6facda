#pragma once

#include "etrace/backend.hpp"
#include "etrace/clock.hpp"
#include "etrace/error.hpp"
#include "etrace/trace.hpp"

#include "fmt/format.h"

#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

extern char **environ;

namespace etrace {

struct SamplerConfig {
    double resolution_ms{ 100.0 };
    double pre_pad_ms{ 15000.0 };
    double post_pad_ms{ 10000.0 };
    /// Target program and arguments. Empty means duration mode.
    std::vector<std::string> command;
    std::optional<double> duration_ms;
    /// Added to (or replacing entries of) the inherited environment of the child.
    std::map<std::string, std::string> env;
    std::string label;
    DeviceSpec device{ devices::h100 };

    [[nodiscard]] bool command_mode() const { return !command.empty(); }

    void validate() const {
        if (!(resolution_ms >= 1.0)) {
            throw config_error{ fmt::format("resolution {} ms is below 1 ms", resolution_ms) };
        }
        if (pre_pad_ms < 0.0 || post_pad_ms < 0.0) {
            throw config_error{ "padding must be non-negative" };
        }
        if (command_mode() == duration_ms.has_value()) {
            throw config_error{ "exactly one of command and duration must be given" };
        }
        if (duration_ms && *duration_ms < 0.0) {
            throw config_error{ "duration must be non-negative" };
        }
    }
};

struct ChildExit {
    /// Clock time (not trace-relative) at which the exit was observed.
    double at_ms{};
    int status{};
};

/// The traced application as seen by the sampling loop.
class Child {
  public:
    virtual ~Child() = default;
    /// Starts the child; throws launch_error if it cannot be started.
    virtual void launch(Clock &clock) = 0;
    /// Non-blocking exit check.
    virtual std::optional<ChildExit> poll() = 0;
    /// Blocks until exit.
    virtual ChildExit wait() = 0;
};

/// A child that "runs" for a fixed time on the given clock. Used with VirtualClock.
class SimulatedChild final : public Child {
  public:
    explicit SimulatedChild(double runtime_ms, int exit_status = 0, bool fails_to_launch = false) :
        runtime_ms_{ runtime_ms },
        status_{ exit_status },
        fails_{ fails_to_launch } {}

    void launch(Clock &clock) override {
        if (fails_) {
            throw launch_error{ "simulated launch failure" };
        }
        clock_ = &clock;
        started_at_ = clock.now_ms();
    }

    std::optional<ChildExit> poll() override {
        if (clock_ && clock_->now_ms() >= started_at_ + runtime_ms_) {
            return ChildExit{ started_at_ + runtime_ms_, status_ };
        }
        return std::nullopt;
    }

    ChildExit wait() override {
        clock_->sleep_until_ms(started_at_ + runtime_ms_);
        return *poll();
    }

  private:
    double runtime_ms_;
    int status_;
    bool fails_;
    Clock *clock_{ nullptr };
    double started_at_{};
};

/// A real process. A supervision thread reaps it and posts the exit time; stdout/stderr are inherited.
class ProcessChild final : public Child {
  public:
    ProcessChild(std::vector<std::string> argv, std::map<std::string, std::string> env_overrides = {}) :
        argv_{ std::move(argv) },
        env_{ std::move(env_overrides) } {}

    ProcessChild(const ProcessChild &) = delete;
    ProcessChild &operator=(const ProcessChild &) = delete;

    ~ProcessChild() override {
        if (waiter_.joinable()) {
            waiter_.join();
        }
    }

    void launch(Clock &clock) override {
        if (argv_.empty()) {
            throw launch_error{ "empty command" };
        }
        std::vector<char *> args;
        for (auto &a : argv_) {
            args.push_back(a.data());
        }
        args.push_back(nullptr);

        std::vector<std::string> env_storage;
        for (char **e = environ; e && *e; ++e) {
            const std::string entry{ *e };
            const auto key = entry.substr(0, entry.find('='));
            if (!env_.count(key)) {
                env_storage.push_back(entry);
            }
        }
        for (const auto &[k, v] : env_) {
            env_storage.push_back(k + "=" + v);
        }
        std::vector<char *> envp;
        for (auto &e : env_storage) {
            envp.push_back(e.data());
        }
        envp.push_back(nullptr);

        pid_t pid{};
        if (const int rc = ::posix_spawnp(&pid, args[0], nullptr, nullptr, args.data(), envp.data()); rc != 0) {
            throw launch_error{ fmt::format("cannot launch '{}': {}", argv_[0], std::strerror(rc)) };
        }
        waiter_ = std::thread{ [this, pid, &clock] {
            int wstatus = 0;
            while (::waitpid(pid, &wstatus, 0) < 0 && errno == EINTR) {
            }
            const int status = WIFEXITED(wstatus) ? WEXITSTATUS(wstatus) : (WIFSIGNALED(wstatus) ? 128 + WTERMSIG(wstatus) : 1);
            const std::lock_guard lock{ mutex_ };
            exit_ = ChildExit{ clock.now_ms(), status };
        } };
    }

    std::optional<ChildExit> poll() override {
        const std::lock_guard lock{ mutex_ };
        return exit_;
    }

    ChildExit wait() override {
        if (waiter_.joinable()) {
            waiter_.join();
        }
        return *poll();
    }

  private:
    std::vector<std::string> argv_;
    std::map<std::string, std::string> env_;
    std::thread waiter_;
    std::mutex mutex_;
    std::optional<ChildExit> exit_;
};

struct TraceRun {
    Trace trace;
    /// Child exit status; empty in duration mode or when the launch failed.
    std::optional<int> exit_status;
    std::optional<std::string> launch_error;
    /// Ticks without a sample: skipped because the loop fell a full period behind, or failed reads.
    std::size_t dropped{};
    std::size_t scheduled{};
    double max_query_ms{};
    bool degraded{};
    /// The backend ran out of data before the run finished.
    bool truncated{};
};

/// Samples `backend` every `resolution_ms` on a fixed schedule (tick k at k·resolution from trace start).
/// In command mode the child starts after pre_pad and sampling continues until post_pad after it exits;
/// in duration mode ticks cover [0, duration] and padding is not applied. Samples carry the scheduled tick
/// time. A tick whose time is a full period in the past is skipped, never doubled.
inline TraceRun run_trace(const SamplerConfig &config, Backend &backend, Clock &clock, Child *child = nullptr) {
    config.validate();
    std::unique_ptr<Child> owned;
    if (config.command_mode() && child == nullptr) {
        owned = std::make_unique<ProcessChild>(config.command, config.env);
        child = owned.get();
    }
    const bool command_mode = child != nullptr;
    const double period = config.resolution_ms;

    TraceRun run;
    Trace &trace = run.trace;
    trace.resolution_ms = period;
    trace.device = config.device;
    trace.label = config.label;

    const double origin = clock.now_ms();
    backend.begin(origin);

    bool launched = false;
    bool stop_launching = false;
    double start_mark = 0.0;
    std::optional<ChildExit> exit;
    const double duration = config.duration_ms.value_or(0.0);
    std::optional<double> end_at;
    std::optional<double> last_processed;

    for (long long k = 0;; ++k) {
        const double tick = static_cast<double>(k) * period;
        if (launched && !exit) {
            if ((exit = child->poll())) {
                end_at = exit->at_ms - origin + config.post_pad_ms;
            }
        }
        if (command_mode) {
            if (end_at && last_processed && *last_processed >= *end_at) {
                break;
            }
        } else if (tick > duration) {
            break;
        }
        if (command_mode && !launched && !stop_launching && config.pre_pad_ms <= tick) {
            clock.sleep_until_ms(origin + config.pre_pad_ms);
            try {
                child->launch(clock);
                launched = true;
                start_mark = clock.now_ms() - origin;
            } catch (const etrace::launch_error &e) {
                run.launch_error = e.what();
                stop_launching = true;
                break;
            }
        }

        clock.sleep_until_ms(origin + tick);
        const double now = clock.now_ms() - origin;
        if (now - tick >= period) {
            const auto next = static_cast<long long>(std::floor(now / period));
            run.dropped += static_cast<std::size_t>(next - k);
            run.scheduled += static_cast<std::size_t>(next - k);
            k = next - 1;
            continue;
        }
        ++run.scheduled;
        last_processed = tick;
        const double before = clock.now_ms();
        try {
            const SensorReading r = backend.read();
            trace.samples.push_back({ tick, std::max(r.power_w, 0.0), r.temp_c, std::clamp(r.util_pct, 0.0, 100.0) });
        } catch (const end_of_stream &) {
            --run.scheduled;
            run.truncated = true;
            break;
        } catch (const backend_error &) {
            ++run.dropped;
        }
        run.max_query_ms = std::max(run.max_query_ms, clock.now_ms() - before);
    }

    if (launched) {
        if (!exit) {
            exit = child->wait();
        }
        run.exit_status = exit->status;
        if (!trace.samples.empty()) {
            const double last = trace.end_ms();
            trace.marks = Marks{ std::min(start_mark, last), std::min(exit->at_ms - origin, last) };
        }
    } else if (!command_mode && !trace.samples.empty()) {
        trace.marks = Marks{ 0.0, trace.end_ms() };
    }
    if (command_mode) {
        trace.pre_pad_ms = config.pre_pad_ms;
        if (!trace.marks) {
            trace.pre_pad_ms.reset();
        }
    }

    run.degraded = run.scheduled > 0 && static_cast<double>(run.dropped) > 0.1 * static_cast<double>(run.scheduled);
    trace.extra["backend"] = backend.name();
    trace.extra["dropped"] = std::to_string(run.dropped);
    trace.extra["max_query_ms"] = fmt::format("{:.3f}", run.max_query_ms);
    trace.extra["degraded"] = run.degraded ? "1" : "0";
    if (run.truncated) {
        trace.extra["truncated"] = "1";
    }
    return run;
}

/// Everything one sweep element needs. `child` may be null in duration mode.
struct SweepRig {
    std::unique_ptr<Clock> clock;
    std::unique_ptr<Backend> backend;
    std::unique_ptr<Child> child;
};

struct SweepEntry {
    double resolution_ms{};
    std::optional<TraceRun> run;
    std::string error;
};

/// One run per resolution with an otherwise identical config. A failing element is reported, not fatal.
inline std::vector<SweepEntry> sweep_resolutions(const SamplerConfig &config, const std::vector<double> &resolutions, const std::function<SweepRig(double)> &make_rig) {
    std::vector<SweepEntry> out;
    for (double r : resolutions) {
        SweepEntry entry{ r, std::nullopt, {} };
        try {
            SamplerConfig c = config;
            c.resolution_ms = r;
            SweepRig rig = make_rig(r);
            entry.run = run_trace(c, *rig.backend, *rig.clock, rig.child.get());
        } catch (const std::exception &e) {
            entry.error = e.what();
        }
        out.push_back(std::move(entry));
    }
    return out;
}

}  // namespace etrace
