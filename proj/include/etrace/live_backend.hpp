#pragma once

#include "etrace/backend.hpp"
#include "etrace/clock.hpp"
#include "etrace/error.hpp"

#include "fmt/format.h"

#include <dlfcn.h>

#include <cstdint>
#include <initializer_list>
#include <memory>
#include <string>
#include <utility>

namespace etrace {

enum class VendorKind { nvml, rocm };

/// Result of one vendor query: status 0 means success, anything else is the vendor's error code.
struct VendorValue {
    int status{};
    double value{};
};

/// The three vendor query families a live backend needs, already converted to W, %, and °C.
class VendorQueries {
  public:
    virtual ~VendorQueries() = default;
    virtual VendorValue power_usage() = 0;
    virtual VendorValue busy_percent() = 0;
    virtual VendorValue temperature() = 0;
    [[nodiscard]] virtual std::string family() const = 0;
};

/// Forwards vendor values as-is; a failing query raises backend_error with the vendor code.
class LiveBackend final : public Backend {
  public:
    LiveBackend(std::unique_ptr<VendorQueries> queries, const Clock &clock) :
        queries_{ std::move(queries) },
        clock_{ &clock } {}

    SensorReading read() override {
        const auto check = [this](VendorValue v, const char *what) {
            if (v.status != 0) {
                throw backend_error{ fmt::format("{} {} query failed", queries_->family(), what), v.status };
            }
            return v.value;
        };
        SensorReading r;
        r.power_w = check(queries_->power_usage(), "power-usage");
        r.util_pct = check(queries_->busy_percent(), "busy-percent");
        r.temp_c = check(queries_->temperature(), "temperature");
        r.acquired_at_ms = clock_->now_ms();
        return r;
    }

    [[nodiscard]] std::string name() const override { return queries_->family(); }

  private:
    std::unique_ptr<VendorQueries> queries_;
    const Clock *clock_;
};

/// Returns configured values; lets the live path be exercised on hosts without a GPU.
class StubQueries final : public VendorQueries {
  public:
    StubQueries(VendorValue power, VendorValue busy, VendorValue temp) :
        power_{ power },
        busy_{ busy },
        temp_{ temp } {}

    VendorValue power_usage() override { return power_; }
    VendorValue busy_percent() override { return busy_; }
    VendorValue temperature() override { return temp_; }
    [[nodiscard]] std::string family() const override { return "stub"; }

  private:
    VendorValue power_, busy_, temp_;
};

namespace detail {

class SharedLibrary {
  public:
    explicit SharedLibrary(std::initializer_list<const char *> names) {
        for (const char *n : names) {
            if ((handle_ = ::dlopen(n, RTLD_NOW | RTLD_LOCAL)) != nullptr) {
                return;
            }
        }
    }

    SharedLibrary(const SharedLibrary &) = delete;
    SharedLibrary &operator=(const SharedLibrary &) = delete;

    ~SharedLibrary() {
        if (handle_) {
            ::dlclose(handle_);
        }
    }

    [[nodiscard]] bool loaded() const noexcept { return handle_ != nullptr; }

    template <typename Fn>
    Fn symbol(const char *name) const {
        void *sym = ::dlsym(handle_, name);
        if (sym == nullptr) {
            throw capability_error{ fmt::format("vendor library lacks symbol '{}'", name) };
        }
        return reinterpret_cast<Fn>(sym);
    }

  private:
    void *handle_{ nullptr };
};

// NVML: power in mW, utilization in %, temperature in °C.
class NvmlQueries final : public VendorQueries {
  public:
    explicit NvmlQueries(int device_index) :
        lib_{ "libnvidia-ml.so.1", "libnvidia-ml.so" } {
        if (!lib_.loaded()) {
            throw capability_error{ "NVML library not found on this host; use --backend synthetic or --backend replay" };
        }
        init_ = lib_.symbol<int (*)()>("nvmlInit_v2");
        shutdown_ = lib_.symbol<int (*)()>("nvmlShutdown");
        handle_by_index_ = lib_.symbol<int (*)(unsigned, void **)>("nvmlDeviceGetHandleByIndex_v2");
        power_ = lib_.symbol<int (*)(void *, unsigned *)>("nvmlDeviceGetPowerUsage");
        util_ = lib_.symbol<int (*)(void *, Utilization *)>("nvmlDeviceGetUtilizationRates");
        temp_ = lib_.symbol<int (*)(void *, int, unsigned *)>("nvmlDeviceGetTemperature");
        if (int rc = init_(); rc != 0) {
            throw capability_error{ fmt::format("nvmlInit failed with code {}", rc) };
        }
        if (int rc = handle_by_index_(static_cast<unsigned>(device_index), &device_); rc != 0) {
            shutdown_();
            throw config_error{ fmt::format("NVML rejected device index {} (code {})", device_index, rc) };
        }
    }

    ~NvmlQueries() override { shutdown_(); }

    VendorValue power_usage() override {
        unsigned mw = 0;
        const int rc = power_(device_, &mw);
        return { rc, mw / 1000.0 };
    }

    VendorValue busy_percent() override {
        Utilization u{};
        const int rc = util_(device_, &u);
        return { rc, static_cast<double>(u.gpu) };
    }

    VendorValue temperature() override {
        unsigned c = 0;
        const int rc = temp_(device_, 0 /* NVML_TEMPERATURE_GPU */, &c);
        return { rc, static_cast<double>(c) };
    }

    [[nodiscard]] std::string family() const override { return "nvml"; }

  private:
    struct Utilization {
        unsigned gpu;
        unsigned memory;
    };

    SharedLibrary lib_;
    int (*init_)(){};
    int (*shutdown_)(){};
    int (*handle_by_index_)(unsigned, void **){};
    int (*power_)(void *, unsigned *){};
    int (*util_)(void *, Utilization *){};
    int (*temp_)(void *, int, unsigned *){};
    void *device_{};
};

// rocm_smi_lib: power in µW, busy in %, temperature in m°C.
class RocmQueries final : public VendorQueries {
  public:
    explicit RocmQueries(int device_index) :
        lib_{ "librocm_smi64.so", "librocm_smi64.so.7", "librocm_smi64.so.6", "librocm_smi64.so.5" },
        index_{ static_cast<std::uint32_t>(device_index) } {
        if (!lib_.loaded()) {
            throw capability_error{ "rocm_smi_lib not found on this host; use --backend synthetic or --backend replay" };
        }
        init_ = lib_.symbol<int (*)(std::uint64_t)>("rsmi_init");
        shutdown_ = lib_.symbol<int (*)()>("rsmi_shut_down");
        count_ = lib_.symbol<int (*)(std::uint32_t *)>("rsmi_num_monitor_devices");
        power_ = lib_.symbol<int (*)(std::uint32_t, std::uint32_t, std::uint64_t *)>("rsmi_dev_power_ave_get");
        busy_ = lib_.symbol<int (*)(std::uint32_t, std::uint32_t *)>("rsmi_dev_busy_percent_get");
        temp_ = lib_.symbol<int (*)(std::uint32_t, std::uint32_t, int, std::int64_t *)>("rsmi_dev_temp_metric_get");
        if (int rc = init_(0); rc != 0) {
            throw capability_error{ fmt::format("rsmi_init failed with code {}", rc) };
        }
        std::uint32_t n = 0;
        if (int rc = count_(&n); rc != 0 || index_ >= n) {
            shutdown_();
            throw config_error{ fmt::format("rocm_smi_lib has no device {} ({} devices, code {})", device_index, n, rc) };
        }
    }

    ~RocmQueries() override { shutdown_(); }

    VendorValue power_usage() override {
        std::uint64_t uw = 0;
        const int rc = power_(index_, 0, &uw);
        return { rc, static_cast<double>(uw) / 1.0e6 };
    }

    VendorValue busy_percent() override {
        std::uint32_t pct = 0;
        const int rc = busy_(index_, &pct);
        return { rc, static_cast<double>(pct) };
    }

    VendorValue temperature() override {
        std::int64_t milli = 0;
        const int rc = temp_(index_, 0 /* edge sensor */, 0 /* current */, &milli);
        return { rc, static_cast<double>(milli) / 1000.0 };
    }

    [[nodiscard]] std::string family() const override { return "rocm"; }

  private:
    SharedLibrary lib_;
    std::uint32_t index_;
    int (*init_)(std::uint64_t){};
    int (*shutdown_)(){};
    int (*count_)(std::uint32_t *){};
    int (*power_)(std::uint32_t, std::uint32_t, std::uint64_t *){};
    int (*busy_)(std::uint32_t, std::uint32_t *){};
    int (*temp_)(std::uint32_t, std::uint32_t, int, std::int64_t *){};
};

}  // namespace detail

/// Opens a vendor-backed backend. The vendor library is loaded at runtime, so builds never depend on it;
/// a missing library surfaces as capability_error.
inline std::unique_ptr<Backend> open_live_backend(VendorKind kind, int device_index, const Clock &clock) {
    if (device_index < 0) {
        throw config_error{ fmt::format("invalid device index {}", device_index) };
    }
    std::unique_ptr<VendorQueries> q;
    if (kind == VendorKind::nvml) {
        q = std::make_unique<detail::NvmlQueries>(device_index);
    } else {
        q = std::make_unique<detail::RocmQueries>(device_index);
    }
    return std::make_unique<LiveBackend>(std::move(q), clock);
}

}  // namespace etrace
