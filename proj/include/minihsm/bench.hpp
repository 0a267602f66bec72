#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include <sys/resource.h>

#include "minihsm/bytes.hpp"
#include "minihsm/envelope.hpp"
#include "minihsm/errors.hpp"
#include "minihsm/rng.hpp"
#include "minihsm/rsa.hpp"
#include "minihsm/token_store.hpp"

namespace minihsm {

enum class BenchOp : std::uint8_t { Encrypt, Decrypt, SlotAccess };

inline std::string_view bench_op_name(BenchOp op) {
    switch (op) {
        case BenchOp::Encrypt: return "encrypt";
        case BenchOp::Decrypt: return "decrypt";
        case BenchOp::SlotAccess: return "slot-access";
    }
    return "unknown";
}

struct BenchSample {
    double real_s = 0.0;
    double user_s = 0.0;
    double sys_s = 0.0;
    double peak_rss_pct = 0.0;
    double cpu_pct = 0.0;
    bool multicore_overlap = false;  // user+sys exceeded real
};

struct BenchReport {
    BenchOp op = BenchOp::Encrypt;
    std::uint64_t file_size_bytes = 0;
    std::vector<BenchSample> batches;  // per-batch means
    BenchSample grand_mean;
};

inline double mean_of(const std::vector<double>& values) {
    if (values.empty()) return 0.0;
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum / static_cast<double>(values.size());
}

inline BenchSample mean_sample(const std::vector<BenchSample>& samples) {
    BenchSample out;
    if (samples.empty()) return out;
    for (const auto& s : samples) {
        out.real_s += s.real_s;
        out.user_s += s.user_s;
        out.sys_s += s.sys_s;
        out.peak_rss_pct += s.peak_rss_pct;
        out.cpu_pct += s.cpu_pct;
        out.multicore_overlap = out.multicore_overlap || s.multicore_overlap;
    }
    const double n = static_cast<double>(samples.size());
    out.real_s /= n;
    out.user_s /= n;
    out.sys_s /= n;
    out.peak_rss_pct /= n;
    out.cpu_pct /= n;
    return out;
}

// Builds a report from already-aggregated batch values; grand mean is
// the arithmetic mean of the batches.
inline BenchReport aggregate_report(BenchOp op, std::uint64_t file_size_bytes,
                                    std::vector<BenchSample> batches) {
    BenchReport report;
    report.op = op;
    report.file_size_bytes = file_size_bytes;
    report.batches = std::move(batches);
    report.grand_mean = mean_sample(report.batches);
    return report;
}

// ------------------------------------------------------------ workload

// Deterministic pseudorandom file of exactly size_bytes (splitmix64).
inline void generate_workload(const std::filesystem::path& path, std::uint64_t size_bytes, std::uint64_t seed) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create " + path.string());
    std::uint64_t state = seed;
    auto next = [&state]() {
        state += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    };
    Bytes buf(64 * 1024);
    std::uint64_t remaining = size_bytes;
    while (remaining > 0) {
        const std::size_t chunk = remaining < buf.size() ? static_cast<std::size_t>(remaining) : buf.size();
        for (std::size_t i = 0; i < chunk; i += 8) {
            const std::uint64_t v = next();
            for (std::size_t j = 0; j < 8 && i + j < chunk; ++j)
                buf[i + j] = static_cast<std::uint8_t>(v >> (8 * j));
        }
        out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(chunk));
        remaining -= chunk;
    }
    out.flush();
    if (!out) throw IoError("write failed on " + path.string());
}

// ------------------------------------------------------------- sampler

namespace detail {

inline double read_mem_total_kb() {
    std::ifstream in("/proc/meminfo");
    std::string word;
    while (in >> word) {
        if (word == "MemTotal:") {
            double kb = 0;
            in >> kb;
            return kb;
        }
    }
    return 0.0;
}

inline double read_vm_rss_kb() {
    std::ifstream in("/proc/self/status");
    std::string word;
    while (in >> word) {
        if (word == "VmRSS:") {
            double kb = 0;
            in >> kb;
            return kb;
        }
    }
    return 0.0;
}

// Concurrent observer: polls resident-set size at 50 ms intervals while
// the measured operation runs. Cheap enough not to perturb the subject.
class RssSampler {
  public:
    void start() {
        peak_kb_ = read_vm_rss_kb();
        running_ = true;
        thread_ = std::thread([this] {
            while (running_) {
                const double kb = read_vm_rss_kb();
                if (kb > peak_kb_) peak_kb_ = kb;
                std::this_thread::sleep_for(std::chrono::milliseconds(50));
            }
        });
    }

    double stop_and_peak_kb() {
        running_ = false;
        if (thread_.joinable()) thread_.join();
        const double kb = read_vm_rss_kb();
        if (kb > peak_kb_) peak_kb_ = kb;
        return peak_kb_;
    }

  private:
    std::thread thread_;
    std::atomic<bool> running_{false};
    std::atomic<double> peak_kb_{0.0};
  };

}  // namespace detail

// Measures one closure invocation: monotonic wall clock, process user/sys
// CPU via rusage deltas, peak RSS as a percentage of physical memory,
// and mean CPU utilization over the run.
template <typename Fn>
BenchSample measure_once(Fn&& fn) {
    static const double mem_total_kb = detail::read_mem_total_kb();

    rusage before{};
    if (getrusage(RUSAGE_SELF, &before) != 0) throw MeasurementUnsupported();
    detail::RssSampler sampler;
    sampler.start();
    const auto t0 = std::chrono::steady_clock::now();

    fn();

    const auto t1 = std::chrono::steady_clock::now();
    const double peak_kb = sampler.stop_and_peak_kb();
    rusage after{};
    if (getrusage(RUSAGE_SELF, &after) != 0) throw MeasurementUnsupported();

    auto tv_s = [](const timeval& tv) { return static_cast<double>(tv.tv_sec) + static_cast<double>(tv.tv_usec) / 1e6; };
    BenchSample s;
    s.real_s = std::chrono::duration<double>(t1 - t0).count();
    s.user_s = tv_s(after.ru_utime) - tv_s(before.ru_utime);
    s.sys_s = tv_s(after.ru_stime) - tv_s(before.ru_stime);
    s.peak_rss_pct = mem_total_kb > 0 ? 100.0 * peak_kb / mem_total_kb : 0.0;
    s.cpu_pct = s.real_s > 0 ? 100.0 * (s.user_s + s.sys_s) / s.real_s : 0.0;
    s.multicore_overlap = (s.user_s + s.sys_s) > s.real_s;
    return s;
}

// --------------------------------------------------------- harness

// Everything the timed region must not contain: key material, workload
// bytes, the pre-sealed envelope and the slot token all get built here.
struct BenchEnvironment {
    std::filesystem::path work_dir;
    RsaPublicKey pub;
    RsaPrivateKey priv;
    std::filesystem::path workload_path;
    std::filesystem::path sealed_path;
    std::filesystem::path scratch_path;
    TokenFile token;
    std::string slot_label = "bench-slot";
    std::string user_pin = "bench-user-pin";
    std::string key_label = "bench-key";
};

inline BenchEnvironment prepare_bench(BenchOp op, std::uint64_t file_size_bytes, std::uint64_t seed,
                                      const std::filesystem::path& work_dir, std::size_t rsa_bits = 1024) {
    std::filesystem::create_directories(work_dir);
    BenchEnvironment env;
    env.work_dir = work_dir;
    env.workload_path = work_dir / "workload.bin";
    env.sealed_path = work_dir / "workload.env";
    env.scratch_path = work_dir / "scratch.out";

    Rng rng(seed);
    auto [pub, priv] = generate_keypair(rsa_bits, rng);
    env.pub = pub;
    env.priv = priv;

    generate_workload(env.workload_path, file_size_bytes, seed);
    if (op == BenchOp::Decrypt) {
        seal_file(env.workload_path, env.sealed_path, env.pub, rng);
    }
    if (op == BenchOp::SlotAccess) {
        create_slot(env.token, env.slot_label, env.user_pin, "bench-so-pin", rng);
        Session so = authenticate(env.token, env.slot_label, "bench-so-pin", Role::SecurityOfficer);
        import_private_key(env.token, so, env.key_label, env.priv, Protection::Protected, false, rng);
    }
    return env;
}

inline BenchReport run_benchmark(BenchOp op, std::uint64_t file_size_bytes, int batches, int samples,
                                 BenchEnvironment& env) {
    std::vector<BenchSample> batch_means;
    batch_means.reserve(static_cast<std::size_t>(batches));
    Rng rng;  // fresh randomness inside the timed ops; setup cost is already paid

    for (int b = 0; b < batches; ++b) {
        std::vector<BenchSample> pack;
        pack.reserve(static_cast<std::size_t>(samples));
        for (int s = 0; s < samples; ++s) {
            switch (op) {
                case BenchOp::Encrypt:
                    pack.push_back(measure_once([&] { seal_file(env.workload_path, env.scratch_path, env.pub, rng); }));
                    break;
                case BenchOp::Decrypt:
                    pack.push_back(measure_once([&] { open_file(env.sealed_path, env.scratch_path, env.priv); }));
                    break;
                case BenchOp::SlotAccess:
                    pack.push_back(measure_once([&] {
                        Session session = authenticate(env.token, env.slot_label, env.user_pin, Role::User);
                        const auto keys = list_keys(env.token, env.slot_label);
                        volatile bool found = false;
                        for (const auto& k : keys)
                            if (k.key_label == env.key_label) found = true;
                        (void)found;
                    }));
                    break;
            }
        }
        batch_means.push_back(mean_sample(pack));
    }
    return aggregate_report(op, file_size_bytes, std::move(batch_means));
}

// ---------------------------------------------------------- reporting

namespace detail {

inline std::string fmt3(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

}  // namespace detail

// One row per batch plus a final average row, three decimals throughout.
inline void emit_csv(const BenchReport& report, std::ostream& out) {
    out << "batch,real_s,user_s,sys_s,peak_rss_pct,cpu_pct\n";
    auto row = [&out](const std::string& name, const BenchSample& s) {
        out << name << ',' << detail::fmt3(s.real_s) << ',' << detail::fmt3(s.user_s) << ','
            << detail::fmt3(s.sys_s) << ',' << detail::fmt3(s.peak_rss_pct) << ','
            << detail::fmt3(s.cpu_pct) << '\n';
    };
    for (std::size_t i = 0; i < report.batches.size(); ++i) row(std::to_string(i + 1), report.batches[i]);
    row("average", report.grand_mean);
}

inline void emit_csv(const BenchReport& report, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot create " + path.string());
    emit_csv(report, out);
    if (!out) throw IoError("write failed on " + path.string());
}

// Same fields as the CSV, as a flat JSON document.
inline void emit_json(const BenchReport& report, std::ostream& out) {
    auto obj = [](const BenchSample& s) {
        std::string o = "{\"real_s\":" + detail::fmt3(s.real_s) + ",\"user_s\":" + detail::fmt3(s.user_s) +
                        ",\"sys_s\":" + detail::fmt3(s.sys_s) + ",\"peak_rss_pct\":" + detail::fmt3(s.peak_rss_pct) +
                        ",\"cpu_pct\":" + detail::fmt3(s.cpu_pct) + "}";
        return o;
    };
    out << "{\"op\":\"" << bench_op_name(report.op) << "\",\"file_size_bytes\":" << report.file_size_bytes
        << ",\"batches\":[";
    for (std::size_t i = 0; i < report.batches.size(); ++i) {
        if (i > 0) out << ',';
        out << obj(report.batches[i]);
    }
    out << "],\"average\":" << obj(report.grand_mean) << "}\n";
}

inline void emit_json(const BenchReport& report, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot create " + path.string());
    emit_json(report, out);
    if (!out) throw IoError("write failed on " + path.string());
}

}  // namespace minihsm
