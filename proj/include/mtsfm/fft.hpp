#pragma once

#include <fftw3.h>

#include <map>
#include <mutex>
#include <utility>
#include <vector>

#include "mtsfm/core.hpp"

namespace mtsfm::fft {

namespace detail {

// FFTW planning is not thread-safe; execution on caller arrays is. Plans are
// made once per (size, direction) with FFTW_UNALIGNED so any std::vector
// buffer can be passed to fftw_execute_dft.
class PlanCache {
public:
    static PlanCache& instance() {
        static PlanCache cache;
        return cache;
    }

    fftw_plan get(int n, int sign) {
        std::lock_guard lock(mutex_);
        const auto key = std::make_pair(n, sign);
        if (auto it = plans_.find(key); it != plans_.end()) return it->second;
        std::vector<cplx> scratch(static_cast<std::size_t>(n));
        auto* p = reinterpret_cast<fftw_complex*>(scratch.data());
        fftw_plan plan = fftw_plan_dft_1d(n, p, p, sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
        if (plan == nullptr) throw Error("fftw plan creation failed");
        plans_.emplace(key, plan);
        return plan;
    }

    PlanCache(const PlanCache&) = delete;
    PlanCache& operator=(const PlanCache&) = delete;

    ~PlanCache() {
        for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
    }

private:
    PlanCache() = default;
    std::mutex mutex_;
    std::map<std::pair<int, int>, fftw_plan> plans_;
};

inline void execute(std::vector<cplx>& data, int sign) {
    if (data.empty()) return;
    fftw_plan plan = PlanCache::instance().get(static_cast<int>(data.size()), sign);
    auto* p = reinterpret_cast<fftw_complex*>(data.data());
    fftw_execute_dft(plan, p, p);
}

}  // namespace detail

// In-place forward DFT, X_k = sum_n x_n exp(-j 2 pi k n / N). Unnormalized.
inline void forward(std::vector<cplx>& data) { detail::execute(data, FFTW_FORWARD); }

// In-place inverse DFT, unnormalized (caller divides by N).
inline void inverse(std::vector<cplx>& data) { detail::execute(data, FFTW_BACKWARD); }

// Signed frequency of bin k for an L-point transform at sample rate fs.
inline double bin_frequency(std::size_t k, std::size_t L, double fs) {
    const auto kk = static_cast<long long>(k);
    const auto LL = static_cast<long long>(L);
    const long long s = kk < (LL + 1) / 2 ? kk : kk - LL;
    return static_cast<double>(s) * fs / static_cast<double>(L);
}

}  // namespace mtsfm::fft
