#pragma once

#include <fftw3.h>

#include <complex>
#include <mutex>
#include <stdexcept>
#include <vector>

namespace nlsdn::fft {

// FFTW planning is not thread safe; executing distinct plans is.
inline std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

template <class T>
struct AlignedBuffer {
    T* ptr = nullptr;
    std::size_t n = 0;
    AlignedBuffer() = default;
    explicit AlignedBuffer(std::size_t count) : ptr(static_cast<T*>(fftw_malloc(sizeof(T) * count))), n(count) {
        if (!ptr) throw std::bad_alloc();
    }
    AlignedBuffer(const AlignedBuffer&) = delete;
    AlignedBuffer& operator=(const AlignedBuffer&) = delete;
    AlignedBuffer(AlignedBuffer&& o) noexcept : ptr(o.ptr), n(o.n) { o.ptr = nullptr; o.n = 0; }
    AlignedBuffer& operator=(AlignedBuffer&& o) noexcept {
        std::swap(ptr, o.ptr);
        std::swap(n, o.n);
        return *this;
    }
    ~AlignedBuffer() {
        if (ptr) fftw_free(ptr);
    }
    T& operator[](std::size_t i) { return ptr[i]; }
    const T& operator[](std::size_t i) const { return ptr[i]; }
};

class Plan {
public:
    Plan() = default;
    explicit Plan(fftw_plan p) : p_(p) {
        if (!p_) throw std::runtime_error("FFTW planning failed");
    }
    Plan(const Plan&) = delete;
    Plan& operator=(const Plan&) = delete;
    Plan(Plan&& o) noexcept : p_(o.p_) { o.p_ = nullptr; }
    Plan& operator=(Plan&& o) noexcept {
        std::swap(p_, o.p_);
        return *this;
    }
    ~Plan() {
        if (p_) {
            std::lock_guard<std::mutex> lk(planner_mutex());
            fftw_destroy_plan(p_);
        }
    }
    fftw_plan get() const { return p_; }

private:
    fftw_plan p_ = nullptr;
};

// Multi-dimensional DST-I (RODFT00), dims in row-major order (last fastest).
inline Plan plan_dst1(const std::vector<int>& dims, double* buf) {
    std::vector<fftw_r2r_kind> kinds(dims.size(), FFTW_RODFT00);
    std::lock_guard<std::mutex> lk(planner_mutex());
    return Plan(fftw_plan_r2r(static_cast<int>(dims.size()), dims.data(), buf, buf, kinds.data(), FFTW_ESTIMATE));
}

// Out-of-place multi-dimensional complex DFT.
inline Plan plan_dft(const std::vector<int>& dims, std::complex<double>* in, std::complex<double>* out, int sign) {
    std::lock_guard<std::mutex> lk(planner_mutex());
    return Plan(fftw_plan_dft(static_cast<int>(dims.size()), dims.data(), reinterpret_cast<fftw_complex*>(in),
                              reinterpret_cast<fftw_complex*>(out), sign, FFTW_ESTIMATE));
}

// Forward DFT of an arbitrary complex array (copied into aligned storage).
inline std::vector<std::complex<double>> dft(const std::vector<int>& dims, const std::vector<std::complex<double>>& a) {
    AlignedBuffer<std::complex<double>> in(a.size()), out(a.size());
    Plan p = plan_dft(dims, in.ptr, out.ptr, FFTW_FORWARD);
    for (std::size_t i = 0; i < a.size(); ++i) in[i] = a[i];
    fftw_execute(p.get());
    return std::vector<std::complex<double>>(out.ptr, out.ptr + a.size());
}

}  // namespace nlsdn::fft
