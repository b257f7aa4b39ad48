#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <new>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace fedus::nn {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
    return out + "]";
}

/// 64-byte aligned storage. Vectorized kernels peel unaligned heads, so the
/// floating-point summation order depends on the buffer address; a fixed
/// alignment makes results independent of heap state.
template <class T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::align_val_t alignment{64};

    AlignedAllocator() noexcept = default;
    template <class U>
    AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

    T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), alignment)); }
    void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, alignment); }

    template <class U>
    bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

template <class T>
using Buffer = std::vector<T, AlignedAllocator<T>>;

/// Dense row-major tensor with an optional gradient accumulator.
template <class T>
struct Tensor {
    Shape shape;
    Buffer<T> data;
    Buffer<T> grad;

    Tensor() = default;
    explicit Tensor(Shape s, T fill = T(0)) : shape(std::move(s)), data(numel(shape), fill) {}
    Tensor(Shape s, Buffer<T> values) : shape(std::move(s)), data(std::move(values)) {
        if (data.size() != numel(shape)) throw std::invalid_argument("tensor: data does not match shape " + shape_str(shape));
    }
    Tensor(Shape s, const std::vector<T>& values) : Tensor(std::move(s), Buffer<T>(values.begin(), values.end())) {}
    Tensor(Shape s, std::initializer_list<T> values) : Tensor(std::move(s), Buffer<T>(values)) {}

    std::size_t size() const noexcept { return data.size(); }
    std::size_t rank() const noexcept { return shape.size(); }

    void zero_grad() { grad.assign(data.size(), T(0)); }
    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), T(0));
    }

    template <class U>
    Tensor<U> cast() const {
        return Tensor<U>(shape, Buffer<U>(data.begin(), data.end()));
    }
};

} // namespace fedus::nn
