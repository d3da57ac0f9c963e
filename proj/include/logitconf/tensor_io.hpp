#pragma once

// GLF1: the self-describing binary tensor format used for every array that
// crosses the process boundary (logit means/stds, labels, prediction and
// confidence maps).
//
//   bytes 0..3   magic 'G' 'L' 'F' '1'
//   u32 LE       ndim (1..4)
//   ndim x u32   dims, each >= 1
//   u8           dtype: 1 = f32 LE, 2 = u32 LE
//   payload      row-major, exactly prod(dims) elements
//
// The file length must match the header exactly. Floats travel as raw bit
// patterns, so NaN payloads survive a round trip unchanged.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace logitconf {

enum class Dtype : uint8_t { F32 = 1, U32 = 2 };

struct TensorIoError : std::runtime_error {
    enum class Kind { BadMagic, Truncated, BadDtype, LengthMismatch, BadDims, Io };
    Kind kind;
    TensorIoError(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
};

struct Tensor {
    std::vector<uint32_t> dims;
    Dtype dtype = Dtype::F32;
    std::vector<float> f32;
    std::vector<uint32_t> u32;

    uint64_t elem_count() const {
        uint64_t n = 1;
        for (uint32_t d : dims) n *= d;
        return n;
    }

    static Tensor from_f32(std::vector<uint32_t> dims, std::vector<float> values) {
        Tensor t;
        t.dims = std::move(dims);
        t.dtype = Dtype::F32;
        t.f32 = std::move(values);
        return t;
    }
    static Tensor from_u32(std::vector<uint32_t> dims, std::vector<uint32_t> values) {
        Tensor t;
        t.dims = std::move(dims);
        t.dtype = Dtype::U32;
        t.u32 = std::move(values);
        return t;
    }
};

namespace detail {

inline void put_u32le(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v));
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v >> 16));
    out.push_back(static_cast<uint8_t>(v >> 24));
}

inline uint32_t get_u32le(const uint8_t* p) {
    return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 | uint32_t(p[3]) << 24;
}

} // namespace detail

inline std::vector<uint8_t> encode_tensor(const Tensor& t) {
    if (t.dims.empty() || t.dims.size() > 4)
        throw TensorIoError(TensorIoError::Kind::BadDims, "ndim must be in [1,4]");
    for (uint32_t d : t.dims)
        if (d == 0) throw TensorIoError(TensorIoError::Kind::BadDims, "zero dimension");
    const uint64_t n = t.elem_count();
    const size_t have = t.dtype == Dtype::F32 ? t.f32.size() : t.u32.size();
    if (have != n)
        throw TensorIoError(TensorIoError::Kind::LengthMismatch,
                            "payload does not match dims");

    std::vector<uint8_t> out;
    out.reserve(9 + 4 * t.dims.size() + 4 * n);
    out.push_back('G'); out.push_back('L'); out.push_back('F'); out.push_back('1');
    detail::put_u32le(out, static_cast<uint32_t>(t.dims.size()));
    for (uint32_t d : t.dims) detail::put_u32le(out, d);
    out.push_back(static_cast<uint8_t>(t.dtype));
    if (t.dtype == Dtype::F32) {
        for (float v : t.f32) detail::put_u32le(out, std::bit_cast<uint32_t>(v));
    } else {
        for (uint32_t v : t.u32) detail::put_u32le(out, v);
    }
    return out;
}

inline Tensor decode_tensor(const std::vector<uint8_t>& bytes) {
    using K = TensorIoError::Kind;
    if (bytes.size() < 4) throw TensorIoError(K::Truncated, "file shorter than magic");
    if (bytes[0] != 'G' || bytes[1] != 'L' || bytes[2] != 'F' || bytes[3] != '1')
        throw TensorIoError(K::BadMagic, "bad magic");
    if (bytes.size() < 8) throw TensorIoError(K::Truncated, "truncated before ndim");
    const uint32_t ndim = detail::get_u32le(bytes.data() + 4);
    if (ndim < 1 || ndim > 4) throw TensorIoError(K::BadDims, "ndim out of [1,4]");
    if (bytes.size() < 8 + 4ull * ndim + 1)
        throw TensorIoError(K::Truncated, "truncated header");

    Tensor t;
    uint64_t n = 1;
    for (uint32_t i = 0; i < ndim; ++i) {
        const uint32_t d = detail::get_u32le(bytes.data() + 8 + 4 * i);
        if (d == 0) throw TensorIoError(K::BadDims, "zero dimension");
        t.dims.push_back(d);
        n *= d; // ndim<=4, dims<2^32: fits u64
    }
    const uint8_t code = bytes[8 + 4ull * ndim];
    if (code != 1 && code != 2) throw TensorIoError(K::BadDtype, "unknown dtype code");
    t.dtype = static_cast<Dtype>(code);

    const uint64_t header = 9 + 4ull * ndim;
    const uint64_t expected = header + 4 * n; // length check before any allocation
    if (bytes.size() < expected) throw TensorIoError(K::Truncated, "payload truncated");
    if (bytes.size() > expected)
        throw TensorIoError(K::LengthMismatch, "trailing bytes after payload");

    const uint8_t* p = bytes.data() + header;
    if (t.dtype == Dtype::F32) {
        t.f32.resize(n);
        for (uint64_t i = 0; i < n; ++i)
            t.f32[i] = std::bit_cast<float>(detail::get_u32le(p + 4 * i));
    } else {
        t.u32.resize(n);
        for (uint64_t i = 0; i < n; ++i) t.u32[i] = detail::get_u32le(p + 4 * i);
    }
    return t;
}

inline void write_tensor(const std::string& path, const Tensor& t) {
    const std::vector<uint8_t> bytes = encode_tensor(t);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw TensorIoError(TensorIoError::Kind::Io, "cannot open for writing: " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw TensorIoError(TensorIoError::Kind::Io, "write failed: " + path);
}

inline Tensor read_tensor(const std::string& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw TensorIoError(TensorIoError::Kind::Io, "cannot open: " + path);
    const std::streamsize size = in.tellg();
    in.seekg(0);
    std::vector<uint8_t> bytes(static_cast<size_t>(size));
    if (size > 0) in.read(reinterpret_cast<char*>(bytes.data()), size);
    if (!in) throw TensorIoError(TensorIoError::Kind::Io, "read failed: " + path);
    return decode_tensor(bytes);
}

} // namespace logitconf
