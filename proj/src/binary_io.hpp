// deltascan: permission-control vulnerability scanner for EVM contracts
// Copyright 2026 The deltascan Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <deltascan/bytes.hpp>
#include <deltascan/linalg.hpp>

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

namespace deltascan::io
{
static_assert(std::endian::native == std::endian::little, "serialization assumes a little-endian host");

struct ShortRead : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

class Writer
{
public:
    template <class T>
    void put(T v)
    {
        const auto* p = reinterpret_cast<const char*>(&v);
        buf_.append(p, sizeof v);
    }
    void raw(const void* data, std::size_t n) { buf_.append(static_cast<const char*>(data), n); }
    void str16(std::string_view s)
    {
        put(static_cast<std::uint16_t>(s.size()));
        buf_.append(s);
    }
    void floats(const float* data, std::size_t n) { raw(data, n * sizeof(float)); }
    void matrix(const linalg::Mat& m)
    {
        put(static_cast<std::uint32_t>(m.rows()));
        put(static_cast<std::uint32_t>(m.cols()));
        floats(m.data(), static_cast<std::size_t>(m.size()));
    }
    void vector(const linalg::Vec& v)
    {
        put(static_cast<std::uint32_t>(v.size()));
        floats(v.data(), static_cast<std::size_t>(v.size()));
    }
    const std::string& data() const { return buf_; }
    std::string& data() { return buf_; }

private:
    std::string buf_;
};

class Reader
{
public:
    explicit Reader(std::string_view data) : data_{data} {}

    template <class T>
    T get()
    {
        T v;
        std::memcpy(&v, take(sizeof v), sizeof v);
        return v;
    }
    std::string str16()
    {
        const auto n = get<std::uint16_t>();
        return std::string{take(n), n};
    }
    void floats(float* out, std::size_t n) { std::memcpy(out, take(n * sizeof(float)), n * sizeof(float)); }
    linalg::Mat matrix()
    {
        const auto r = get<std::uint32_t>();
        const auto c = get<std::uint32_t>();
        if (std::uint64_t{r} * c * sizeof(float) > remaining())
            throw ShortRead{"matrix exceeds input"};
        linalg::Mat m(r, c);
        floats(m.data(), static_cast<std::size_t>(m.size()));
        return m;
    }
    linalg::Vec vector()
    {
        const auto n = get<std::uint32_t>();
        if (std::uint64_t{n} * sizeof(float) > remaining())
            throw ShortRead{"vector exceeds input"};
        linalg::Vec v(n);
        floats(v.data(), n);
        return v;
    }
    const char* take(std::size_t n)
    {
        if (n > remaining())
            throw ShortRead{"unexpected end of input"};
        const char* p = data_.data() + pos_;
        pos_ += n;
        return p;
    }
    std::size_t remaining() const { return data_.size() - pos_; }
    std::size_t position() const { return pos_; }

private:
    std::string_view data_;
    std::size_t pos_ = 0;
};

inline std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in{path, std::ios::binary};
    if (!in)
        throw std::runtime_error{"cannot open " + path.string()};
    return std::string{std::istreambuf_iterator<char>{in}, {}};
}

/// Writes through a sibling temporary file and renames it into place.
inline void write_file(const std::filesystem::path& path, std::string_view data)
{
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out{tmp, std::ios::binary | std::ios::trunc};
        if (!out)
            throw std::runtime_error{"cannot write " + tmp.string()};
        out.write(data.data(), static_cast<std::streamsize>(data.size()));
        if (!out)
            throw std::runtime_error{"short write to " + tmp.string()};
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace deltascan::io
